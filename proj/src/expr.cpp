#include "atl/expr.hpp"

#include <algorithm>
#include <mutex>
#include <unordered_set>

namespace atl {

namespace {

size_t combine(size_t h, size_t v) { return h * 1000003u ^ v; }

size_t content_hash(const Expr& e) {
  size_t h = static_cast<size_t>(e.kind) + 0x2545f491;
  h = combine(h, std::hash<std::string>{}(e.name));
  h = combine(h, e.value.hash());
  h = combine(h, static_cast<size_t>(e.side));
  h = combine(h, e.idx.hash());
  h = combine(h, std::hash<const Pred*>{}(e.pred.get()));
  if (e.ann) h = combine(h, e.ann->hash());
  for (const auto& k : e.kids) h = combine(h, std::hash<const Expr*>{}(k.get()));
  return h;
}

bool content_eq(const Expr& x, const Expr& y) {
  if (x.kind != y.kind || x.name != y.name || x.side != y.side) return false;
  if (!(x.value == y.value) || x.idx != y.idx || x.pred != y.pred) return false;
  if (x.ann.has_value() != y.ann.has_value()) return false;
  if (x.ann && !(*x.ann == *y.ann)) return false;
  return x.kids == y.kids;
}

struct TableHash {
  size_t operator()(const ExprPtr& e) const { return e->hash; }
};
struct TableEq {
  bool operator()(const ExprPtr& a, const ExprPtr& b) const { return content_eq(*a, *b); }
};

ExprPtr intern(Expr&& node) {
  static std::mutex mu;
  static std::unordered_set<ExprPtr, TableHash, TableEq> table;
  node.hash = content_hash(node);
  auto candidate = std::make_shared<const Expr>(std::move(node));
  std::lock_guard<std::mutex> lock(mu);
  auto [it, inserted] = table.insert(candidate);
  return *it;
}

Expr make(ExprKind k) {
  Expr e;
  e.kind = k;
  return e;
}

}  // namespace

ExprPtr e_var(std::string name) {
  Expr e = make(ExprKind::Var);
  e.name = std::move(name);
  return intern(std::move(e));
}

ExprPtr e_const(Rational value) {
  Expr e = make(ExprKind::Const);
  e.value = std::move(value);
  return intern(std::move(e));
}

ExprPtr e_add(ExprPtr a, ExprPtr b) {
  Expr e = make(ExprKind::Add);
  e.kids = {std::move(a), std::move(b)};
  return intern(std::move(e));
}

ExprPtr e_mul(ExprPtr a, ExprPtr b) {
  Expr e = make(ExprKind::Mul);
  e.kids = {std::move(a), std::move(b)};
  return intern(std::move(e));
}

ExprPtr e_call(std::string fn, std::vector<ExprPtr> args) {
  Expr e = make(ExprKind::Call);
  e.name = std::move(fn);
  e.kids = std::move(args);
  return intern(std::move(e));
}

ExprPtr e_tuple(ExprPtr a, ExprPtr b) {
  Expr e = make(ExprKind::Tuple);
  e.kids = {std::move(a), std::move(b)};
  return intern(std::move(e));
}

ExprPtr e_proj(int side, ExprPtr x) {
  Expr e = make(ExprKind::Proj);
  e.side = side;
  e.kids = {std::move(x)};
  return intern(std::move(e));
}

ExprPtr e_gen(std::string var, IndexExpr extent, ExprPtr body) {
  Expr e = make(ExprKind::Gen);
  e.name = std::move(var);
  e.idx = std::move(extent);
  e.kids = {std::move(body)};
  return intern(std::move(e));
}

ExprPtr e_sum(std::string var, IndexExpr extent, ExprPtr body) {
  Expr e = make(ExprKind::Sum);
  e.name = std::move(var);
  e.idx = std::move(extent);
  e.kids = {std::move(body)};
  return intern(std::move(e));
}

ExprPtr e_access(ExprPtr x, IndexExpr idx) {
  Expr e = make(ExprKind::Access);
  e.idx = std::move(idx);
  e.kids = {std::move(x)};
  return intern(std::move(e));
}

ExprPtr e_guard(PredPtr p, ExprPtr x) {
  if (p->is_true()) return x;
  Expr e = make(ExprKind::Guard);
  e.pred = std::move(p);
  e.kids = {std::move(x)};
  return intern(std::move(e));
}

ExprPtr e_let(std::string var, std::optional<Type> ann, ExprPtr rhs, ExprPtr body) {
  Expr e = make(ExprKind::Let);
  e.name = std::move(var);
  e.ann = std::move(ann);
  e.kids = {std::move(rhs), std::move(body)};
  return intern(std::move(e));
}

ExprPtr e_guarded_access(ExprPtr x, IndexExpr idx) {
  Expr e = make(ExprKind::GuardedAccess);
  e.idx = std::move(idx);
  e.kids = {std::move(x)};
  return intern(std::move(e));
}

ExprPtr e_zero(const Type& t, NameGen& names) {
  switch (t.kind()) {
    case Type::Kind::Scalar: return e_const(Rational(0));
    case Type::Kind::Pair: return e_tuple(e_zero(t.left(), names), e_zero(t.right(), names));
    case Type::Kind::Tensor:
      return e_gen(names.fresh("z"), t.extent(), e_zero(t.elem(), names));
  }
  fail(Errc::Internal, "bad type");
}

std::string NameGen::fresh(const std::string& base) {
  auto& k = counters_[base];
  while (true) {
    std::string cand = k == 0 ? base : base + std::to_string(k);
    ++k;
    if (avoid_.insert(cand).second) return cand;
  }
}

namespace {

void free_vars_rec(const ExprPtr& e, std::set<std::string>& bound, std::set<std::string>& out) {
  switch (e->kind) {
    case ExprKind::Var:
      if (!bound.count(e->name)) out.insert(e->name);
      return;
    case ExprKind::Let: {
      free_vars_rec(e->kid(0), bound, out);
      bool was = bound.count(e->name);
      bound.insert(e->name);
      free_vars_rec(e->kid(1), bound, out);
      if (!was) bound.erase(e->name);
      return;
    }
    default:
      for (const auto& k : e->kids) free_vars_rec(k, bound, out);
      return;
  }
}

void aff_vars(const IndexExpr& a, std::set<std::string>& out) {
  for (const auto& [v, c] : a.coeffs()) out.insert(v);
}

void free_idx_rec(const ExprPtr& e, std::set<std::string>& bound, std::set<std::string>& out) {
  auto add = [&](const std::set<std::string>& vs) {
    for (const auto& v : vs)
      if (!bound.count(v)) out.insert(v);
  };
  switch (e->kind) {
    case ExprKind::Gen:
    case ExprKind::Sum: {
      std::set<std::string> vs;
      aff_vars(e->idx, vs);
      add(vs);
      bool was = bound.count(e->name);
      bound.insert(e->name);
      free_idx_rec(e->kid(0), bound, out);
      if (!was) bound.erase(e->name);
      return;
    }
    case ExprKind::Access:
    case ExprKind::GuardedAccess: {
      std::set<std::string> vs;
      aff_vars(e->idx, vs);
      add(vs);
      free_idx_rec(e->kid(0), bound, out);
      return;
    }
    case ExprKind::Guard: {
      std::set<std::string> vs;
      pred_free_vars(e->pred, vs);
      add(vs);
      free_idx_rec(e->kid(0), bound, out);
      return;
    }
    default:
      for (const auto& k : e->kids) free_idx_rec(k, bound, out);
      return;
  }
}

}  // namespace

std::set<std::string> free_vars(const ExprPtr& e) {
  std::set<std::string> bound, out;
  free_vars_rec(e, bound, out);
  return out;
}

std::set<std::string> free_index_vars(const ExprPtr& e) {
  std::set<std::string> bound, out;
  free_idx_rec(e, bound, out);
  return out;
}

void all_names(const ExprPtr& e, std::set<std::string>& out) {
  if (!e->name.empty()) out.insert(e->name);
  aff_vars(e->idx, out);
  if (e->pred) pred_free_vars(e->pred, out);
  for (const auto& k : e->kids) all_names(k, out);
}

namespace {

// Names mentioned by the active replacements of a substitution.
void subst_mentions(const Subst& su, std::set<std::string>& out) {
  for (const auto& [v, repl] : su.exprs) {
    auto fv = free_vars(repl);
    out.insert(fv.begin(), fv.end());
    auto fi = free_index_vars(repl);
    out.insert(fi.begin(), fi.end());
  }
  for (const auto& [v, repl] : su.idxs) aff_vars(repl, out);
}

std::string rename_binder(const std::string& base, const std::set<std::string>& avoid) {
  int k = 0;
  while (true) {
    std::string cand = base + "_r" + std::to_string(k++);
    if (!avoid.count(cand)) return cand;
  }
}

ExprPtr subst_rec(const ExprPtr& e, const Subst& su) {
  if (su.empty()) return e;
  auto subst_aff = [&](const IndexExpr& a) { return a.substituted_all(su.idxs); };
  switch (e->kind) {
    case ExprKind::Var: {
      auto it = su.exprs.find(e->name);
      return it == su.exprs.end() ? e : it->second;
    }
    case ExprKind::Const:
      return e;
    case ExprKind::Add:
      return e_add(subst_rec(e->kid(0), su), subst_rec(e->kid(1), su));
    case ExprKind::Mul:
      return e_mul(subst_rec(e->kid(0), su), subst_rec(e->kid(1), su));
    case ExprKind::Call: {
      std::vector<ExprPtr> args;
      args.reserve(e->kids.size());
      for (const auto& k : e->kids) args.push_back(subst_rec(k, su));
      return e_call(e->name, std::move(args));
    }
    case ExprKind::Tuple:
      return e_tuple(subst_rec(e->kid(0), su), subst_rec(e->kid(1), su));
    case ExprKind::Proj:
      return e_proj(e->side, subst_rec(e->kid(0), su));
    case ExprKind::Gen:
    case ExprKind::Sum: {
      Subst inner = su;
      inner.idxs.erase(e->name);
      IndexExpr extent = subst_aff(e->idx);
      std::string var = e->name;
      ExprPtr body = e->kid(0);
      std::set<std::string> mentioned;
      subst_mentions(inner, mentioned);
      if (mentioned.count(var)) {
        std::set<std::string> avoid = mentioned;
        all_names(body, avoid);
        for (const auto& [v, r] : inner.exprs) avoid.insert(v);
        for (const auto& [v, r] : inner.idxs) avoid.insert(v);
        std::string nv = rename_binder(var, avoid);
        Subst ren;
        ren.idxs.emplace(var, IndexExpr::variable(nv));
        body = subst_rec(body, ren);
        var = nv;
      }
      body = subst_rec(body, inner);
      return e->kind == ExprKind::Gen ? e_gen(var, std::move(extent), body)
                                      : e_sum(var, std::move(extent), body);
    }
    case ExprKind::Access:
      return e_access(subst_rec(e->kid(0), su), subst_aff(e->idx));
    case ExprKind::GuardedAccess:
      return e_guarded_access(subst_rec(e->kid(0), su), subst_aff(e->idx));
    case ExprKind::Guard: {
      std::unordered_map<std::string, IndexExpr> pm(su.idxs.begin(), su.idxs.end());
      return e_guard(pred_substitute(e->pred, pm), subst_rec(e->kid(0), su));
    }
    case ExprKind::Let: {
      ExprPtr rhs = subst_rec(e->kid(0), su);
      Subst inner = su;
      inner.exprs.erase(e->name);
      std::string var = e->name;
      ExprPtr body = e->kid(1);
      std::set<std::string> mentioned;
      subst_mentions(inner, mentioned);
      if (mentioned.count(var)) {
        std::set<std::string> avoid = mentioned;
        all_names(body, avoid);
        for (const auto& [v, r] : inner.exprs) avoid.insert(v);
        std::string nv = rename_binder(var, avoid);
        Subst ren;
        ren.exprs.emplace(var, e_var(nv));
        body = subst_rec(body, ren);
        var = nv;
      }
      body = subst_rec(body, inner);
      return e_let(var, e->ann, rhs, body);
    }
  }
  fail(Errc::Internal, "bad expr kind");
}

}  // namespace

ExprPtr substitute(const ExprPtr& e, const Subst& su) { return subst_rec(e, su); }

ExprPtr substitute_var(const ExprPtr& e, const std::string& name, const ExprPtr& repl) {
  Subst su;
  su.exprs.emplace(name, repl);
  return subst_rec(e, su);
}

ExprPtr substitute_idx(const ExprPtr& e, const std::string& name, const IndexExpr& repl) {
  Subst su;
  su.idxs.emplace(name, repl);
  return subst_rec(e, su);
}

namespace {

ExprPtr alpha_rec(const ExprPtr& e, NameGen& names, Subst& ren) {
  switch (e->kind) {
    case ExprKind::Gen:
    case ExprKind::Sum: {
      std::string nv = names.fresh(e->name);
      auto extent = e->idx.substituted_all(ren.idxs);
      auto saved = ren.idxs.find(e->name) != ren.idxs.end()
                       ? std::optional<IndexExpr>(ren.idxs.at(e->name))
                       : std::nullopt;
      ren.idxs[e->name] = IndexExpr::variable(nv);
      ExprPtr body = alpha_rec(e->kid(0), names, ren);
      if (saved)
        ren.idxs[e->name] = *saved;
      else
        ren.idxs.erase(e->name);
      return e->kind == ExprKind::Gen ? e_gen(nv, extent, body) : e_sum(nv, extent, body);
    }
    case ExprKind::Let: {
      ExprPtr rhs = alpha_rec(e->kid(0), names, ren);
      std::string nv = names.fresh(e->name);
      auto saved = ren.exprs.find(e->name) != ren.exprs.end()
                       ? std::optional<ExprPtr>(ren.exprs.at(e->name))
                       : std::nullopt;
      ren.exprs[e->name] = e_var(nv);
      ExprPtr body = alpha_rec(e->kid(1), names, ren);
      if (saved)
        ren.exprs[e->name] = *saved;
      else
        ren.exprs.erase(e->name);
      return e_let(nv, e->ann, rhs, body);
    }
    case ExprKind::Var: {
      auto it = ren.exprs.find(e->name);
      return it == ren.exprs.end() ? e : it->second;
    }
    case ExprKind::Const:
      return e;
    default: {
      // Uniform recursion over kids plus payload renaming.
      auto subst_aff = [&](const IndexExpr& a) { return a.substituted_all(ren.idxs); };
      std::vector<ExprPtr> kids;
      kids.reserve(e->kids.size());
      for (const auto& k : e->kids) kids.push_back(alpha_rec(k, names, ren));
      switch (e->kind) {
        case ExprKind::Add: return e_add(kids[0], kids[1]);
        case ExprKind::Mul: return e_mul(kids[0], kids[1]);
        case ExprKind::Call: return e_call(e->name, std::move(kids));
        case ExprKind::Tuple: return e_tuple(kids[0], kids[1]);
        case ExprKind::Proj: return e_proj(e->side, kids[0]);
        case ExprKind::Access: return e_access(kids[0], subst_aff(e->idx));
        case ExprKind::GuardedAccess: return e_guarded_access(kids[0], subst_aff(e->idx));
        case ExprKind::Guard:
          return e_guard(pred_substitute(e->pred, ren.idxs), kids[0]);
        default: fail(Errc::Internal, "alpha: unexpected kind");
      }
    }
  }
}

}  // namespace

ExprPtr alpha_uniquify(const ExprPtr& e, NameGen& names) {
  Subst ren;
  return alpha_rec(e, names, ren);
}

namespace {

// Name-insensitive key: index and let binders become de Bruijn levels.
void key_rec(const ExprPtr& e, std::vector<std::string>& stack, std::string& out) {
  auto var_token = [&](const std::string& v) -> std::string {
    for (size_t i = stack.size(); i-- > 0;)
      if (stack[i] == v) return "@" + std::to_string(stack.size() - 1 - i);
    return v;
  };
  auto aff_token = [&](const IndexExpr& a) {
    std::vector<std::string> parts;
    for (const auto& [v, c] : a.coeffs()) parts.push_back(var_token(v) + "*" + std::to_string(c));
    std::sort(parts.begin(), parts.end());
    std::string s = "{" + std::to_string(a.offset());
    for (auto& p : parts) s += "," + p;
    return s + "}";
  };
  std::function<void(const PredPtr&)> pred_token = [&](const PredPtr& p) {
    out += "P" + std::to_string(static_cast<int>(p->kind));
    switch (p->kind) {
      case Pred::Kind::Cmp:
        out += std::to_string(static_cast<int>(p->op)) + aff_token(p->lhs) + aff_token(p->rhs);
        return;
      case Pred::Kind::Rel:
        out += p->rel;
        for (const auto& a : p->args) out += aff_token(a);
        return;
      case Pred::Kind::And:
      case Pred::Kind::Or:
        pred_token(p->a);
        pred_token(p->b);
        return;
      case Pred::Kind::Exists:
        out += aff_token(p->extent);
        stack.push_back(p->var);
        pred_token(p->body);
        stack.pop_back();
        return;
      default:
        return;
    }
  };

  out += "E" + std::to_string(static_cast<int>(e->kind));
  switch (e->kind) {
    case ExprKind::Var:
      out += var_token(e->name);
      return;
    case ExprKind::Const:
      out += e->value.str();
      return;
    case ExprKind::Call:
      out += e->name;
      break;
    case ExprKind::Proj:
      out += std::to_string(e->side);
      break;
    case ExprKind::Access:
    case ExprKind::GuardedAccess:
      out += aff_token(e->idx);
      break;
    case ExprKind::Guard:
      pred_token(e->pred);
      break;
    case ExprKind::Gen:
    case ExprKind::Sum: {
      out += aff_token(e->idx);
      stack.push_back(e->name);
      out += "(";
      key_rec(e->kid(0), stack, out);
      out += ")";
      stack.pop_back();
      return;
    }
    case ExprKind::Let: {
      out += "(";
      key_rec(e->kid(0), stack, out);
      out += ")";
      stack.push_back(e->name);
      out += "(";
      key_rec(e->kid(1), stack, out);
      out += ")";
      stack.pop_back();
      return;
    }
    default:
      break;
  }
  for (const auto& k : e->kids) {
    out += "(";
    key_rec(k, stack, out);
    out += ")";
  }
}

ExprPtr sort_commutative(const ExprPtr& e) {
  std::vector<ExprPtr> kids;
  kids.reserve(e->kids.size());
  for (const auto& k : e->kids) kids.push_back(sort_commutative(k));
  switch (e->kind) {
    case ExprKind::Add:
    case ExprKind::Mul: {
      if (structural_key(kids[1]) < structural_key(kids[0])) std::swap(kids[0], kids[1]);
      return e->kind == ExprKind::Add ? e_add(kids[0], kids[1]) : e_mul(kids[0], kids[1]);
    }
    case ExprKind::Var:
    case ExprKind::Const:
      return e;
    case ExprKind::Call: return e_call(e->name, std::move(kids));
    case ExprKind::Tuple: return e_tuple(kids[0], kids[1]);
    case ExprKind::Proj: return e_proj(e->side, kids[0]);
    case ExprKind::Gen: return e_gen(e->name, e->idx, kids[0]);
    case ExprKind::Sum: return e_sum(e->name, e->idx, kids[0]);
    case ExprKind::Access: return e_access(kids[0], e->idx);
    case ExprKind::GuardedAccess: return e_guarded_access(kids[0], e->idx);
    case ExprKind::Guard: return e_guard(e->pred, kids[0]);
    case ExprKind::Let: return e_let(e->name, e->ann, kids[0], kids[1]);
  }
  fail(Errc::Internal, "bad expr kind");
}

void collect_index_binders(const ExprPtr& e, std::vector<std::string>& order,
                           std::set<std::string>& seen) {
  if (e->kind == ExprKind::Gen || e->kind == ExprKind::Sum) {
    if (seen.insert(e->name).second) order.push_back(e->name);
  }
  for (const auto& k : e->kids) collect_index_binders(k, order, seen);
}

}  // namespace

std::string structural_key(const ExprPtr& e) {
  std::string out;
  std::vector<std::string> stack;
  key_rec(e, stack, out);
  return out;
}

ExprPtr canonicalize(const ExprPtr& e) {
  ExprPtr sorted = sort_commutative(e);
  // Canonical index binder names by first occurrence, skipping clashes with
  // free variables.
  std::vector<std::string> order;
  std::set<std::string> seen;
  collect_index_binders(sorted, order, seen);
  std::set<std::string> avoid = free_index_vars(sorted);
  auto fv = free_vars(sorted);
  avoid.insert(fv.begin(), fv.end());
  Subst ren;
  int next = 0;
  for (const auto& old : order) {
    std::string nv;
    do {
      nv = "i" + std::to_string(next++);
    } while (avoid.count(nv) && nv != old);
    if (nv != old) ren.idxs.emplace(old, IndexExpr::variable(nv));
  }
  if (ren.idxs.empty()) return sorted;
  // Binder names are substituted along with occurrences: the substitution
  // machinery only rewrites occurrences, so rebuild binders by a direct pass.
  std::function<ExprPtr(const ExprPtr&)> go = [&](const ExprPtr& x) -> ExprPtr {
    auto subst_aff = [&](const IndexExpr& a) { return a.substituted_all(ren.idxs); };
    std::vector<ExprPtr> kids;
    kids.reserve(x->kids.size());
    for (const auto& k : x->kids) kids.push_back(go(k));
    switch (x->kind) {
      case ExprKind::Var:
      case ExprKind::Const:
        return x;
      case ExprKind::Add: return e_add(kids[0], kids[1]);
      case ExprKind::Mul: return e_mul(kids[0], kids[1]);
      case ExprKind::Call: return e_call(x->name, std::move(kids));
      case ExprKind::Tuple: return e_tuple(kids[0], kids[1]);
      case ExprKind::Proj: return e_proj(x->side, kids[0]);
      case ExprKind::Gen:
      case ExprKind::Sum: {
        std::string nv = x->name;
        auto it = ren.idxs.find(x->name);
        if (it != ren.idxs.end()) nv = it->second.single_variable();
        return x->kind == ExprKind::Gen ? e_gen(nv, subst_aff(x->idx), kids[0])
                                        : e_sum(nv, subst_aff(x->idx), kids[0]);
      }
      case ExprKind::Access: return e_access(kids[0], subst_aff(x->idx));
      case ExprKind::GuardedAccess: return e_guarded_access(kids[0], subst_aff(x->idx));
      case ExprKind::Guard: return e_guard(pred_substitute(x->pred, ren.idxs), kids[0]);
      case ExprKind::Let: return e_let(x->name, x->ann, kids[0], kids[1]);
    }
    fail(Errc::Internal, "bad expr kind");
  };
  return go(sorted);
}

}  // namespace atl
