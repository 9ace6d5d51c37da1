#include "atl/ssa.hpp"

#include <algorithm>
#include <functional>

#include "atl/eval.hpp"

namespace atl {

namespace {

ExprPtr wrap_gens(const std::vector<IndexBinder>& gens, ExprPtr core) {
  for (size_t i = gens.size(); i-- > 0;) core = e_gen(gens[i].name, gens[i].extent, core);
  return core;
}

ExprPtr wrap_sums(const std::vector<IndexBinder>& sums, ExprPtr core) {
  for (size_t i = sums.size(); i-- > 0;) core = e_sum(sums[i].name, sums[i].extent, core);
  return core;
}

ExprPtr full_access(const std::string& var, const std::vector<IndexBinder>& idx) {
  ExprPtr e = e_var(var);
  for (const auto& b : idx) e = e_access(e, IndexExpr::variable(b.name));
  return e;
}

}  // namespace

std::vector<std::string> rhs_operands(const SSARhs& rhs) {
  if (std::holds_alternative<SSAAdd>(rhs)) {
    const auto& a = std::get<SSAAdd>(rhs);
    return {a.x0, a.x1};
  }
  if (std::holds_alternative<SSAMap>(rhs)) return std::get<SSAMap>(rhs).args;
  if (std::holds_alternative<SSAContract>(rhs)) {
    const auto& c = std::get<SSAContract>(rhs);
    if (c.binary) return {c.x0, c.x1};
    return {c.x0};
  }
  return {};
}

ExprPtr rhs_to_expr(const SSARhs& rhs) {
  if (std::holds_alternative<SSAInput>(rhs)) {
    const auto& in = std::get<SSAInput>(rhs);
    ExprPtr e = e_var(in.input);
    for (int s : in.path) e = e_proj(s, e);
    return e;
  }
  if (std::holds_alternative<SSAConst>(rhs)) {
    const auto& c = std::get<SSAConst>(rhs);
    return wrap_gens(c.gens, e_guard(c.pred, e_const(c.value)));
  }
  if (std::holds_alternative<SSAAdd>(rhs)) {
    const auto& a = std::get<SSAAdd>(rhs);
    ExprPtr core = e_add(e_guard(a.p0, full_access(a.x0, a.gens)),
                         e_guard(a.p1, full_access(a.x1, a.gens)));
    return wrap_gens(a.gens, core);
  }
  if (std::holds_alternative<SSAMap>(rhs)) {
    const auto& m = std::get<SSAMap>(rhs);
    std::vector<ExprPtr> args;
    args.reserve(m.args.size());
    for (const auto& x : m.args) args.push_back(full_access(x, m.gens));
    return wrap_gens(m.gens, e_guard(m.pred, e_call(m.fn, std::move(args))));
  }
  const auto& c = std::get<SSAContract>(rhs);
  ExprPtr core = c.binary ? e_mul(full_access(c.x0, c.left), full_access(c.x1, c.right))
                          : full_access(c.x0, c.left);
  core = e_guard(c.pred, core);
  std::vector<IndexBinder> sums = c.left;
  if (c.binary) sums.insert(sums.end(), c.right.begin(), c.right.end());
  sums.insert(sums.end(), c.sums.begin(), c.sums.end());
  return wrap_gens(c.gens, wrap_sums(sums, core));
}

Type rhs_type(const SSARhs& rhs, const std::map<std::string, Type>& input_types) {
  auto tensor_over = [](const std::vector<IndexBinder>& gens) {
    Type t = Type::scalar();
    for (size_t i = gens.size(); i-- > 0;) t = Type::tensor(gens[i].extent, t);
    return t;
  };
  if (std::holds_alternative<SSAInput>(rhs)) {
    const auto& in = std::get<SSAInput>(rhs);
    auto it = input_types.find(in.input);
    if (it == input_types.end()) fail(Errc::UnboundVariable, "'" + in.input + "'");
    Type t = it->second;
    for (int s : in.path) {
      if (!t.is_pair()) fail(Errc::TypeMismatch, "projection of non-pair input chain");
      t = s == 0 ? t.left() : t.right();
    }
    return t;
  }
  if (std::holds_alternative<SSAConst>(rhs)) return tensor_over(std::get<SSAConst>(rhs).gens);
  if (std::holds_alternative<SSAAdd>(rhs)) return tensor_over(std::get<SSAAdd>(rhs).gens);
  if (std::holds_alternative<SSAMap>(rhs)) return tensor_over(std::get<SSAMap>(rhs).gens);
  return tensor_over(std::get<SSAContract>(rhs).gens);
}

ExprPtr SSAProgram::to_expr() const {
  std::function<ExprPtr(const OutputTree&)> out_expr = [&](const OutputTree& t) -> ExprPtr {
    if (t.is_leaf()) return e_var(t.leaf);
    return e_tuple(out_expr(t.kids[0]), out_expr(t.kids[1]));
  };
  ExprPtr e = out_expr(output);
  for (size_t i = bindings.size(); i-- > 0;)
    e = e_let(bindings[i].name, std::nullopt, rhs_to_expr(bindings[i].rhs), e);
  return e;
}

const SSABinding& SSAProgram::binding(const std::string& name) const {
  for (const auto& b : bindings)
    if (b.name == name) return b;
  fail(Errc::Internal, "no binding named " + name);
}

bool SSAProgram::has_binding(const std::string& name) const {
  for (const auto& b : bindings)
    if (b.name == name) return true;
  return false;
}

Type SSAProgram::output_type() const {
  std::function<Type(const OutputTree&)> t = [&](const OutputTree& o) -> Type {
    if (o.is_leaf()) return binding(o.leaf).type;
    return Type::pair(t(o.kids[0]), t(o.kids[1]));
  };
  return t(output);
}

SourceProgram SSAProgram::to_program() const {
  SourceProgram p;
  p.size_vars = size_vars;
  p.relations = relations;
  p.inputs = inputs;
  p.body = to_expr();
  return p;
}

// ---------------------------------------------------------------------------
// Builder

namespace {

std::vector<IndexBinder*> binder_listing(SSARhs& rhs) {
  std::vector<IndexBinder*> out;
  auto push = [&](std::vector<IndexBinder>& v) {
    for (auto& b : v) out.push_back(&b);
  };
  if (auto* c = std::get_if<SSAConst>(&rhs)) push(c->gens);
  if (auto* a = std::get_if<SSAAdd>(&rhs)) push(a->gens);
  if (auto* m = std::get_if<SSAMap>(&rhs)) push(m->gens);
  if (auto* k = std::get_if<SSAContract>(&rhs)) {
    push(k->gens);
    push(k->left);
    push(k->right);
    push(k->sums);
  }
  return out;
}

PredPtr* rhs_pred(SSARhs& rhs) {
  if (auto* c = std::get_if<SSAConst>(&rhs)) return &c->pred;
  if (auto* m = std::get_if<SSAMap>(&rhs)) return &m->pred;
  if (auto* k = std::get_if<SSAContract>(&rhs)) return &k->pred;
  return nullptr;
}

// Canonical index names i0, i1, ... assigned in listing order; extent and
// predicate variables that are not binders (size variables) are avoided.
void canon_indices(SSARhs& rhs) {
  auto binders = binder_listing(rhs);
  if (binders.empty()) return;
  std::set<std::string> avoid;
  for (auto* b : binders)
    for (const auto& [v, c] : b->extent.coeffs()) avoid.insert(v);
  std::set<std::string> binder_names;
  for (auto* b : binders) binder_names.insert(b->name);
  if (auto* p = rhs_pred(rhs)) {
    std::set<std::string> pv;
    pred_free_vars(*p, pv);
    for (const auto& v : pv)
      if (!binder_names.count(v)) avoid.insert(v);
  }
  if (auto* a = std::get_if<SSAAdd>(&rhs)) {
    for (const auto* p : {&a->p0, &a->p1}) {
      std::set<std::string> pv;
      pred_free_vars(*p, pv);
      for (const auto& v : pv)
        if (!binder_names.count(v)) avoid.insert(v);
    }
  }
  std::unordered_map<std::string, IndexExpr> ren;
  int next = 0;
  for (auto* b : binders) {
    std::string nv;
    do {
      nv = "i" + std::to_string(next++);
    } while (avoid.count(nv) && nv != b->name);
    if (nv != b->name) ren.emplace(b->name, IndexExpr::variable(nv));
    b->name = nv;
  }
  if (ren.empty()) return;
  if (auto* p = rhs_pred(rhs)) *p = pred_substitute(*p, ren);
  if (auto* a = std::get_if<SSAAdd>(&rhs)) {
    a->p0 = pred_substitute(a->p0, ren);
    a->p1 = pred_substitute(a->p1, ren);
  }
}

std::string binder_key(const std::vector<IndexBinder>& v) {
  std::string s = "(";
  for (const auto& b : v) s += b.name + ":" + b.extent.str() + ",";
  return s + ")";
}

std::string rhs_key(const SSARhs& rhs) {
  if (const auto* in = std::get_if<SSAInput>(&rhs)) {
    std::string s = "in:" + in->input;
    for (int k : in->path) s += "." + std::to_string(k);
    return s;
  }
  if (const auto* c = std::get_if<SSAConst>(&rhs))
    return "const:" + binder_key(c->gens) + pred_str(c->pred) + ":" + c->value.str();
  if (const auto* a = std::get_if<SSAAdd>(&rhs))
    return "add:" + binder_key(a->gens) + "[" + pred_str(a->p0) + "]" + a->x0 + "+[" +
           pred_str(a->p1) + "]" + a->x1;
  if (const auto* m = std::get_if<SSAMap>(&rhs)) {
    std::string s = "map:" + binder_key(m->gens) + "[" + pred_str(m->pred) + "]" + m->fn + "(";
    for (const auto& x : m->args) s += x + ",";
    return s + ")";
  }
  const auto& k = std::get<SSAContract>(rhs);
  std::string s = k.binary ? "bin:" : "un:";
  s += binder_key(k.gens) + binder_key(k.left) + binder_key(k.right) + binder_key(k.sums);
  s += "[" + pred_str(k.pred) + "]" + k.x0;
  if (k.binary) s += "*" + k.x1;
  return s;
}

}  // namespace

SSABuilder::SSABuilder(std::vector<std::pair<std::string, Type>> inputs, NameGen names)
    : inputs_(std::move(inputs)), names_(std::move(names)) {
  for (const auto& [x, t] : inputs_) input_types_.emplace(x, t);
}

std::string SSABuilder::resolve(const std::string& var) const {
  auto it = alias_.find(var);
  return it == alias_.end() ? var : it->second;
}

const Type& SSABuilder::type_of_binding(const std::string& name) const {
  auto it = binding_types_.find(name);
  if (it == binding_types_.end()) fail(Errc::Internal, "unknown binding " + name);
  return it->second;
}

void SSABuilder::adopt(const SSABinding& b) {
  birth_.emplace(b.name, bindings_.size());
  bindings_.push_back(b);
  binding_types_.emplace(b.name, b.type);
  cse_.emplace(rhs_key(b.rhs), b.name);
  names_.avoid(b.name);
}

std::string SSABuilder::define(SSARhs rhs) {
  // A unary contraction with no generators, no summations, and a true
  // predicate is just its operand.
  if (auto* k = std::get_if<SSAContract>(&rhs)) {
    if (!k->binary && k->gens.empty() && k->left.empty() && k->sums.empty() &&
        k->pred->is_true())
      return k->x0;
  }
  // Ordering conventions: addition terms and contraction factors in birth
  // order of their defining bindings.
  if (auto* a = std::get_if<SSAAdd>(&rhs)) {
    bool swap = birth_.at(a->x1) < birth_.at(a->x0) ||
                (a->x0 == a->x1 && pred_str(a->p1) < pred_str(a->p0));
    if (swap) {
      std::swap(a->x0, a->x1);
      std::swap(a->p0, a->p1);
    }
  }
  if (auto* k = std::get_if<SSAContract>(&rhs)) {
    if (k->binary && birth_.at(k->x1) < birth_.at(k->x0)) {
      std::swap(k->x0, k->x1);
      std::swap(k->left, k->right);
    }
  }
  canon_indices(rhs);
  std::string key = rhs_key(rhs);
  auto it = cse_.find(key);
  if (it != cse_.end()) return it->second;
  std::string name = names_.fresh("X" + std::to_string(bindings_.size()));
  Type t = rhs_type(rhs, input_types_);
  birth_.emplace(name, bindings_.size());
  bindings_.push_back(SSABinding{name, std::move(rhs), t});
  binding_types_.emplace(name, t);
  cse_.emplace(std::move(key), name);
  return name;
}

Type SSABuilder::infer(const ExprPtr& e) const {
  switch (e->kind) {
    case ExprKind::Var: {
      std::string n = resolve(e->name);
      auto it = binding_types_.find(n);
      if (it != binding_types_.end()) return it->second;
      auto jt = input_types_.find(n);
      if (jt != input_types_.end()) return jt->second;
      fail(Errc::UnboundVariable, "'" + e->name + "' in SSA conversion");
    }
    case ExprKind::Const:
    case ExprKind::Add:
    case ExprKind::Mul:
    case ExprKind::Call:
    case ExprKind::Sum:
      return Type::scalar();
    case ExprKind::Access:
      return infer(e->kid(0)).elem();
    case ExprKind::Proj: {
      Type t = infer(e->kid(0));
      return e->side == 0 ? t.left() : t.right();
    }
    case ExprKind::Guard:
      return infer(e->kid(0));
    case ExprKind::Gen:
      return Type::tensor(e->idx, infer(e->kid(0)));
    default:
      fail(Errc::NotNormalized, "unexpected construct in SSA conversion");
  }
}

namespace {

std::string fresh_index(const std::set<std::string>& used, int& counter) {
  for (;;) {
    std::string cand = "q" + std::to_string(counter++);
    if (!used.count(cand)) return cand;
  }
}

std::set<std::string> used_index_names(const std::vector<IndexBinder>& gens, const PredPtr& p,
                                       const ExprPtr& core) {
  std::set<std::string> used;
  for (const auto& b : gens) {
    used.insert(b.name);
    for (const auto& [v, c] : b.extent.coeffs()) used.insert(v);
  }
  pred_free_vars(p, used);
  auto fi = free_index_vars(core);
  used.insert(fi.begin(), fi.end());
  return used;
}

}  // namespace

// When a summation spine already has the shape of an SSA contraction —
// factors are full accesses of named tensors, indexed by the leading
// summation binders in order — emit it directly. This makes conversion a
// fixed point on SSA-shaped input instead of re-expanding it through gathers.
std::optional<SSAContract> SSABuilder::match_contraction(
    const std::vector<IndexBinder>& gens, PredPtr pred, const std::vector<IndexBinder>& sums,
    const ExprPtr& inner) const {
  std::set<std::string> gen_names;
  for (const auto& b : gens) gen_names.insert(b.name);

  // A factor: access chain over a binding, every index a distinct plain
  // variable, extents matching the binding's dims.
  auto factor = [&](const ExprPtr& e, std::string* var, std::vector<std::string>* vars) {
    std::vector<IndexExpr> idxs;
    ExprPtr b = e;
    while (b->kind == ExprKind::Access) {
      idxs.push_back(b->idx);
      b = b->kid(0);
    }
    std::reverse(idxs.begin(), idxs.end());
    if (b->kind != ExprKind::Var) return false;
    std::string name = resolve(b->name);
    auto it = binding_types_.find(name);
    if (it == binding_types_.end()) return false;
    std::vector<SizeExpr> dims = it->second.dims();
    if (dims.size() != idxs.size()) return false;
    vars->clear();
    for (size_t k = 0; k < idxs.size(); ++k) {
      if (!idxs[k].is_variable()) return false;
      vars->push_back(idxs[k].single_variable());
    }
    *var = name;
    return true;
  };
  auto segment_matches = [&](const std::vector<std::string>& vars, size_t offset) {
    if (offset + vars.size() > sums.size()) return false;
    for (size_t k = 0; k < vars.size(); ++k)
      if (vars[k] != sums[offset + k].name || gen_names.count(vars[k])) return false;
    return true;
  };
  auto extents_match = [&](const std::string& var, size_t offset, size_t count) {
    std::vector<SizeExpr> dims = binding_types_.at(var).dims();
    for (size_t k = 0; k < count; ++k)
      if (!(dims[k] == sums[offset + k].extent)) return false;
    return true;
  };

  std::string x0, x1;
  std::vector<std::string> v0, v1;
  if (inner->kind == ExprKind::Mul && factor(inner->kid(0), &x0, &v0) &&
      factor(inner->kid(1), &x1, &v1)) {
    if (!segment_matches(v0, 0) || !segment_matches(v1, v0.size())) return std::nullopt;
    std::set<std::string> distinct(v0.begin(), v0.end());
    distinct.insert(v1.begin(), v1.end());
    if (distinct.size() != v0.size() + v1.size()) return std::nullopt;
    if (!extents_match(x0, 0, v0.size()) || !extents_match(x1, v0.size(), v1.size()))
      return std::nullopt;
    SSAContract c;
    c.binary = true;
    c.gens = gens;
    c.left.assign(sums.begin(), sums.begin() + static_cast<long>(v0.size()));
    c.right.assign(sums.begin() + static_cast<long>(v0.size()),
                   sums.begin() + static_cast<long>(v0.size() + v1.size()));
    c.sums.assign(sums.begin() + static_cast<long>(v0.size() + v1.size()), sums.end());
    c.pred = std::move(pred);
    c.x0 = x0;
    c.x1 = x1;
    return c;
  }
  if (factor(inner, &x0, &v0)) {
    if (!segment_matches(v0, 0)) return std::nullopt;
    std::set<std::string> distinct(v0.begin(), v0.end());
    if (distinct.size() != v0.size()) return std::nullopt;
    if (!extents_match(x0, 0, v0.size())) return std::nullopt;
    SSAContract c;
    c.binary = false;
    c.gens = gens;
    c.left.assign(sums.begin(), sums.begin() + static_cast<long>(v0.size()));
    c.sums.assign(sums.begin() + static_cast<long>(v0.size()), sums.end());
    c.pred = std::move(pred);
    c.x0 = x0;
    return c;
  }
  return std::nullopt;
}

// Full in-order access of a binding at exactly `gens` (mask ignored): the
// operand shape that addition and scalar-map right-hand sides reference.
std::optional<std::string> SSABuilder::identity_operand(const std::vector<IndexBinder>& gens,
                                                        const ExprPtr& core) const {
  std::vector<IndexExpr> idxs;
  ExprPtr b = core;
  while (b->kind == ExprKind::Access) {
    idxs.push_back(b->idx);
    b = b->kid(0);
  }
  std::reverse(idxs.begin(), idxs.end());
  if (b->kind != ExprKind::Var) return std::nullopt;
  std::string name = resolve(b->name);
  auto it = binding_types_.find(name);
  if (it == binding_types_.end()) return std::nullopt;
  std::vector<SizeExpr> dims = it->second.dims();
  if (dims.size() != idxs.size() || idxs.size() != gens.size()) return std::nullopt;
  for (size_t k = 0; k < idxs.size(); ++k)
    if (!(idxs[k].is_variable() && idxs[k].single_variable() == gens[k].name &&
          dims[k] == gens[k].extent))
      return std::nullopt;
  return name;
}

std::string SSABuilder::convert(std::vector<IndexBinder> gens, PredPtr p, ExprPtr core) {
  // Collect the generator spine and fuse indicators into the mask.
  for (;;) {
    if (core->kind == ExprKind::Guard) {
      p = Pred::conj(p, core->pred);
      core = core->kid(0);
      continue;
    }
    if (core->kind == ExprKind::Gen) {
      gens.push_back({core->name, core->idx});
      core = core->kid(0);
      continue;
    }
    break;
  }

  // Eta-expand tensor-typed cores so the body is scalar.
  Type t = infer(core);
  if (t.is_tensor()) {
    std::set<std::string> used = used_index_names(gens, p, core);
    int counter = 0;
    for (const auto& dim : t.dims()) {
      std::string g = fresh_index(used, counter);
      used.insert(g);
      gens.push_back({g, dim});
      core = e_access(core, IndexExpr::variable(g));
    }
  }

  switch (core->kind) {
    case ExprKind::Const:
      return define(SSAConst{gens, p, core->value});
    case ExprKind::Var:
    case ExprKind::Access:
    case ExprKind::Proj: {
      // Access chain over a binding or an input projection chain.
      std::vector<IndexExpr> idxs;
      ExprPtr b = core;
      while (b->kind == ExprKind::Access) {
        idxs.push_back(b->idx);
        b = b->kid(0);
      }
      std::reverse(idxs.begin(), idxs.end());
      std::string x;
      if (b->kind == ExprKind::Var && !input_types_.count(resolve(b->name)) &&
          binding_types_.count(resolve(b->name))) {
        x = resolve(b->name);
      } else {
        std::vector<int> path;
        while (b->kind == ExprKind::Proj) {
          path.push_back(b->side);
          b = b->kid(0);
        }
        std::reverse(path.begin(), path.end());
        if (b->kind != ExprKind::Var || !input_types_.count(b->name))
          fail(Errc::NotNormalized, "projection or access of a non-variable");
        x = define(SSAInput{b->name, path});
      }
      std::vector<SizeExpr> dims = type_of_binding(x).dims();
      if (dims.size() != idxs.size())
        fail(Errc::Internal, "access arity mismatch in SSA conversion");
      // Identity gather collapses to the variable itself.
      if (p->is_true() && idxs.size() == gens.size()) {
        bool ident = true;
        for (size_t k = 0; k < idxs.size(); ++k)
          if (!(idxs[k].is_variable() && idxs[k].single_variable() == gens[k].name &&
                dims[k] == gens[k].extent))
            ident = false;
        if (ident) return x;
      }
      std::set<std::string> used = used_index_names(gens, p, core);
      int counter = 0;
      std::vector<IndexBinder> left;
      PredPtr pr = p;
      for (size_t k = 0; k < idxs.size(); ++k) {
        std::string v = fresh_index(used, counter);
        used.insert(v);
        left.push_back({v, dims[k]});
        pr = Pred::conj(pr, Pred::cmp(CmpOp::Eq, IndexExpr::variable(v), idxs[k]));
      }
      SSAContract c;
      c.binary = false;
      c.gens = std::move(gens);
      c.left = std::move(left);
      c.pred = pr;
      c.x0 = x;
      return define(std::move(c));
    }
    case ExprKind::Add: {
      auto [q0, l] = peel_guards(core->kid(0));
      auto [q1, r] = peel_guards(core->kid(1));
      PredPtr p0 = Pred::conj(p, q0);
      PredPtr p1 = Pred::conj(p, q1);
      auto id0 = identity_operand(gens, l);
      auto id1 = identity_operand(gens, r);
      std::string x0 = id0 ? *id0 : convert(gens, p0, l);
      std::string x1 = id1 ? *id1 : convert(gens, p1, r);
      return define(SSAAdd{gens, p0, x0, p1, x1});
    }
    case ExprKind::Mul: {
      std::string x0 = convert(gens, p, core->kid(0));
      std::string x1 = convert(gens, p, core->kid(1));
      std::set<std::string> used = used_index_names(gens, p, core);
      int counter = 0;
      std::vector<IndexBinder> g2, i0, i1;
      std::unordered_map<std::string, IndexExpr> gren;
      for (const auto& b : gens) {
        std::string gg = fresh_index(used, counter);
        used.insert(gg);
        g2.push_back({gg, b.extent});
        gren.emplace(b.name, IndexExpr::variable(gg));
      }
      for (const auto& b : gens) {
        std::string v0 = fresh_index(used, counter);
        used.insert(v0);
        i0.push_back({v0, b.extent});
        std::string v1 = fresh_index(used, counter);
        used.insert(v1);
        i1.push_back({v1, b.extent});
      }
      PredPtr pr = pred_substitute(p, gren);
      for (size_t k = 0; k < gens.size(); ++k) {
        pr = Pred::conj(pr, Pred::cmp(CmpOp::Eq, IndexExpr::variable(g2[k].name),
                                      IndexExpr::variable(i0[k].name)));
        pr = Pred::conj(pr, Pred::cmp(CmpOp::Eq, IndexExpr::variable(i0[k].name),
                                      IndexExpr::variable(i1[k].name)));
      }
      SSAContract c;
      c.binary = true;
      c.gens = std::move(g2);
      c.left = std::move(i0);
      c.right = std::move(i1);
      c.pred = pr;
      c.x0 = x0;
      c.x1 = x1;
      return define(std::move(c));
    }
    case ExprKind::Call: {
      std::vector<std::string> args;
      args.reserve(core->kids.size());
      for (const auto& k : core->kids) {
        auto id = identity_operand(gens, k);
        args.push_back(id ? *id : convert(gens, p, k));
      }
      return define(SSAMap{gens, p, core->name, args});
    }
    case ExprKind::Sum: {
      std::vector<IndexBinder> js;
      ExprPtr body = core;
      while (body->kind == ExprKind::Sum) {
        js.push_back({body->name, body->idx});
        body = body->kid(0);
      }
      auto [q, inner] = peel_guards(body);
      if (auto direct = match_contraction(gens, Pred::conj(p, q), js, inner))
        return define(std::move(*direct));
      std::vector<IndexBinder> all = gens;
      all.insert(all.end(), js.begin(), js.end());
      std::string x = convert(all, Pred::conj(p, q), inner);
      std::set<std::string> used = used_index_names(all, Pred::conj(p, q), inner);
      int counter = 0;
      std::vector<IndexBinder> g2;
      PredPtr pr = Pred::conj(p, q);
      for (const auto& b : gens) {
        std::string gg = fresh_index(used, counter);
        used.insert(gg);
        g2.push_back({gg, b.extent});
        pr = Pred::conj(pr, Pred::cmp(CmpOp::Eq, IndexExpr::variable(gg),
                                      IndexExpr::variable(b.name)));
      }
      SSAContract c;
      c.binary = false;
      c.gens = std::move(g2);
      c.left = std::move(all);
      c.pred = pr;
      c.x0 = x;
      return define(std::move(c));
    }
    default:
      fail(Errc::NotNormalized, "unexpected construct in SSA conversion");
  }
}

// ---------------------------------------------------------------------------
// Conversion driver

SSAProgram to_ssa(const SourceProgram& prog, const ExprPtr& normalized) {
  std::set<std::string> input_names;
  for (const auto& [x, t] : prog.inputs) input_names.insert(x);
  Validation v = validate_gen_outer(normalized, input_names);
  if (!v.ok) fail(Errc::NotNormalized, v.message);

  std::set<std::string> avoid;
  all_names(normalized, avoid);
  for (const auto& s : prog.size_vars) avoid.insert(s);
  for (const auto& [r, a] : prog.relations) avoid.insert(r);
  for (const auto& [x, t] : prog.inputs) avoid.insert(x);
  SSABuilder builder(prog.inputs, NameGen(std::move(avoid)));

  ExprPtr cur = normalized;
  while (cur->kind == ExprKind::Let) {
    std::string name = builder.convert({}, Pred::truth(), cur->kid(0));
    builder.alias(cur->name, name);
    cur = cur->kid(1);
  }
  std::function<OutputTree(const ExprPtr&)> out = [&](const ExprPtr& o) -> OutputTree {
    if (o->kind == ExprKind::Tuple) return OutputTree::pair(out(o->kid(0)), out(o->kid(1)));
    return OutputTree::var(builder.convert({}, Pred::truth(), o));
  };
  OutputTree output = out(cur);

  SSAProgram p;
  p.size_vars = prog.size_vars;
  p.relations = prog.relations;
  p.inputs = prog.inputs;
  p.bindings = builder.take_bindings();
  p.output = output;
  return p;
}

SSAProgram to_ssa_pipeline(const SourceProgram& prog, const TypeEnv& env) {
  std::set<std::string> avoid;
  all_names(prog.body, avoid);
  for (const auto& s : prog.size_vars) avoid.insert(s);
  for (const auto& [r, a] : prog.relations) avoid.insert(r);
  for (const auto& [x, t] : prog.inputs) avoid.insert(x);
  NameGen names(avoid);
  ExprPtr flat = normalize_flat(prog, env, names);
  return to_ssa(prog, flat);
}

// ---------------------------------------------------------------------------
// Dead binding sweep

void sweep_dead_bindings(SSAProgram& p) {
  std::set<std::string> live;
  std::function<void(const OutputTree&)> mark_out = [&](const OutputTree& t) {
    if (t.is_leaf())
      live.insert(t.leaf);
    else
      for (const auto& k : t.kids) mark_out(k);
  };
  mark_out(p.output);
  for (size_t i = p.bindings.size(); i-- > 0;) {
    if (!live.count(p.bindings[i].name)) continue;
    for (const auto& op : rhs_operands(p.bindings[i].rhs)) live.insert(op);
  }
  std::vector<SSABinding> kept;
  kept.reserve(p.bindings.size());
  for (auto& b : p.bindings)
    if (live.count(b.name)) kept.push_back(std::move(b));
  p.bindings = std::move(kept);
}

// ---------------------------------------------------------------------------
// Validator: strict parse of an expression against the SSA grammar.

namespace {

struct SSAParser {
  const SourceProgram& prog;
  std::set<std::string> input_names;
  std::map<std::string, size_t> birth;
  std::map<std::string, Type> types;
  std::set<std::string> keys;

  Validation violation(const std::string& msg, const ExprPtr& where) const {
    return {false, msg, where};
  }

  bool known(const std::string& x) const { return birth.count(x) != 0; }

  // Full access X[b0,...,bk] where the b's are exactly `binders` in order.
  bool is_full_access(const ExprPtr& e, const std::vector<IndexBinder>& binders,
                      std::string* var) const {
    std::vector<IndexExpr> idxs;
    ExprPtr b = e;
    while (b->kind == ExprKind::Access) {
      idxs.push_back(b->idx);
      b = b->kid(0);
    }
    std::reverse(idxs.begin(), idxs.end());
    if (b->kind != ExprKind::Var || !known(b->name)) return false;
    if (idxs.size() != binders.size()) return false;
    for (size_t k = 0; k < idxs.size(); ++k)
      if (!(idxs[k].is_variable() && idxs[k].single_variable() == binders[k].name)) return false;
    *var = b->name;
    return true;
  }

  // Access chain whose indices are single distinct variables; returns them.
  bool access_vars(const ExprPtr& e, std::string* var, std::vector<std::string>* vars) const {
    std::vector<IndexExpr> idxs;
    ExprPtr b = e;
    while (b->kind == ExprKind::Access) {
      idxs.push_back(b->idx);
      b = b->kid(0);
    }
    std::reverse(idxs.begin(), idxs.end());
    if (b->kind != ExprKind::Var || !known(b->name)) return false;
    vars->clear();
    for (const auto& a : idxs) {
      if (!a.is_variable()) return false;
      vars->push_back(a.single_variable());
    }
    *var = b->name;
    return true;
  }

  Validation parse_rhs(const ExprPtr& e, SSARhs* out) {
    // Input projection chain.
    {
      ExprPtr b = e;
      std::vector<int> path;
      while (b->kind == ExprKind::Proj) {
        path.push_back(b->side);
        b = b->kid(0);
      }
      if (b->kind == ExprKind::Var && input_names.count(b->name)) {
        std::reverse(path.begin(), path.end());
        *out = SSAInput{b->name, path};
        return {};
      }
    }
    std::vector<IndexBinder> gens;
    ExprPtr cur = e;
    while (cur->kind == ExprKind::Gen) {
      gens.push_back({cur->name, cur->idx});
      cur = cur->kid(0);
    }
    if (cur->kind == ExprKind::Sum) {
      std::vector<IndexBinder> sums;
      while (cur->kind == ExprKind::Sum) {
        sums.push_back({cur->name, cur->idx});
        cur = cur->kid(0);
      }
      auto [p, core] = peel_guards(cur);
      SSAContract c;
      c.gens = gens;
      c.pred = p;
      std::string x0, x1;
      std::vector<std::string> v0, v1;
      if (core->kind == ExprKind::Mul && access_vars(core->kid(0), &x0, &v0) &&
          access_vars(core->kid(1), &x1, &v1)) {
        c.binary = true;
        c.x0 = x0;
        c.x1 = x1;
        if (v0.size() + v1.size() > sums.size())
          return violation("contraction accesses more variables than it sums", core);
        for (size_t k = 0; k < v0.size(); ++k)
          if (v0[k] != sums[k].name)
            return violation("left factor indices must lead the summation list", core);
        for (size_t k = 0; k < v1.size(); ++k)
          if (v1[k] != sums[v0.size() + k].name)
            return violation("right factor indices must follow the left factor's", core);
        c.left.assign(sums.begin(), sums.begin() + v0.size());
        c.right.assign(sums.begin() + v0.size(), sums.begin() + v0.size() + v1.size());
        c.sums.assign(sums.begin() + v0.size() + v1.size(), sums.end());
      } else if (access_vars(core, &x0, &v0)) {
        c.binary = false;
        c.x0 = x0;
        if (v0.size() > sums.size())
          return violation("contraction accesses more variables than it sums", core);
        for (size_t k = 0; k < v0.size(); ++k)
          if (v0[k] != sums[k].name)
            return violation("factor indices must lead the summation list", core);
        c.left.assign(sums.begin(), sums.begin() + v0.size());
        c.sums.assign(sums.begin() + v0.size(), sums.end());
      } else {
        return violation("summation body is not a contraction of named tensors", core);
      }
      *out = std::move(c);
      return {};
    }
    auto [p, core] = peel_guards(cur);
    if (core->kind == ExprKind::Const) {
      *out = SSAConst{gens, p, core->value};
      return {};
    }
    if (core->kind == ExprKind::Var && known(core->name) && !(gens.empty() && p->is_true())) {
      // Unary contraction with empty index lists: gen.. [p]*X (mask/broadcast).
      SSAContract c;
      c.binary = false;
      c.gens = gens;
      c.pred = p;
      c.x0 = core->name;
      *out = std::move(c);
      return {};
    }
    if (core->kind == ExprKind::Mul && gens.empty() && core->kid(0)->kind == ExprKind::Var &&
        core->kid(1)->kind == ExprKind::Var && known(core->kid(0)->name) &&
        known(core->kid(1)->name)) {
      // Degenerate binary contraction X0*X1 (scalar product).
      SSAContract c;
      c.binary = true;
      c.pred = p;
      c.x0 = core->kid(0)->name;
      c.x1 = core->kid(1)->name;
      *out = std::move(c);
      return {};
    }
    if (core->kind == ExprKind::Add) {
      if (!p->is_true())
        return violation("predicated addition must carry its masks on the operands", cur);
      auto [p0, l] = peel_guards(core->kid(0));
      auto [p1, r] = peel_guards(core->kid(1));
      std::string x0, x1;
      if (!is_full_access(l, gens, &x0) || !is_full_access(r, gens, &x1))
        return violation("addition operands must be full accesses of named tensors", core);
      *out = SSAAdd{gens, p0, x0, p1, x1};
      return {};
    }
    if (core->kind == ExprKind::Call) {
      std::vector<std::string> args;
      for (const auto& k : core->kids) {
        std::string x;
        if (!is_full_access(k, gens, &x))
          return violation("scalar-map arguments must be full accesses of named tensors", k);
        args.push_back(x);
      }
      *out = SSAMap{gens, p, core->name, args};
      return {};
    }
    return violation("right-hand side matches no SSA form", cur);
  }

  Validation run(const ExprPtr& e, SSAProgram* out) {
    ExprPtr cur = e;
    while (cur->kind == ExprKind::Let) {
      SSARhs rhs;
      Validation v = parse_rhs(cur->kid(0), &rhs);
      if (!v.ok) return v;
      // References only to earlier bindings.
      for (const auto& op : rhs_operands(rhs))
        if (!known(op)) return violation("reference to '" + op + "' before its binding", cur);
      if (known(cur->name) || input_names.count(cur->name))
        return violation("rebinding of '" + cur->name + "'", cur);
      // Canonical form: re-canonicalizing must be the identity.
      SSARhs canon = rhs;
      if (auto* a = std::get_if<SSAAdd>(&canon)) {
        if (birth.at(a->x1) < birth.at(a->x0))
          return violation("addition terms out of order", cur->kid(0));
      }
      if (auto* k = std::get_if<SSAContract>(&canon)) {
        if (k->binary && birth.at(k->x1) < birth.at(k->x0))
          return violation("contraction factors out of order", cur->kid(0));
      }
      canon_indices(canon);
      if (rhs_key(canon) != rhs_key(rhs))
        return violation("index variables are not canonically named", cur->kid(0));
      if (!keys.insert(rhs_key(rhs)).second)
        return violation("structurally equal right-hand sides (CSE violated)", cur->kid(0));
      std::map<std::string, Type> in_t;
      for (const auto& [x, t] : prog.inputs) in_t.emplace(x, t);
      birth.emplace(cur->name, birth.size());
      types.emplace(cur->name, rhs_type(rhs, in_t));
      out->bindings.push_back(SSABinding{cur->name, std::move(rhs), types.at(cur->name)});
      cur = cur->kid(1);
    }
    std::function<Validation(const ExprPtr&, OutputTree*)> out_tree =
        [&](const ExprPtr& o, OutputTree* tree) -> Validation {
      if (o->kind == ExprKind::Tuple) {
        OutputTree a, b;
        Validation v = out_tree(o->kid(0), &a);
        if (!v.ok) return v;
        v = out_tree(o->kid(1), &b);
        if (!v.ok) return v;
        *tree = OutputTree::pair(std::move(a), std::move(b));
        return {};
      }
      if (o->kind != ExprKind::Var || !known(o->name))
        return violation("output must be a variable or tuple of variables", o);
      *tree = OutputTree::var(o->name);
      return {};
    };
    return out_tree(cur, &out->output);
  }
};

}  // namespace

Validation validate_ssa(const ExprPtr& e, const SourceProgram& prog) {
  SSAParser parser{prog, {}, {}, {}, {}};
  for (const auto& [x, t] : prog.inputs) parser.input_names.insert(x);
  SSAProgram scratch;
  scratch.inputs = prog.inputs;
  return parser.run(e, &scratch);
}

}  // namespace atl
