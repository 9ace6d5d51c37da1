#include "atl/ad.hpp"

#include <algorithm>
#include <cmath>

namespace atl {

// ---------------------------------------------------------------------------
// Primitive registry

const PrimitiveRegistry& PrimitiveRegistry::standard() {
  static const PrimitiveRegistry reg = [] {
    PrimitiveRegistry r;
    auto a0 = e_var(placeholder(0));
    r.add("exp", {1, [](const std::vector<double>& a) { return std::exp(a[0]); },
                  {e_call("exp", {a0})}});
    r.add("sin", {1, [](const std::vector<double>& a) { return std::sin(a[0]); },
                  {e_call("cos", {a0})}});
    r.add("cos", {1, [](const std::vector<double>& a) { return std::cos(a[0]); },
                  {e_mul(e_const(Rational(-1)), e_call("sin", {a0}))}});
    r.add("inv", {1, [](const std::vector<double>& a) { return 1.0 / a[0]; },
                  {e_mul(e_const(Rational(-1)), e_mul(e_call("inv", {a0}), e_call("inv", {a0})))}});
    r.add("sqrt", {1, [](const std::vector<double>& a) { return std::sqrt(a[0]); },
                   {e_mul(e_const(Rational(1, 2)), e_call("inv", {e_call("sqrt", {a0})}))}});
    auto a1 = e_var(placeholder(1));
    ExprPtr rr = e_add(e_mul(a0, a0), e_mul(a1, a1));
    r.add("atan2", {2, [](const std::vector<double>& a) { return std::atan2(a[0], a[1]); },
                    {e_mul(a1, e_call("inv", {rr})),
                     e_mul(e_mul(e_const(Rational(-1)), a0), e_call("inv", {rr}))}});
    return r;
  }();
  return reg;
}

// ---------------------------------------------------------------------------
// Total (forward) derivative as structural rewrite rules

namespace {

// Syntactic zero: the shapes e_zero builds.
bool is_zero_expr(const ExprPtr& e) {
  switch (e->kind) {
    case ExprKind::Const: return e->value.is_zero();
    case ExprKind::Tuple: return is_zero_expr(e->kid(0)) && is_zero_expr(e->kid(1));
    case ExprKind::Gen: return is_zero_expr(e->kid(0));
    default: return false;
  }
}

ExprPtr add_pruned(const ExprPtr& a, const ExprPtr& b) {
  if (is_zero_expr(a)) return b;
  if (is_zero_expr(b)) return a;
  return e_add(a, b);
}

ExprPtr mul_pruned(const ExprPtr& a, const ExprPtr& b) {
  if (is_zero_expr(a) || is_zero_expr(b)) return e_const(Rational(0));
  return e_mul(a, b);
}

struct Forward {
  const std::map<std::string, Type>& var_types;
  const PrimitiveRegistry& reg;
  NameGen& names;

  ExprPtr d(const ExprPtr& e, const DiffMap& sigma) {
    switch (e->kind) {
      case ExprKind::Var: {
        auto it = sigma.find(e->name);
        if (it != sigma.end()) return e_var(it->second);
        auto t = var_types.find(e->name);
        if (t == var_types.end())
          fail(Errc::UnboundVariable, "'" + e->name + "' when differentiating");
        return e_zero(t->second, names);
      }
      case ExprKind::Const:
        return e_const(Rational(0));
      case ExprKind::Add:
        return add_pruned(d(e->kid(0), sigma), d(e->kid(1), sigma));
      case ExprKind::Mul:
        return add_pruned(mul_pruned(d(e->kid(0), sigma), e->kid(1)),
                          mul_pruned(e->kid(0), d(e->kid(1), sigma)));
      case ExprKind::Call: {
        const Primitive& prim = reg.at(e->name);
        if (prim.arity != e->kids.size())
          fail(Errc::ArityMismatch, "'" + e->name + "' in derivative");
        ExprPtr acc;
        for (size_t i = 0; i < e->kids.size(); ++i) {
          Subst inst;
          for (size_t j = 0; j < e->kids.size(); ++j)
            inst.exprs.emplace(PrimitiveRegistry::placeholder(j), e->kid(j));
          ExprPtr term = mul_pruned(substitute(prim.partials[i], inst), d(e->kid(i), sigma));
          if (!acc)
            acc = term;
          else
            acc = add_pruned(acc, term);
        }
        return acc;
      }
      case ExprKind::Tuple:
        return e_tuple(d(e->kid(0), sigma), d(e->kid(1), sigma));
      case ExprKind::Proj: {
        ExprPtr de = d(e->kid(0), sigma);
        if (de->kind == ExprKind::Tuple && is_zero_expr(de)) return de->kid(e->side);
        return e_proj(e->side, de);
      }
      case ExprKind::Gen:
        return e_gen(e->name, e->idx, d(e->kid(0), sigma));
      case ExprKind::Sum: {
        ExprPtr de = d(e->kid(0), sigma);
        if (is_zero_expr(de)) return e_const(Rational(0));
        return e_sum(e->name, e->idx, de);
      }
      case ExprKind::Access: {
        ExprPtr de = d(e->kid(0), sigma);
        if (de->kind == ExprKind::Gen && is_zero_expr(de)) return de->kid(0);
        return e_access(de, e->idx);
      }
      case ExprKind::Guard: {
        ExprPtr de = d(e->kid(0), sigma);
        if (is_zero_expr(de)) return de;
        return e_guard(e->pred, de);
      }
      case ExprKind::Let: {
        std::string dx = names.fresh("d" + e->name);
        DiffMap inner = sigma;
        inner[e->name] = dx;
        return e_let(e->name, std::nullopt, e->kid(0),
                     e_let(dx, std::nullopt, d(e->kid(0), sigma), d(e->kid(1), inner)));
      }
      case ExprKind::GuardedAccess:
        fail(Errc::Internal, "guarded access must be desugared before differentiation");
    }
    fail(Errc::Internal, "bad expr kind");
  }
};

}  // namespace

ExprPtr forward_deriv(const ExprPtr& e, const DiffMap& sigma,
                      const std::map<std::string, Type>& var_types, const PrimitiveRegistry& reg,
                      NameGen& names) {
  Forward f{var_types, reg, names};
  return f.d(e, sigma);
}

// ---------------------------------------------------------------------------
// Adjoint derivative

namespace {

// Canonical per-type dimension binders q0, q1, ... (skipping size names used
// in the extents). Every inner product over the same type uses these names.
std::vector<IndexBinder> canonical_dims(const Type& t) {
  std::vector<SizeExpr> dims = t.dims();
  std::set<std::string> avoid;
  for (const auto& d : dims)
    for (const auto& [v, c] : d.coeffs()) avoid.insert(v);
  std::vector<IndexBinder> out;
  int next = 0;
  for (const auto& d : dims) {
    std::string name;
    do {
      name = "q" + std::to_string(next++);
    } while (avoid.count(name));
    out.push_back({name, d});
  }
  return out;
}

PredPtr rename_pred(const PredPtr& p, const std::vector<IndexBinder>& from,
                    const std::vector<IndexBinder>& to) {
  std::unordered_map<std::string, IndexExpr> ren;
  for (size_t i = 0; i < from.size(); ++i)
    if (from[i].name != to[i].name) ren.emplace(from[i].name, IndexExpr::variable(to[i].name));
  return pred_substitute(p, ren);
}

PredPtr exists_wrap(const std::vector<IndexBinder>& binders, PredPtr p) {
  for (size_t i = binders.size(); i-- > 0;)
    p = Pred::exists(binders[i].name, binders[i].extent, p);
  return p;
}

ExprPtr proj_chain(const std::string& var, const std::vector<int>& path) {
  ExprPtr e = e_var(var);
  for (int s : path) e = e_proj(s, e);
  return e;
}

ExprPtr access_at(const std::string& var, const std::vector<IndexBinder>& idx) {
  ExprPtr e = e_var(var);
  for (const auto& b : idx) e = e_access(e, IndexExpr::variable(b.name));
  return e;
}

struct AdjointDriver {
  const SSAProgram& prog;
  const PrimitiveRegistry& reg;
  const AdjointOptions& opts;

  SSABuilder builder;
  DiffMap sigma;
  std::string dy;
  Type dy_type;
  std::vector<std::pair<std::string, Type>> inputs2;
  std::vector<InnerProd> body;
  std::vector<size_t> pending;
  std::set<std::string> wrt_set;
  std::vector<std::pair<std::string, std::string>> wrt_order;

  AdjointDriver(const SSAProgram& p, const std::vector<std::string>& wrt,
                const PrimitiveRegistry& r, const AdjointOptions& o, NameGen names)
      : prog(p), reg(r), opts(o), builder({}, NameGen{}) {
    if (wrt.empty()) fail(Errc::InvalidValue, "no differentiation targets");
    for (const auto& w : wrt) {
      bool found = false;
      for (const auto& [x, t] : prog.inputs) found |= x == w;
      if (!found) fail(Errc::UnboundVariable, "differentiation target '" + w + "' is not an input");
      std::string dx = names.fresh("d" + w);
      sigma.emplace(w, dx);
      wrt_set.insert(w);
      wrt_order.emplace_back(w, dx);
    }
    for (const auto& b : prog.bindings) sigma.emplace(b.name, names.fresh("d" + b.name));
    dy = names.fresh("dy");
    dy_type = prog.output_type();
    inputs2 = prog.inputs;
    inputs2.emplace_back(dy, dy_type);
    builder = SSABuilder(inputs2, std::move(names));
    for (const auto& b : prog.bindings) builder.adopt(b);
    for (size_t i = 0; i < prog.bindings.size(); ++i) pending.push_back(i);
  }

  AdjointState state() const {
    AdjointState s;
    s.lets = builder.bindings();
    s.pending = pending;
    s.body = body;
    s.sigma = sigma;
    s.dy = dy;
    s.dy_type = dy_type;
    s.inputs = inputs2;
    return s;
  }

  void snapshot() {
    if (opts.observer) opts.observer(state());
  }

  // Splitting the seed inner product over the output tuple tree.
  void init_products(const OutputTree& t, std::vector<int>& path) {
    if (!t.is_leaf()) {
      for (int s = 0; s < 2; ++s) {
        path.push_back(s);
        init_products(t.kids[s], path);
        path.pop_back();
      }
      return;
    }
    const SSABinding& b = prog.binding(t.leaf);
    InnerProd p;
    p.left = proj_chain(dy, path);
    p.pred = Pred::truth();
    p.dims = canonical_dims(b.type);
    p.type = b.type;
    p.target = sigma.at(t.leaf);
    p.rhs = e_var(p.target);
    return body.push_back(std::move(p));
  }

  // The left side of an inner product must be a named tensor before it can be
  // bound; projection chains of the seed become input-projection bindings.
  std::string ensure_var(InnerProd& p) {
    if (p.left->kind == ExprKind::Var) {
      bool is_input = false;
      for (const auto& [n, t] : inputs2) is_input |= n == p.left->name;
      if (!is_input) return p.left->name;  // already a binding
    }
    ExprPtr b = p.left;
    std::vector<int> path;
    while (b->kind == ExprKind::Proj) {
      path.push_back(b->side);
      b = b->kid(0);
    }
    std::reverse(path.begin(), path.end());
    if (b->kind != ExprKind::Var) fail(Errc::NonLinearSeed, "inner-product left side is not named");
    std::string name = builder.define(SSAInput{b->name, path});
    p.left = e_var(name);
    return name;
  }

  void regroup(std::vector<size_t>& idxs, const std::string& target) {
    while (idxs.size() > 1) {
      InnerProd& a = body[idxs[0]];
      InnerProd& b = body[idxs[1]];
      std::string l0 = ensure_var(a);
      std::string l1 = ensure_var(b);
      std::string merged = builder.define(SSAAdd{a.dims, a.pred, l0, b.pred, l1});
      InnerProd m;
      m.left = e_var(merged);
      m.pred = Pred::disj(a.pred, b.pred);
      m.dims = a.dims;
      m.type = a.type;
      m.target = target;
      m.rhs = e_var(target);
      body[idxs[0]] = std::move(m);
      body.erase(body.begin() + static_cast<long>(idxs[1]));
      for (size_t j = 1; j + 1 < idxs.size(); ++j) idxs[j] = idxs[j + 1] - 1;
      idxs.pop_back();
      snapshot();
    }
  }

  void push_product(const std::string& left_var, PredPtr pred, const Type& type,
                    const std::string& operand) {
    InnerProd p;
    p.left = e_var(left_var);
    p.pred = std::move(pred);
    p.dims = canonical_dims(type);
    p.type = type;
    p.target = sigma.at(operand);
    p.rhs = e_var(p.target);
    body.push_back(std::move(p));
  }

  void dispatch(const SSABinding& bind, const std::string& acc, const PredPtr& pprime,
                const std::vector<IndexBinder>& pdims) {
    if (const auto* in = std::get_if<SSAInput>(&bind.rhs)) {
      if (!wrt_set.count(in->input)) return;  // D[X] with X not in sigma: m-zero
      InnerProd p;
      p.left = e_var(acc);
      p.pred = pprime;
      p.dims = pdims;
      p.type = bind.type;
      p.input = in->input;
      p.path = in->path;
      p.rhs = proj_chain(sigma.at(in->input), in->path);
      body.push_back(std::move(p));
      return;
    }
    if (std::holds_alternative<SSAConst>(bind.rhs)) return;  // constants: m-zero
    if (const auto* add = std::get_if<SSAAdd>(&bind.rhs)) {
      PredPtr p0 = rename_pred(add->p0, add->gens, pdims);
      PredPtr p1 = rename_pred(add->p1, add->gens, pdims);
      push_product(acc, Pred::conj(p0, pprime), bind.type, add->x0);
      push_product(acc, Pred::conj(p1, pprime), bind.type, add->x1);
      return;
    }
    if (const auto* m = std::get_if<SSAMap>(&bind.rhs)) {
      PredPtr p0 = Pred::conj(rename_pred(m->pred, m->gens, pdims), pprime);
      std::vector<IndexBinder> qg = pdims;
      for (size_t j = 0; j < m->args.size(); ++j) {
        Subst inst;
        for (size_t t = 0; t < m->args.size(); ++t)
          inst.exprs.emplace(PrimitiveRegistry::placeholder(t), access_at(m->args[t], qg));
        ExprPtr partial = substitute(reg.at(m->fn).partials[j], inst);
        ExprPtr core = e_mul(partial, access_at(acc, qg));
        std::string da = builder.convert(qg, p0, core);
        push_product(da, p0, bind.type, m->args[j]);
      }
      return;
    }
    const auto& k = std::get<SSAContract>(bind.rhs);
    PredPtr pfull = Pred::conj(k.pred, rename_pred(pprime, pdims, k.gens));
    if (k.binary) {
      // d(left factor): generate over i0, sum over g, i1, s.
      {
        SSAContract c;
        c.binary = true;
        c.gens = k.left;
        c.left = k.gens;
        c.right = k.right;
        c.sums = k.sums;
        c.pred = pfull;
        c.x0 = acc;
        c.x1 = k.x1;
        std::string da = builder.define(std::move(c));
        std::vector<IndexBinder> rest = k.gens;
        rest.insert(rest.end(), k.right.begin(), k.right.end());
        rest.insert(rest.end(), k.sums.begin(), k.sums.end());
        const Type& t0 = builder.type_of_binding(k.x0);
        PredPtr pr = rename_pred(exists_wrap(rest, pfull), k.left, canonical_dims(t0));
        push_product(da, pr, t0, k.x0);
      }
      {
        SSAContract c;
        c.binary = true;
        c.gens = k.right;
        c.left = k.left;
        c.right = k.gens;
        c.sums = k.sums;
        c.pred = pfull;
        c.x0 = k.x0;
        c.x1 = acc;
        std::string da = builder.define(std::move(c));
        std::vector<IndexBinder> rest = k.left;
        rest.insert(rest.end(), k.gens.begin(), k.gens.end());
        rest.insert(rest.end(), k.sums.begin(), k.sums.end());
        const Type& t1 = builder.type_of_binding(k.x1);
        PredPtr pr = rename_pred(exists_wrap(rest, pfull), k.right, canonical_dims(t1));
        push_product(da, pr, t1, k.x1);
      }
      return;
    }
    SSAContract c;
    c.binary = false;
    c.gens = k.left;
    c.left = k.gens;
    c.sums = k.sums;
    c.pred = pfull;
    c.x0 = acc;
    std::string da = builder.define(std::move(c));
    std::vector<IndexBinder> rest = k.gens;
    rest.insert(rest.end(), k.sums.begin(), k.sums.end());
    const Type& t0 = builder.type_of_binding(k.x0);
    PredPtr pr = rename_pred(exists_wrap(rest, pfull), k.left, canonical_dims(t0));
    push_product(da, pr, t0, k.x0);
  }

  AdjointResult run() {
    std::vector<int> path;
    init_products(prog.output, path);
    snapshot();

    for (size_t k = prog.bindings.size(); k-- > 0;) {
      const SSABinding& bind = prog.bindings[k];
      const std::string& dx = sigma.at(bind.name);
      std::vector<size_t> idxs;
      for (size_t i = 0; i < body.size(); ++i)
        if (body[i].target == dx) idxs.push_back(i);
      if (idxs.empty()) {
        pending.erase(std::remove(pending.begin(), pending.end(), k), pending.end());
        snapshot();  // dead differential dropped
        continue;
      }
      regroup(idxs, dx);  // the m-let stays pending while contributions merge
      InnerProd p = body[idxs[0]];
      body.erase(body.begin() + static_cast<long>(idxs[0]));
      pending.erase(std::remove(pending.begin(), pending.end(), k), pending.end());
      std::string acc = ensure_var(p);
      dispatch(bind, acc, p.pred, p.dims);
      snapshot();
    }

    // Output stage: one slot per input projection chain, masked copies for
    // predicated contributions, zeros elsewhere.
    std::map<std::string, std::map<std::vector<int>, std::string>> slots;
    for (auto& p : body) {
      if (p.input.empty()) fail(Errc::Internal, "unconsumed inner product");
      std::string v = ensure_var(p);
      if (!p.pred->is_true()) {
        SSAContract mc;
        mc.binary = false;
        std::set<std::string> used;
        for (const auto& b : p.dims) {
          used.insert(b.name);
          for (const auto& [s, c] : b.extent.coeffs()) used.insert(s);
        }
        int counter = 0;
        PredPtr pr = p.pred;
        for (const auto& b : p.dims) {
          std::string g = fresh_g(used, counter);
          mc.gens.push_back({g, b.extent});
          pr = Pred::conj(pr, Pred::cmp(CmpOp::Eq, IndexExpr::variable(b.name),
                                        IndexExpr::variable(g)));
        }
        mc.left = p.dims;
        mc.pred = pr;
        mc.x0 = v;
        v = builder.define(std::move(mc));
      }
      if (!slots[p.input].emplace(p.path, v).second)
        fail(Errc::Internal, "two contributions to one input slot");
    }
    body.clear();

    AdjointResult result;
    result.dy = dy;
    result.wrt = wrt_order;
    std::vector<OutputTree> trees;
    for (const auto& [x, dx] : wrt_order) {
      const Type* t = nullptr;
      for (const auto& [n, ty] : prog.inputs)
        if (n == x) t = &ty;
      std::vector<int> at;
      trees.push_back(build_output(*t, at, slots[x]));
    }
    OutputTree out = trees.back();
    for (size_t i = trees.size() - 1; i-- > 0;) out = OutputTree::pair(trees[i], out);

    result.program.size_vars = prog.size_vars;
    result.program.relations = prog.relations;
    result.program.inputs = inputs2;
    result.program.bindings = builder.take_bindings();
    result.program.output = out;
    if (opts.sweep) sweep_dead_bindings(result.program);
    return result;
  }

  static std::string fresh_g(std::set<std::string>& used, int& counter) {
    for (;;) {
      std::string cand = "g" + std::to_string(counter++);
      if (used.insert(cand).second) return cand;
    }
  }

  OutputTree build_output(const Type& t, std::vector<int>& path,
                          std::map<std::vector<int>, std::string>& slot) {
    if (t.is_pair()) {
      path.push_back(0);
      OutputTree a = build_output(t.left(), path, slot);
      path.back() = 1;
      OutputTree b = build_output(t.right(), path, slot);
      path.pop_back();
      return OutputTree::pair(std::move(a), std::move(b));
    }
    auto it = slot.find(path);
    if (it != slot.end()) return OutputTree::var(it->second);
    return OutputTree::var(builder.define(SSAConst{canonical_dims(t), Pred::truth(), Rational(0)}));
  }
};

}  // namespace

AdjointResult adjoint_deriv(const SSAProgram& prog, const std::vector<std::string>& wrt,
                            const PrimitiveRegistry& reg, const AdjointOptions& opts) {
  std::set<std::string> avoid;
  all_names(prog.to_expr(), avoid);
  for (const auto& s : prog.size_vars) avoid.insert(s);
  for (const auto& [r, a] : prog.relations) avoid.insert(r);
  for (const auto& [x, t] : prog.inputs) avoid.insert(x);
  AdjointDriver driver(prog, wrt, reg, opts, NameGen(std::move(avoid)));
  return driver.run();
}

// ---------------------------------------------------------------------------
// De-sugaring and extended cost of adjoint states

namespace {

ExprPtr product_expr(const InnerProd& p) {
  if (p.dims.empty()) return e_guard(p.pred, e_mul(p.left, p.rhs));
  ExprPtr l = p.left;
  ExprPtr r = p.rhs;
  for (const auto& b : p.dims) {
    l = e_access(l, IndexExpr::variable(b.name));
    r = e_access(r, IndexExpr::variable(b.name));
  }
  ExprPtr core = e_guard(p.pred, e_mul(l, r));
  for (size_t i = p.dims.size(); i-- > 0;) core = e_sum(p.dims[i].name, p.dims[i].extent, core);
  return core;
}

std::map<std::string, Type> state_var_types(const AdjointState& s) {
  std::map<std::string, Type> vt;
  for (const auto& [x, t] : s.inputs) vt.emplace(x, t);
  for (const auto& b : s.lets) vt.emplace(b.name, b.type);
  return vt;
}

}  // namespace

ExprPtr desugar_inner(const AdjointState& s, const PrimitiveRegistry& reg) {
  ExprPtr bodysum;
  for (const auto& p : s.body) {
    ExprPtr t = product_expr(p);
    bodysum = bodysum ? e_add(bodysum, t) : t;
  }
  if (!bodysum) bodysum = e_const(Rational(0));

  std::map<std::string, Type> vt = state_var_types(s);
  std::set<std::string> avoid;
  for (const auto& [n, t] : vt) avoid.insert(n);
  for (const auto& [x, d] : s.sigma) avoid.insert(d);
  NameGen names(std::move(avoid));

  ExprPtr out = bodysum;
  // Scope order: original lets, then pending m-lets (instantiated forward
  // derivatives), then emitted adjoint lets, then the body sum. Originals are
  // the bindings that have a differential in sigma.
  std::vector<const SSABinding*> originals, emitted;
  for (const auto& b : s.lets) {
    if (s.sigma.count(b.name))
      originals.push_back(&b);
    else
      emitted.push_back(&b);
  }
  for (size_t i = emitted.size(); i-- > 0;)
    out = e_let(emitted[i]->name, std::nullopt, rhs_to_expr(emitted[i]->rhs), out);
  for (size_t i = s.pending.size(); i-- > 0;) {
    const SSABinding& b = s.lets[s.pending[i]];
    ExprPtr d = forward_deriv(rhs_to_expr(b.rhs), s.sigma, vt, reg, names);
    out = e_let(s.sigma.at(b.name), std::nullopt, d, out);
  }
  for (size_t i = originals.size(); i-- > 0;)
    out = e_let(originals[i]->name, std::nullopt, rhs_to_expr(originals[i]->rhs), out);
  return out;
}

WorkCost cost_extended(const AdjointState& s, IdxEnv& env, const PrimitiveRegistry& reg) {
  WorkCost c;
  std::map<std::string, Type> vt = state_var_types(s);
  std::set<std::string> avoid;
  for (const auto& [n, t] : vt) avoid.insert(n);
  for (const auto& [x, d] : s.sigma) avoid.insert(d);
  NameGen names(std::move(avoid));

  for (const auto& b : s.lets) c += cost(rhs_to_expr(b.rhs), env);
  for (size_t i : s.pending) {
    const SSABinding& b = s.lets[i];
    c += cost(forward_deriv(rhs_to_expr(b.rhs), s.sigma, vt, reg, names), env);
  }
  auto lookup = [&](const std::string& v) { return env.lookup(v); };
  for (const auto& p : s.body) {
    c += cost(p.left, env) + cost(p.rhs, env);
    if (p.pred->is_true()) {
      c.adds += type_size(p.type, lookup);
    } else {
      std::vector<std::pair<std::string, IndexExpr>> ranges;
      for (const auto& b : p.dims) ranges.emplace_back(b.name, b.extent);
      c.adds += pred_count(p.pred, ranges, env);
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Program-level wrappers

ForwardProgram forward_of_program(const SourceProgram& prog, const std::vector<std::string>& wrt,
                                  const PrimitiveRegistry& reg) {
  TypeEnv env = prog.type_env(reg.arities());
  TypeMap types = typecheck(prog.body, env);
  ExprPtr body = desugar_guarded_access(prog.body, types);

  std::set<std::string> avoid;
  all_names(body, avoid);
  for (const auto& [x, t] : prog.inputs) avoid.insert(x);
  for (const auto& s : prog.size_vars) avoid.insert(s);
  NameGen names(std::move(avoid));

  ForwardProgram out;
  DiffMap sigma;
  for (const auto& w : wrt) {
    if (!prog.input_type(w))
      fail(Errc::UnboundVariable, "differentiation target '" + w + "' is not an input");
    std::string dx = names.fresh("d" + w);
    sigma.emplace(w, dx);
    out.wrt.emplace_back(w, dx);
  }
  std::map<std::string, Type> vt;
  for (const auto& [x, t] : prog.inputs) vt.emplace(x, t);
  ExprPtr dbody = forward_deriv(body, sigma, vt, reg, names);

  out.program = prog;
  out.program.body = dbody;
  for (const auto& [x, dx] : out.wrt) out.program.inputs.emplace_back(dx, *prog.input_type(x));
  return out;
}

AdjointProgram adjoint_of_program(const SourceProgram& prog, const std::vector<std::string>& wrt,
                                  const PrimitiveRegistry& reg, const AdjointOptions& opts) {
  TypeEnv env = prog.type_env(reg.arities());
  TypeMap types = typecheck(prog.body, env);
  SourceProgram desugared = prog.with_body(desugar_guarded_access(prog.body, types));
  SSAProgram ssa = to_ssa_pipeline(desugared, env);
  AdjointResult r = adjoint_deriv(ssa, wrt, reg, opts);
  AdjointProgram out;
  out.program = r.program.to_program();
  out.ssa = r.program;
  out.dy = r.dy;
  out.wrt = r.wrt;
  return out;
}

CostBound forward_cost_check(const SSAProgram& prog, const std::vector<std::string>& wrt,
                             const PrimitiveRegistry& reg, IdxEnv& env) {
  ExprPtr e = prog.to_expr();
  std::set<std::string> avoid;
  all_names(e, avoid);
  for (const auto& [x, t] : prog.inputs) avoid.insert(x);
  NameGen names(std::move(avoid));
  DiffMap sigma;
  for (const auto& w : wrt) sigma.emplace(w, names.fresh("d" + w));
  std::map<std::string, Type> vt;
  for (const auto& [x, t] : prog.inputs) vt.emplace(x, t);
  ExprPtr de = forward_deriv(e, sigma, vt, reg, names);
  CostBound r;
  r.base = cost(e, env).total();
  r.derived = cost(de, env).total();
  r.holds = r.derived <= 4 * r.base;
  return r;
}

CostBound adjoint_cost_check(const SSAProgram& prog, const std::vector<std::string>& wrt,
                             const PrimitiveRegistry& reg, IdxEnv& env) {
  AdjointResult adj = adjoint_deriv(prog, wrt, reg, {});
  std::vector<Type> in_types;
  for (const auto& [x, t] : prog.inputs) in_types.push_back(t);
  long long io = io_size(in_types, prog.output_type(), env);
  CostBound r;
  r.base = cost(prog.to_expr(), env).total() + io;
  r.derived = cost(adj.program.to_expr(), env).total() + io;
  r.holds = r.derived <= 4 * r.base;
  return r;
}

}  // namespace atl
