#include "atl/normalize.hpp"

#include <functional>

namespace atl {

namespace {

// ---------------------------------------------------------------------------
// Let-lifting

struct Lifted {
  std::vector<std::pair<std::string, ExprPtr>> binds;
  ExprPtr core;
};

Lifted lift(const ExprPtr& e) {
  switch (e->kind) {
    case ExprKind::Var:
    case ExprKind::Const:
      return {{}, e};
    case ExprKind::Let: {
      Lifted rhs = lift(e->kid(0));
      Lifted body = lift(e->kid(1));
      Lifted r;
      r.binds = std::move(rhs.binds);
      r.binds.emplace_back(e->name, rhs.core);
      for (auto& b : body.binds) r.binds.push_back(std::move(b));
      r.core = body.core;
      return r;
    }
    case ExprKind::Gen:
    case ExprKind::Sum: {
      Lifted body = lift(e->kid(0));
      Lifted r;
      Subst arrayed;  // x -> x[i] for each binding hoisted through the loop
      for (auto& [x, rhs] : body.binds) {
        ExprPtr hoisted = e_gen(e->name, e->idx, substitute(rhs, arrayed));
        r.binds.emplace_back(x, hoisted);
        arrayed.exprs[x] = e_access(e_var(x), IndexExpr::variable(e->name));
      }
      ExprPtr core = substitute(body.core, arrayed);
      r.core = e->kind == ExprKind::Gen ? e_gen(e->name, e->idx, core)
                                        : e_sum(e->name, e->idx, core);
      return r;
    }
    case ExprKind::Guard: {
      Lifted body = lift(e->kid(0));
      Lifted r;
      for (auto& [x, rhs] : body.binds) r.binds.emplace_back(x, e_guard(e->pred, rhs));
      r.core = e_guard(e->pred, body.core);
      return r;
    }
    default: {
      // Scalar/structural nodes: lift children, concatenate bindings.
      Lifted r;
      std::vector<ExprPtr> cores;
      cores.reserve(e->kids.size());
      for (const auto& k : e->kids) {
        Lifted c = lift(k);
        for (auto& b : c.binds) r.binds.push_back(std::move(b));
        cores.push_back(c.core);
      }
      switch (e->kind) {
        case ExprKind::Add: r.core = e_add(cores[0], cores[1]); break;
        case ExprKind::Mul: r.core = e_mul(cores[0], cores[1]); break;
        case ExprKind::Call: r.core = e_call(e->name, std::move(cores)); break;
        case ExprKind::Tuple: r.core = e_tuple(cores[0], cores[1]); break;
        case ExprKind::Proj: r.core = e_proj(e->side, cores[0]); break;
        case ExprKind::Access: r.core = e_access(cores[0], e->idx); break;
        case ExprKind::GuardedAccess:
          fail(Errc::Internal, "guarded access must be desugared before normalization");
        default: fail(Errc::Internal, "bad expr kind");
      }
      return r;
    }
  }
}

// ---------------------------------------------------------------------------
// Pair-elimination

// Push projections in, pull tuples out, to a fixpoint. Operates on transient
// terms whose typing is only valid up to the struct-of-arrays isomorphism.
ExprPtr pe_norm(const ExprPtr& e) {
  std::vector<ExprPtr> kids;
  kids.reserve(e->kids.size());
  for (const auto& k : e->kids) kids.push_back(pe_norm(k));
  switch (e->kind) {
    case ExprKind::Proj: {
      const ExprPtr& k = kids[0];
      switch (k->kind) {
        case ExprKind::Tuple:
          return e->side == 0 ? k->kid(0) : k->kid(1);
        case ExprKind::Gen:
          return pe_norm(e_gen(k->name, k->idx, e_proj(e->side, k->kid(0))));
        case ExprKind::Access:
          return pe_norm(e_access(e_proj(e->side, k->kid(0)), k->idx));
        case ExprKind::Guard:
          return pe_norm(e_guard(k->pred, e_proj(e->side, k->kid(0))));
        default:
          return e_proj(e->side, k);
      }
    }
    case ExprKind::Gen: {
      const ExprPtr& b = kids[0];
      if (b->kind == ExprKind::Tuple)
        return e_tuple(pe_norm(e_gen(e->name, e->idx, b->kid(0))),
                       pe_norm(e_gen(e->name, e->idx, b->kid(1))));
      return e_gen(e->name, e->idx, b);
    }
    case ExprKind::Access: {
      const ExprPtr& b = kids[0];
      if (b->kind == ExprKind::Tuple)
        return e_tuple(pe_norm(e_access(b->kid(0), e->idx)),
                       pe_norm(e_access(b->kid(1), e->idx)));
      return e_access(b, e->idx);
    }
    case ExprKind::Guard: {
      const ExprPtr& b = kids[0];
      if (b->kind == ExprKind::Tuple)
        return e_tuple(pe_norm(e_guard(e->pred, b->kid(0))),
                       pe_norm(e_guard(e->pred, b->kid(1))));
      return e_guard(e->pred, b);
    }
    case ExprKind::Var:
    case ExprKind::Const:
      return e;
    case ExprKind::Add: return e_add(kids[0], kids[1]);
    case ExprKind::Mul: return e_mul(kids[0], kids[1]);
    case ExprKind::Call: return e_call(e->name, std::move(kids));
    case ExprKind::Tuple: return e_tuple(kids[0], kids[1]);
    case ExprKind::Sum: return e_sum(e->name, e->idx, kids[0]);
    case ExprKind::Let: return e_let(e->name, std::nullopt, kids[0], kids[1]);
    case ExprKind::GuardedAccess:
      fail(Errc::Internal, "guarded access must be desugared before normalization");
  }
  fail(Errc::Internal, "bad expr kind");
}

// Split the first pair under the tensor spine of t: [d0..dk](A x B).
struct IsoSplit {
  Type left, right;
};
IsoSplit iso_split(const Type& t) {
  if (t.is_pair()) return {t.left(), t.right()};
  if (t.is_tensor()) {
    IsoSplit inner = iso_split(t.elem());
    return {Type::tensor(t.extent(), inner.left), Type::tensor(t.extent(), inner.right)};
  }
  fail(Errc::Internal, "iso_split on pair-free type");
}

struct PairElim {
  NameGen& names;
  std::vector<std::pair<std::string, ExprPtr>> out;

  // Emits destructured bindings for (x : t) = rhs and returns the replacement
  // tuple tree for occurrences of x.
  ExprPtr split(const std::string& x, const Type& t, const ExprPtr& rhs) {
    if (!t.contains_pair()) {
      out.emplace_back(x, rhs);
      return e_var(x);
    }
    IsoSplit halves = iso_split(t);
    ExprPtr l = split(names.fresh(x + "0"), halves.left, pe_norm(e_proj(0, rhs)));
    ExprPtr r = split(names.fresh(x + "1"), halves.right, pe_norm(e_proj(1, rhs)));
    return e_tuple(l, r);
  }
};

// ---------------------------------------------------------------------------
// Gen-pushout

ExprPtr gp_norm(const ExprPtr& e);

ExprPtr gp_rules(ExprPtr e) {
  for (;;) {
    if (e->kind == ExprKind::Access) {
      const ExprPtr& b = e->kid(0);
      if (b->kind == ExprKind::Gen) {
        e = substitute_idx(b->kid(0), b->name, e->idx);
        // The substituted body was normal, but the parent context changed;
        // fall through to re-examine the new top.
        continue;
      }
      if (b->kind == ExprKind::Guard) {
        e = e_guard(b->pred, gp_rules(e_access(b->kid(0), e->idx)));
        continue;
      }
      return e;
    }
    if (e->kind == ExprKind::Guard) {
      const ExprPtr& b = e->kid(0);
      if (b->kind == ExprKind::Gen) {
        e = e_gen(b->name, b->idx, gp_rules(e_guard(e->pred, b->kid(0))));
        continue;
      }
      if (b->kind == ExprKind::Guard) {
        e = e_guard(Pred::conj(e->pred, b->pred), b->kid(0));
        continue;
      }
      return e;
    }
    return e;
  }
}

ExprPtr gp_norm(const ExprPtr& e) {
  std::vector<ExprPtr> kids;
  kids.reserve(e->kids.size());
  for (const auto& k : e->kids) kids.push_back(gp_norm(k));
  ExprPtr rebuilt;
  switch (e->kind) {
    case ExprKind::Var:
    case ExprKind::Const:
      return e;
    case ExprKind::Add: return e_add(kids[0], kids[1]);
    case ExprKind::Mul: return e_mul(kids[0], kids[1]);
    case ExprKind::Call: return e_call(e->name, std::move(kids));
    case ExprKind::Tuple: return e_tuple(kids[0], kids[1]);
    case ExprKind::Proj: return e_proj(e->side, kids[0]);
    case ExprKind::Gen: return e_gen(e->name, e->idx, kids[0]);
    case ExprKind::Sum: return e_sum(e->name, e->idx, kids[0]);
    case ExprKind::Let: return e_let(e->name, e->ann, kids[0], kids[1]);
    case ExprKind::Access:
      rebuilt = e_access(kids[0], e->idx);
      break;
    case ExprKind::Guard:
      rebuilt = e_guard(e->pred, kids[0]);
      break;
    case ExprKind::GuardedAccess:
      fail(Errc::Internal, "guarded access must be desugared before normalization");
  }
  return gp_rules(rebuilt);
}

// ---------------------------------------------------------------------------
// Validators

bool contains_let(const ExprPtr& e) {
  if (e->kind == ExprKind::Let) return true;
  for (const auto& k : e->kids)
    if (contains_let(k)) return true;
  return false;
}

bool is_input_chain(const ExprPtr& e, const std::set<std::string>& inputs) {
  const Expr* cur = e.get();
  while (cur->kind == ExprKind::Proj) cur = cur->kids[0].get();
  return cur->kind == ExprKind::Var && inputs.count(cur->name) != 0;
}

Validation pair_free_rhs(const ExprPtr& e, const std::set<std::string>& inputs) {
  if (e->kind == ExprKind::Tuple)
    return {false, "pair construction outside the output position", e};
  if (e->kind == ExprKind::Proj && !is_input_chain(e, inputs))
    return {false, "projection of a non-input expression", e};
  if (e->kind == ExprKind::Let) return {false, "let inside a right-hand side", e};
  if (e->kind == ExprKind::Proj) return {};  // chain checked as a whole
  for (const auto& k : e->kids) {
    Validation v = pair_free_rhs(k, inputs);
    if (!v.ok) return v;
  }
  return {};
}

// GenOuter scalar-class check: no gen, no tuple/proj-outside-inputs, accesses
// only form chains over variables or input projection chains.
Validation gen_outer_scalar(const ExprPtr& e, const std::set<std::string>& inputs) {
  switch (e->kind) {
    case ExprKind::Gen:
      return {false, "gen below the right-hand-side spine", e};
    case ExprKind::Tuple:
      return {false, "pair construction inside a scalar expression", e};
    case ExprKind::Let:
      return {false, "let inside a right-hand side", e};
    case ExprKind::Proj:
      if (!is_input_chain(e, inputs)) return {false, "projection of a non-input expression", e};
      return {};
    case ExprKind::Access: {
      ExprPtr base = e;
      while (base->kind == ExprKind::Access) base = base->kid(0);
      if (base->kind == ExprKind::Var) return {};
      if (base->kind == ExprKind::Proj && is_input_chain(base, inputs)) return {};
      return {false, "access applies to a non-variable expression", base};
    }
    default: {
      for (const auto& k : e->kids) {
        Validation v = gen_outer_scalar(k, inputs);
        if (!v.ok) return v;
      }
      return {};
    }
  }
}

Validation gen_outer_rhs(const ExprPtr& e, const std::set<std::string>& inputs) {
  ExprPtr cur = e;
  while (cur->kind == ExprKind::Gen) cur = cur->kid(0);
  return gen_outer_scalar(cur, inputs);
}

Validation gen_outer_output(const ExprPtr& e, const std::set<std::string>& inputs) {
  if (e->kind == ExprKind::Tuple) {
    Validation v = gen_outer_output(e->kid(0), inputs);
    if (!v.ok) return v;
    return gen_outer_output(e->kid(1), inputs);
  }
  return gen_outer_rhs(e, inputs);
}

}  // namespace

ExprPtr let_lift(const ExprPtr& e) {
  Lifted l = lift(e);
  ExprPtr out = l.core;
  for (size_t i = l.binds.size(); i-- > 0;)
    out = e_let(l.binds[i].first, std::nullopt, l.binds[i].second, out);
  return out;
}

ExprPtr pair_elim(const ExprPtr& e, const TypeEnv& env, NameGen& names) {
  Validation ll = validate_let_lifted(e);
  if (!ll.ok) fail(Errc::NotLetLifted, ll.message);
  for (const auto& [x, t] : env.vars)
    if (!t.is_soa())
      fail(Errc::InputNotSoA, "input '" + x + "' : " + t.str() + " is not struct-of-arrays");

  TypeMap types = typecheck(e, env);
  if (!types.at(e).is_soa())
    fail(Errc::InputNotSoA, "output type " + types.at(e).str() + " is not struct-of-arrays");

  // Walk the let spine, destructuring each pair-typed binding.
  PairElim pe{names};
  Subst repl;
  ExprPtr cur = e;
  while (cur->kind == ExprKind::Let) {
    ExprPtr rhs = pe_norm(substitute(cur->kid(0), repl));
    ExprPtr tree = pe.split(cur->name, types.at(cur->kid(0)), rhs);
    if (!(tree->kind == ExprKind::Var && tree->name == cur->name)) repl.exprs[cur->name] = tree;
    cur = cur->kid(1);
  }
  ExprPtr body = pe_norm(substitute(cur, repl));
  ExprPtr out = body;
  for (size_t i = pe.out.size(); i-- > 0;)
    out = e_let(pe.out[i].first, std::nullopt, pe.out[i].second, out);
  return out;
}

ExprPtr gen_pushout(const ExprPtr& e) { return gp_norm(e); }

Validation validate_let_lifted(const ExprPtr& e) {
  ExprPtr cur = e;
  while (cur->kind == ExprKind::Let) {
    if (contains_let(cur->kid(0))) return {false, "let nested in a right-hand side", cur->kid(0)};
    cur = cur->kid(1);
  }
  if (contains_let(cur)) return {false, "let below the binding spine", cur};
  return {};
}

Validation validate_pair_free(const ExprPtr& e, const std::set<std::string>& inputs) {
  Validation ll = validate_let_lifted(e);
  if (!ll.ok) return ll;
  ExprPtr cur = e;
  while (cur->kind == ExprKind::Let) {
    Validation v = pair_free_rhs(cur->kid(0), inputs);
    if (!v.ok) return v;
    cur = cur->kid(1);
  }
  // Output position: a tuple tree over pair-free expressions.
  std::function<Validation(const ExprPtr&)> out_check = [&](const ExprPtr& o) -> Validation {
    if (o->kind == ExprKind::Tuple) {
      Validation v = out_check(o->kid(0));
      if (!v.ok) return v;
      return out_check(o->kid(1));
    }
    return pair_free_rhs(o, inputs);
  };
  return out_check(cur);
}

Validation validate_gen_outer(const ExprPtr& e, const std::set<std::string>& inputs) {
  Validation pf = validate_pair_free(e, inputs);
  if (!pf.ok) return pf;
  ExprPtr cur = e;
  while (cur->kind == ExprKind::Let) {
    Validation v = gen_outer_rhs(cur->kid(0), inputs);
    if (!v.ok) return v;
    cur = cur->kid(1);
  }
  return gen_outer_output(cur, inputs);
}

ExprPtr normalize_flat(const SourceProgram& prog, const TypeEnv& env, NameGen& names) {
  ExprPtr e = alpha_uniquify(prog.body, names);
  e = let_lift(e);
  e = pair_elim(e, env, names);
  e = gen_pushout(e);
  return e;
}

}  // namespace atl
