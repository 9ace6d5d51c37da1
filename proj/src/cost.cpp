#include "atl/cost.hpp"

namespace atl {

namespace {

// Mirrors the instrumented evaluator's traversal exactly: guard prefixes are
// peeled as one conjunction, directly nested summations are costed jointly.
WorkCost cost_rec(const ExprPtr& e, IdxEnv& env) {
  switch (e->kind) {
    case ExprKind::Var:
    case ExprKind::Const:
      return {};
    case ExprKind::Add: {
      auto [p0, a] = peel_guards(e->kid(0));
      auto [p1, b] = peel_guards(e->kid(1));
      bool t0 = eval_pred(p0, env);
      bool t1 = eval_pred(p1, env);
      WorkCost c;
      if (t0) c += cost_rec(a, env);
      if (t1) c += cost_rec(b, env);
      if (t0 && t1) c.adds += 1;
      return c;
    }
    case ExprKind::Mul: {
      WorkCost c = cost_rec(e->kid(0), env) + cost_rec(e->kid(1), env);
      c.muls += 1;
      return c;
    }
    case ExprKind::Call: {
      WorkCost c;
      for (const auto& k : e->kids) c += cost_rec(k, env);
      c.calls += 1;
      return c;
    }
    case ExprKind::Tuple:
      return cost_rec(e->kid(0), env) + cost_rec(e->kid(1), env);
    case ExprKind::Proj:
    case ExprKind::Access:
      return cost_rec(e->kid(0), env);
    case ExprKind::Gen: {
      WorkCost c;
      for_each_assignment({{e->name, e->idx}}, env, [&] { c += cost_rec(e->kid(0), env); });
      return c;
    }
    case ExprKind::Sum: {
      SumSpine spine = collect_sum_spine(e);
      WorkCost c;
      long long taken = 0;
      for_each_assignment(spine.binders, env, [&] {
        if (!eval_pred(spine.pred, env)) return;
        taken += 1;
        c += cost_rec(spine.core, env);
      });
      if (taken > 0) c.adds += taken - 1;
      return c;
    }
    case ExprKind::Guard:
      return eval_pred(e->pred, env) ? cost_rec(e->kid(0), env) : WorkCost{};
    case ExprKind::Let:
      return cost_rec(e->kid(0), env) + cost_rec(e->kid(1), env);
    case ExprKind::GuardedAccess:
      fail(Errc::Internal, "guarded access must be desugared before costing");
  }
  fail(Errc::Internal, "bad expr kind");
}

}  // namespace

WorkCost cost(const ExprPtr& e, IdxEnv& env) { return cost_rec(e, env); }

long long pred_count(const PredPtr& p, const std::vector<std::pair<std::string, IndexExpr>>& ranges,
                     IdxEnv& env) {
  long long n = 0;
  for_each_assignment(ranges, env, [&] {
    if (eval_pred(p, env)) n += 1;
  });
  return n;
}

long long io_size(const std::vector<Type>& input_types, const Type& output_type,
                  const IdxEnv& env) {
  long long s = 0;
  auto lookup = [&](const std::string& v) { return env.lookup(v); };
  for (const auto& t : input_types) s += type_size(t, lookup);
  s += type_size(output_type, lookup);
  return s;
}

}  // namespace atl
