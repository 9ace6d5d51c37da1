#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "atl/expr.hpp"
#include "atl/typecheck.hpp"
#include "atl/value.hpp"

namespace atl {

using ScalarFn = std::function<double(const std::vector<double>&)>;
using FnTable = std::map<std::string, ScalarFn>;

// Scalar operations actually executed: the instrumentation the cost model is
// checked against.
struct OpCount {
  long long adds = 0, muls = 0, calls = 0;
  long long total() const { return adds + muls + calls; }
  friend bool operator==(const OpCount& a, const OpCount& b) {
    return a.adds == b.adds && a.muls == b.muls && a.calls == b.calls;
  }
  OpCount& operator+=(const OpCount& o) {
    adds += o.adds;
    muls += o.muls;
    calls += o.calls;
    return *this;
  }
};

long long eval_idx(const IndexExpr& a, const IdxEnv& env);
bool eval_pred(const PredPtr& p, IdxEnv& env);

// Maximal guard prefix of an expression, as one conjunction. An operand with
// no guard has predicate true; this is the operand predicate the cost model's
// starred rules speak about.
struct GuardPeel {
  PredPtr pred;
  ExprPtr core;
};
inline GuardPeel peel_guards(ExprPtr e) {
  PredPtr p = Pred::truth();
  while (e->kind == ExprKind::Guard) {
    p = Pred::conj(p, e->pred);
    e = e->kid(0);
  }
  return {p, e};
}

// Maximal spine of directly nested big summations followed by one guard
// prefix; costed jointly by rule (**). A guard between two sums stops the
// spine.
struct SumSpine {
  std::vector<std::pair<std::string, IndexExpr>> binders;
  PredPtr pred;
  ExprPtr core;
};
inline SumSpine collect_sum_spine(ExprPtr e) {
  SumSpine s;
  while (e->kind == ExprKind::Sum) {
    s.binders.emplace_back(e->name, e->idx);
    e = e->kid(0);
  }
  auto peeled = peel_guards(e);
  s.pred = peeled.pred;
  s.core = peeled.core;
  return s;
}

// Enumerates joint assignments of 0-based binders; f runs with the bindings
// installed in env.ints. Empty binder lists run f exactly once.
template <class F>
void for_each_assignment(const std::vector<std::pair<std::string, IndexExpr>>& binders,
                         IdxEnv& env, F&& f) {
  std::vector<long long> extents;
  extents.reserve(binders.size());
  for (const auto& [v, ext] : binders) {
    long long n = eval_idx(ext, env);
    extents.push_back(n < 0 ? 0 : n);
  }
  std::vector<std::optional<long long>> saved(binders.size());
  for (size_t i = 0; i < binders.size(); ++i) {
    auto it = env.ints.find(binders[i].first);
    if (it != env.ints.end()) saved[i] = it->second;
  }
  std::vector<long long> cur(binders.size(), 0);
  std::function<void(size_t)> go = [&](size_t d) {
    if (d == binders.size()) {
      f();
      return;
    }
    for (long long v = 0; v < extents[d]; ++v) {
      env.ints[binders[d].first] = v;
      go(d + 1);
    }
  };
  go(0);
  for (size_t i = 0; i < binders.size(); ++i) {
    if (saved[i])
      env.ints[binders[i].first] = *saved[i];
    else
      env.ints.erase(binders[i].first);
  }
}

template <class S>
S scalar_of(const Rational& r) {
  if constexpr (std::is_same_v<S, double>)
    return r.to_double();
  else
    return r;
}

// Reference evaluator for the operational semantics, with short-circuiting of
// false indicators and an operation counter. The counter is per-instance
// state; instances are independent.
template <class S>
class Evaluator {
 public:
  Evaluator(const TypeMap& types, const FnTable* fns) : types_(types), fns_(fns) {}

  OpCount count;

  Value<S> eval(const ExprPtr& e, Env<S>& env) {
    switch (e->kind) {
      case ExprKind::Var: {
        auto it = env.values.find(e->name);
        if (it == env.values.end()) fail(Errc::UnboundVariable, "'" + e->name + "' at evaluation");
        return it->second;
      }
      case ExprKind::Const:
        return Value<S>::number(scalar_of<S>(e->value));
      case ExprKind::Add: {
        auto [p0, a] = peel_guards(e->kid(0));
        auto [p1, b] = peel_guards(e->kid(1));
        bool t0 = eval_pred(p0, env.idx);
        bool t1 = eval_pred(p1, env.idx);
        if (!t0 && !t1) return Value<S>::number(S(0));
        if (t0 && !t1) return eval(a, env);
        if (!t0 && t1) return eval(b, env);
        Value<S> va = eval(a, env);
        Value<S> vb = eval(b, env);
        count.adds += 1;
        return Value<S>::number(va.num + vb.num);
      }
      case ExprKind::Mul: {
        Value<S> va = eval(e->kid(0), env);
        Value<S> vb = eval(e->kid(1), env);
        count.muls += 1;
        return Value<S>::number(va.num * vb.num);
      }
      case ExprKind::Call: {
        if constexpr (!std::is_same_v<S, double>) {
          fail(Errc::ExactModeUnsupported,
               "black-box '" + e->name + "' cannot be evaluated in exact mode");
        } else {
          if (!fns_ || !fns_->count(e->name))
            fail(Errc::UnknownBlackBox, "'" + e->name + "' has no numeric definition");
          std::vector<double> args;
          args.reserve(e->kids.size());
          for (const auto& k : e->kids) args.push_back(eval(k, env).num);
          count.calls += 1;
          return Value<S>::number(fns_->at(e->name)(args));
        }
      }
      case ExprKind::Tuple:
        return Value<S>::pair(eval(e->kid(0), env), eval(e->kid(1), env));
      case ExprKind::Proj: {
        Value<S> v = eval(e->kid(0), env);
        if (!v.is_pair()) fail(Errc::TypeMismatch, "projection of non-pair value");
        return e->side == 0 ? v.kids[0] : v.kids[1];
      }
      case ExprKind::Gen: {
        long long n = eval_idx(e->idx, env.idx);
        if (n <= 0)
          fail(Errc::InvalidValue, "gen extent " + e->idx.str() + " = " + std::to_string(n));
        std::vector<Value<S>> elems;
        elems.reserve(static_cast<size_t>(n));
        auto saved = env.idx.ints.count(e->name)
                         ? std::optional<long long>(env.idx.ints.at(e->name))
                         : std::nullopt;
        for (long long i = 0; i < n; ++i) {
          env.idx.ints[e->name] = i;
          elems.push_back(eval(e->kid(0), env));
        }
        if (saved)
          env.idx.ints[e->name] = *saved;
        else
          env.idx.ints.erase(e->name);
        return Value<S>::array(std::move(elems));
      }
      case ExprKind::Sum: {
        SumSpine spine = collect_sum_spine(e);
        std::optional<Value<S>> acc;
        for_each_assignment(spine.binders, env.idx, [&] {
          if (!eval_pred(spine.pred, env.idx)) return;
          Value<S> v = eval(spine.core, env);
          if (!acc) {
            acc = std::move(v);
          } else {
            count.adds += 1;
            acc->num += v.num;
          }
        });
        return acc ? *acc : Value<S>::number(S(0));
      }
      case ExprKind::Access: {
        Value<S> v = eval(e->kid(0), env);
        long long k = eval_idx(e->idx, env.idx);
        if (!v.is_array()) fail(Errc::TypeMismatch, "access of non-array value");
        if (k < 0 || k >= static_cast<long long>(v.kids.size()))
          fail(Errc::IndexOutOfBounds, "index " + e->idx.str() + " = " + std::to_string(k) +
                                           " outside [0, " + std::to_string(v.kids.size()) + ")");
        return v.kids[static_cast<size_t>(k)];
      }
      case ExprKind::Guard: {
        if (!eval_pred(e->pred, env.idx)) return zero_of<S>(types_.at(e), env.idx);
        return eval(e->kid(0), env);
      }
      case ExprKind::Let: {
        Value<S> rhs = eval(e->kid(0), env);
        auto saved = env.values.count(e->name)
                         ? std::optional<Value<S>>(env.values.at(e->name))
                         : std::nullopt;
        env.values[e->name] = std::move(rhs);
        Value<S> v = eval(e->kid(1), env);
        if (saved)
          env.values[e->name] = std::move(*saved);
        else
          env.values.erase(e->name);
        return v;
      }
      case ExprKind::GuardedAccess:
        fail(Errc::Internal, "guarded access must be desugared before evaluation");
    }
    fail(Errc::Internal, "bad expr kind");
  }

 private:
  const TypeMap& types_;
  const FnTable* fns_;
};

template <class S>
Value<S> eval(const ExprPtr& e, Env<S>& env, const TypeMap& types, const FnTable* fns = nullptr,
              OpCount* count_out = nullptr) {
  Evaluator<S> ev(types, fns);
  Value<S> v = ev.eval(e, env);
  if (count_out) *count_out = ev.count;
  return v;
}

}  // namespace atl
