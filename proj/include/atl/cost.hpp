#pragma once

#include <vector>

#include "atl/eval.hpp"
#include "atl/expr.hpp"
#include "atl/value.hpp"

namespace atl {

// Work cost: scalar additions, multiplications, and black-box calls; index
// arithmetic and predicate tests are free. Never negative, including after the
// -1 adjustments of the starred rules.
struct WorkCost {
  long long adds = 0, muls = 0, calls = 0;
  long long total() const { return adds + muls + calls; }
  WorkCost& operator+=(const WorkCost& o) {
    adds += o.adds;
    muls += o.muls;
    calls += o.calls;
    return *this;
  }
  friend WorkCost operator+(WorkCost a, const WorkCost& b) { return a += b; }
  friend bool operator==(const WorkCost& a, const WorkCost& b) {
    return a.adds == b.adds && a.muls == b.muls && a.calls == b.calls;
  }
  bool matches(const OpCount& c) const {
    return adds == c.adds && muls == c.muls && calls == c.calls;
  }
};

// Sparsity-aware operation count of one evaluation of e under env. Needs only
// index/size/relation bindings: scalar values never influence cost.
WorkCost cost(const ExprPtr& e, IdxEnv& env);

// #(p): number of assignments of the given 0-based ranges satisfying p,
// by exhaustive enumeration.
long long pred_count(const PredPtr& p, const std::vector<std::pair<std::string, IndexExpr>>& ranges,
                     IdxEnv& env);

// $_{IO}: work cost plus flat input and output type sizes.
long long io_size(const std::vector<Type>& input_types, const Type& output_type,
                  const IdxEnv& env);

}  // namespace atl
