#pragma once

#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "atl/affine.hpp"

namespace atl {

class Pred;
using PredPtr = std::shared_ptr<const Pred>;

enum class CmpOp { Lt, Le, Eq };

// Predicates over affine index terms. Immutable and hash-consed: structurally
// equal predicates are the same object, so equality is pointer equality.
class Pred {
 public:
  enum class Kind { True, False, Cmp, Rel, And, Or, Exists };

  Kind kind;
  CmpOp op = CmpOp::Eq;         // Cmp
  IndexExpr lhs, rhs;           // Cmp
  std::string rel;              // Rel
  std::vector<IndexExpr> args;  // Rel
  PredPtr a, b;                 // And/Or
  std::string var;              // Exists binder (0-based range)
  IndexExpr extent;             // Exists
  PredPtr body;                 // Exists

  size_t hash = 0;

  static PredPtr truth();
  static PredPtr falsity();
  static PredPtr cmp(CmpOp op, IndexExpr lhs, IndexExpr rhs);
  static PredPtr relation(std::string name, std::vector<IndexExpr> args);
  static PredPtr conj(PredPtr a, PredPtr b);
  static PredPtr disj(PredPtr a, PredPtr b);
  static PredPtr exists(std::string var, IndexExpr extent, PredPtr body);

  bool is_true() const { return kind == Kind::True; }
  bool is_false() const { return kind == Kind::False; }
};

// Free index/size variables (binders excluded).
void pred_free_vars(const PredPtr& p, std::set<std::string>& out);

// Relation names used anywhere in the predicate.
void pred_relations(const PredPtr& p, std::set<std::string>& out);

// Capture-avoiding substitution of index variables by affine forms.
PredPtr pred_substitute(const PredPtr& p, const std::unordered_map<std::string, IndexExpr>& su);

std::string pred_str(const PredPtr& p);

}  // namespace atl
