#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "atl/predicate.hpp"
#include "atl/rational.hpp"
#include "atl/types.hpp"

namespace atl {

class Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class ExprKind {
  Var,       // variable reference
  Const,     // scalar literal
  Add,       // scalar addition
  Mul,       // scalar multiplication
  Call,      // black-box scalar function
  Tuple,     // pair construction
  Proj,      // pair projection (side 0/1)
  Gen,       // tensor generation, 0-based
  Sum,       // big summation, 0-based
  Access,    // tensor indexing
  Guard,     // Iverson indicator [p]*e
  Let,       // let binding
  GuardedAccess,  // frontend sugar e[a]?, removed by desugaring
};

// Core expression node. Immutable and hash-consed: all construction goes
// through the factories below, which intern structurally identical subterms,
// so structural equality is pointer equality and CSE comes for free.
class Expr {
 public:
  ExprKind kind;
  std::string name;          // Var; Call function; Gen/Sum binder; Let binder
  Rational value;            // Const
  int side = 0;              // Proj
  IndexExpr idx;             // Access/GuardedAccess index; Gen/Sum extent
  PredPtr pred;              // Guard
  std::optional<Type> ann;   // Let annotation
  std::vector<ExprPtr> kids;

  size_t hash = 0;

  const ExprPtr& kid(size_t i) const { return kids[i]; }
};

ExprPtr e_var(std::string name);
ExprPtr e_const(Rational value);
ExprPtr e_add(ExprPtr a, ExprPtr b);
ExprPtr e_mul(ExprPtr a, ExprPtr b);
ExprPtr e_call(std::string fn, std::vector<ExprPtr> args);
ExprPtr e_tuple(ExprPtr a, ExprPtr b);
ExprPtr e_proj(int side, ExprPtr e);
ExprPtr e_gen(std::string var, IndexExpr extent, ExprPtr body);
ExprPtr e_sum(std::string var, IndexExpr extent, ExprPtr body);
ExprPtr e_access(ExprPtr e, IndexExpr idx);
ExprPtr e_guard(PredPtr p, ExprPtr e);  // folds [true]*e to e
ExprPtr e_let(std::string var, std::optional<Type> ann, ExprPtr rhs, ExprPtr body);
ExprPtr e_guarded_access(ExprPtr e, IndexExpr idx);

// 0 of a given type as an expression: 0 / (0,0) / gen i. 0. Evaluates to the
// zero shape and costs nothing.
ExprPtr e_zero(const Type& t, class NameGen& names);

// Free term variables (let binders excluded).
std::set<std::string> free_vars(const ExprPtr& e);
// Free index/size variables occurring in index positions and predicates.
std::set<std::string> free_index_vars(const ExprPtr& e);
// Every name occurring anywhere (free or bound, term or index).
void all_names(const ExprPtr& e, std::set<std::string>& out);

// Deterministic fresh-name supply; never returns a name in the avoid set and
// never returns the same name twice.
class NameGen {
 public:
  NameGen() = default;
  explicit NameGen(std::set<std::string> avoid) : avoid_(std::move(avoid)) {}
  void avoid(const std::string& n) { avoid_.insert(n); }
  void avoid_all_in(const ExprPtr& e) { all_names(e, avoid_); }
  std::string fresh(const std::string& base);

 private:
  std::set<std::string> avoid_;
  std::unordered_map<std::string, int> counters_;
};

struct Subst {
  std::unordered_map<std::string, ExprPtr> exprs;   // term variable -> expression
  std::unordered_map<std::string, IndexExpr> idxs;  // index variable -> affine form
  bool empty() const { return exprs.empty() && idxs.empty(); }
};

// Capture-avoiding simultaneous substitution.
ExprPtr substitute(const ExprPtr& e, const Subst& su);
ExprPtr substitute_var(const ExprPtr& e, const std::string& name, const ExprPtr& repl);
ExprPtr substitute_idx(const ExprPtr& e, const std::string& name, const IndexExpr& repl);

// Rename every binder (term and index) to a fresh name so no two binders in
// the result share a name and none shadows a free variable.
ExprPtr alpha_uniquify(const ExprPtr& e, NameGen& names);

// Canonical form: index binders renamed i0, i1, ... by first occurrence, and
// commutative scalar operands ordered by a name-insensitive structural key.
// Idempotent; preserves evaluation and work cost exactly.
ExprPtr canonicalize(const ExprPtr& e);

// Name-insensitive structural key (binders De Bruijn-numbered); equal keys
// mean alpha-equivalent terms.
std::string structural_key(const ExprPtr& e);

}  // namespace atl
