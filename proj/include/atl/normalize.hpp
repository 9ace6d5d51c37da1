#pragma once

#include <set>
#include <string>

#include "atl/expr.hpp"
#include "atl/program.hpp"
#include "atl/typecheck.hpp"

namespace atl {

struct Validation {
  bool ok = true;
  std::string message;
  ExprPtr where;
};

// Moves every let binding to the outermost level (statement-block form).
// Requires alpha-unique binders; preserves evaluation and cost exactly.
ExprPtr let_lift(const ExprPtr& e);

// Destructures all pair-typed intermediaries; afterwards projections occur
// only on input variables and pair construction only at the output. Requires
// let-lifted input and struct-of-arrays input/output types.
ExprPtr pair_elim(const ExprPtr& e, const TypeEnv& env, NameGen& names);

// Moves Gen to the outermost position of every right-hand side; applies the
// beta rule (gen i. e)[a] and fuses stacked indicators. May decrease cost.
ExprPtr gen_pushout(const ExprPtr& e);

Validation validate_let_lifted(const ExprPtr& e);
Validation validate_pair_free(const ExprPtr& e, const std::set<std::string>& inputs);
Validation validate_gen_outer(const ExprPtr& e, const std::set<std::string>& inputs);

// let_lift -> pair_elim -> gen_pushout on an alpha-uniquified body.
ExprPtr normalize_flat(const SourceProgram& prog, const TypeEnv& env, NameGen& names);

}  // namespace atl
