#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "atl/expr.hpp"
#include "atl/normalize.hpp"
#include "atl/program.hpp"

namespace atl {

struct IndexBinder {
  std::string name;
  IndexExpr extent;
};

// pi_{path...} input; path applied innermost-first (path[0] is the first
// projection applied to the variable). Empty path is the bare input.
struct SSAInput {
  std::string input;
  std::vector<int> path;
};

// gen_i.. [p] * c   (plain constant when p is true)
struct SSAConst {
  std::vector<IndexBinder> gens;
  PredPtr pred;
  Rational value;
};

// gen_i.. ([p0]*X0[i..] + [p1]*X1[i..])
struct SSAAdd {
  std::vector<IndexBinder> gens;
  PredPtr p0;
  std::string x0;
  PredPtr p1;
  std::string x1;
};

// gen_i.. [p]*f(X0[i..], ...)
struct SSAMap {
  std::vector<IndexBinder> gens;
  PredPtr pred;
  std::string fn;
  std::vector<std::string> args;
};

// gen_g.. sum_{i0.. i1.. s..} [p]*X0[i0..]*X1[i1..]   (binary)
// gen_g.. sum_{i0.. s..}      [p]*X0[i0..]            (unary)
struct SSAContract {
  bool binary = false;
  std::vector<IndexBinder> gens;
  std::vector<IndexBinder> left;
  std::vector<IndexBinder> right;
  std::vector<IndexBinder> sums;
  PredPtr pred;
  std::string x0, x1;
};

using SSARhs = std::variant<SSAInput, SSAConst, SSAAdd, SSAMap, SSAContract>;

struct SSABinding {
  std::string name;
  SSARhs rhs;
  Type type;
};

// Output: a variable or a nested tuple of variables.
struct OutputTree {
  std::string leaf;
  std::vector<OutputTree> kids;
  bool is_leaf() const { return kids.empty(); }
  static OutputTree var(std::string name) { return {std::move(name), {}}; }
  static OutputTree pair(OutputTree a, OutputTree b) {
    return {"", {std::move(a), std::move(b)}};
  }
};

struct SSAProgram {
  std::vector<std::string> size_vars;
  std::vector<std::pair<std::string, size_t>> relations;
  std::vector<std::pair<std::string, Type>> inputs;
  std::vector<SSABinding> bindings;
  OutputTree output;

  ExprPtr to_expr() const;
  Type output_type() const;
  SourceProgram to_program() const;
  const SSABinding& binding(const std::string& name) const;
  bool has_binding(const std::string& name) const;
};

ExprPtr rhs_to_expr(const SSARhs& rhs);
Type rhs_type(const SSARhs& rhs, const std::map<std::string, Type>& input_types);

// Emits bindings with canonical index naming, in-order addition terms and
// contraction factors, and CSE by structural identity of right-hand sides.
class SSABuilder {
 public:
  SSABuilder(std::vector<std::pair<std::string, Type>> inputs, NameGen names);

  // Names the value of gen_{gens} [p] * core; core must be in the gen-outer
  // scalar class (or a tensor-typed chain, which is eta-expanded).
  std::string convert(std::vector<IndexBinder> gens, PredPtr p, ExprPtr core);

  // Canonicalize + CSE + emit; returns the binding (or existing) name.
  std::string define(SSARhs rhs);

  // Register an already-canonical binding (used to extend an existing
  // program, e.g. by the adjoint driver).
  void adopt(const SSABinding& b);

  void alias(const std::string& var, const std::string& target) { alias_[var] = target; }
  std::string resolve(const std::string& var) const;
  const Type& type_of_binding(const std::string& name) const;

  std::vector<SSABinding> take_bindings() { return std::move(bindings_); }
  const std::vector<SSABinding>& bindings() const { return bindings_; }
  size_t birth(const std::string& name) const { return birth_.at(name); }

 private:
  Type infer(const ExprPtr& e) const;
  std::optional<SSAContract> match_contraction(const std::vector<IndexBinder>& gens, PredPtr pred,
                                               const std::vector<IndexBinder>& sums,
                                               const ExprPtr& inner) const;
  std::optional<std::string> identity_operand(const std::vector<IndexBinder>& gens,
                                              const ExprPtr& core) const;

  std::vector<std::pair<std::string, Type>> inputs_;
  std::map<std::string, Type> input_types_;
  NameGen names_;
  std::vector<SSABinding> bindings_;
  std::map<std::string, size_t> birth_;
  std::map<std::string, std::string> alias_;
  std::map<std::string, std::string> cse_;
  std::map<std::string, Type> binding_types_;
};

// Conversion of a gen-outer-normalized body into Tensor SSA.
SSAProgram to_ssa(const SourceProgram& prog, const ExprPtr& normalized);

// Full pipeline: alpha rename, let-lift, pair-eliminate, gen-push, convert.
SSAProgram to_ssa_pipeline(const SourceProgram& prog, const TypeEnv& env);

// Strict grammar + invariant check of an expression against the SSA normal
// form; returns the parsed program or reports the first violation.
Validation validate_ssa(const ExprPtr& e, const SourceProgram& prog);

// Drop bindings unreachable from the output.
void sweep_dead_bindings(SSAProgram& p);

}  // namespace atl
