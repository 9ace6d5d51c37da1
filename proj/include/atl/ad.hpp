#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "atl/cost.hpp"
#include "atl/eval.hpp"
#include "atl/ssa.hpp"

namespace atl {

// Scalar black-box primitive: numeric evaluator plus the partial derivative
// of each argument as a core-language template over placeholder variables
// __a0, __a1, ...
struct Primitive {
  size_t arity = 0;
  ScalarFn fn;
  std::vector<ExprPtr> partials;
};

class PrimitiveRegistry {
 public:
  static const PrimitiveRegistry& standard();

  void add(const std::string& name, Primitive p) { prims_[name] = std::move(p); }
  bool has(const std::string& name) const { return prims_.count(name) != 0; }
  const Primitive& at(const std::string& name) const {
    auto it = prims_.find(name);
    if (it == prims_.end()) fail(Errc::UnregisteredBlackBox, "'" + name + "'");
    return it->second;
  }
  std::map<std::string, size_t> arities() const {
    std::map<std::string, size_t> r;
    for (const auto& [n, p] : prims_) r.emplace(n, p.arity);
    return r;
  }
  FnTable fn_table() const {
    FnTable r;
    for (const auto& [n, p] : prims_) r.emplace(n, p.fn);
    return r;
  }
  static std::string placeholder(size_t i) { return "__a" + std::to_string(i); }

 private:
  std::map<std::string, Primitive> prims_;
};

// input variable -> its differential variable; variables absent from the map
// are constants.
using DiffMap = std::map<std::string, std::string>;

// Total (forward) derivative as a source-to-source transform. var_types is
// consulted only for the zero of a non-differentiated variable.
ExprPtr forward_deriv(const ExprPtr& e, const DiffMap& sigma,
                      const std::map<std::string, Type>& var_types, const PrimitiveRegistry& reg,
                      NameGen& names);

// One inner-product atom of the extended grammar: <left, rhs>_pred where rhs
// is a differential (a pending binding's dX, or a projection chain of an
// input seed). left always has work cost zero.
struct InnerProd {
  ExprPtr left;
  PredPtr pred;                    // over `dims` (and size variables)
  std::vector<IndexBinder> dims;   // tensor dims of the product type; empty = scalar
  Type type;
  ExprPtr rhs;                     // Var(dX) or proj chain over Var(dx_input)
  std::string target;              // dX name while a binding m-let is pending, else ""
  std::string input;               // set for input contributions
  std::vector<int> path;
};

// Snapshot of the adjoint rewrite state: ordinary lets (original program
// bindings plus emitted adjoint bindings), pending differential m-lets, and
// the body sum of inner products.
struct AdjointState {
  std::vector<SSABinding> lets;
  std::vector<size_t> pending;  // indices into `lets` of original bindings with live m-lets
  std::vector<InnerProd> body;
  DiffMap sigma;
  std::string dy;
  Type dy_type;
  std::vector<std::pair<std::string, Type>> inputs;  // original inputs + dy
};

// De-sugars an adjoint state back to the core language (m-lets become lets of
// instantiated forward derivatives, m-plus becomes addition, inner products
// become sums of elementwise products).
ExprPtr desugar_inner(const AdjointState& s, const PrimitiveRegistry& reg);

// Extended cost model: constituent expression costs plus, per inner product,
// the interface size ($(T) unpredicated, #(p) predicated).
WorkCost cost_extended(const AdjointState& s, IdxEnv& env, const PrimitiveRegistry& reg);

struct AdjointOptions {
  std::function<void(const AdjointState&)> observer;
  bool sweep = true;
};

struct AdjointResult {
  SSAProgram program;
  std::string dy;
  std::vector<std::pair<std::string, std::string>> wrt;  // input -> output slot order
};

// Reverse-mode derivative of a Tensor SSA program via the inner-product
// rewrite system.
AdjointResult adjoint_deriv(const SSAProgram& prog, const std::vector<std::string>& wrt,
                            const PrimitiveRegistry& reg, const AdjointOptions& opts = {});

// Program-level conveniences.
struct ForwardProgram {
  SourceProgram program;                                  // inputs + dx seeds
  std::vector<std::pair<std::string, std::string>> wrt;   // input -> dx name
};
ForwardProgram forward_of_program(const SourceProgram& prog, const std::vector<std::string>& wrt,
                                  const PrimitiveRegistry& reg);

struct AdjointProgram {
  SourceProgram program;  // inputs + dy seed
  SSAProgram ssa;
  std::string dy;
  std::vector<std::pair<std::string, std::string>> wrt;
};
AdjointProgram adjoint_of_program(const SourceProgram& prog, const std::vector<std::string>& wrt,
                                  const PrimitiveRegistry& reg, const AdjointOptions& opts = {});

struct CostBound {
  long long base = 0, derived = 0;
  bool holds = false;
};
// cost(D[e]) <= 4 cost(e) at concrete sizes, for an SSA-form program.
CostBound forward_cost_check(const SSAProgram& prog, const std::vector<std::string>& wrt,
                             const PrimitiveRegistry& reg, IdxEnv& env);
// $_{IO}(adjoint) <= 4 $_{IO}(e) at concrete sizes.
CostBound adjoint_cost_check(const SSAProgram& prog, const std::vector<std::string>& wrt,
                             const PrimitiveRegistry& reg, IdxEnv& env);

}  // namespace atl
