#pragma once

#include <map>
#include <set>
#include <string>
#include <unordered_map>

#include "atl/expr.hpp"
#include "atl/types.hpp"

namespace atl {

// Static context a program is checked against: typed free variables, size
// variables, relation signatures, and known black-box arities.
struct TypeEnv {
  std::map<std::string, Type> vars;
  std::set<std::string> size_vars;
  std::map<std::string, size_t> relations;
  std::map<std::string, size_t> functions;
};

// Types for every subterm of one checked program. Valid because binder names
// are unique within a program, so a shared subterm has one consistent type.
class TypeMap {
 public:
  const Type& at(const ExprPtr& e) const {
    auto it = map_.find(e.get());
    if (it == map_.end()) fail(Errc::Internal, "subterm missing from type map");
    return it->second;
  }
  bool has(const ExprPtr& e) const { return map_.count(e.get()) != 0; }
  void set(const ExprPtr& e, Type t) { map_.emplace(e.get(), std::move(t)); }

 private:
  std::unordered_map<const Expr*, Type> map_;
};

TypeMap typecheck(const ExprPtr& e, const TypeEnv& env);

// Replaces e[a]? sugar by [0 <= a and a < n] * e[a]; requires a checked term.
ExprPtr desugar_guarded_access(const ExprPtr& e, const TypeMap& types);

}  // namespace atl
