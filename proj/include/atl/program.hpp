#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "atl/expr.hpp"
#include "atl/typecheck.hpp"

namespace atl {

// A parsed .atl file: size/relation/input declarations plus one body
// expression. Parsing then printing then parsing yields an identical AST.
struct SourceProgram {
  std::vector<std::string> size_vars;
  std::vector<std::pair<std::string, size_t>> relations;
  std::vector<std::pair<std::string, Type>> inputs;
  ExprPtr body;

  TypeEnv type_env(const std::map<std::string, size_t>& functions = {}) const {
    TypeEnv env;
    for (const auto& s : size_vars) env.size_vars.insert(s);
    for (const auto& [r, a] : relations) env.relations.emplace(r, a);
    for (const auto& [x, t] : inputs) env.vars.emplace(x, t);
    env.functions = functions;
    return env;
  }

  std::vector<Type> input_types() const {
    std::vector<Type> r;
    r.reserve(inputs.size());
    for (const auto& [x, t] : inputs) r.push_back(t);
    return r;
  }

  const Type* input_type(const std::string& name) const {
    for (const auto& [x, t] : inputs)
      if (x == name) return &t;
    return nullptr;
  }

  SourceProgram with_body(ExprPtr b) const {
    SourceProgram p = *this;
    p.body = std::move(b);
    return p;
  }
};

SourceProgram parse_program(std::string_view text);

std::string print_expr(const ExprPtr& e);
std::string print_program(const SourceProgram& p);

}  // namespace atl
