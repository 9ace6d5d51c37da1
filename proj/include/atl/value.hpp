#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "atl/diagnostics.hpp"
#include "atl/rational.hpp"
#include "atl/types.hpp"

namespace atl {

// Relation variables evaluate against finite boolean tables of integer tuples.
struct RelTable {
  size_t arity = 0;
  std::set<std::vector<long long>> rows;
  bool contains(const std::vector<long long>& args) const { return rows.count(args) != 0; }
};

// Index-level environment: integer bindings for index/size variables plus
// relation tables. Scalar values live in Env<S> below.
struct IdxEnv {
  std::map<std::string, long long> ints;
  std::map<std::string, RelTable> relations;

  long long lookup(const std::string& name) const {
    auto it = ints.find(name);
    if (it == ints.end()) fail(Errc::UnboundIndexVariable, "'" + name + "'");
    return it->second;
  }
};

// Evaluation result: scalar, pair (two kids), or array (n kids).
template <class S>
struct Value {
  enum class Kind { Num, Pair, Array };
  Kind kind = Kind::Num;
  S num{};
  std::vector<Value> kids;

  static Value number(S v) {
    Value r;
    r.kind = Kind::Num;
    r.num = std::move(v);
    return r;
  }
  static Value pair(Value a, Value b) {
    Value r;
    r.kind = Kind::Pair;
    r.kids = {std::move(a), std::move(b)};
    return r;
  }
  static Value array(std::vector<Value> elems) {
    Value r;
    r.kind = Kind::Array;
    r.kids = std::move(elems);
    return r;
  }

  bool is_num() const { return kind == Kind::Num; }
  bool is_pair() const { return kind == Kind::Pair; }
  bool is_array() const { return kind == Kind::Array; }

  friend bool operator==(const Value& a, const Value& b) {
    if (a.kind != b.kind) return false;
    if (a.kind == Kind::Num) return a.num == b.num;
    return a.kids == b.kids;
  }
};

template <class S>
Value<S> zero_of(const Type& t, const IdxEnv& env) {
  switch (t.kind()) {
    case Type::Kind::Scalar:
      return Value<S>::number(S(0));
    case Type::Kind::Pair:
      return Value<S>::pair(zero_of<S>(t.left(), env), zero_of<S>(t.right(), env));
    case Type::Kind::Tensor: {
      long long n = t.extent().eval([&](const std::string& v) { return env.lookup(v); });
      if (n <= 0) fail(Errc::InvalidValue, "tensor extent " + t.extent().str() + " = " +
                                               std::to_string(n) + " not positive");
      std::vector<Value<S>> elems(static_cast<size_t>(n), zero_of<S>(t.elem(), env));
      return Value<S>::array(std::move(elems));
    }
  }
  fail(Errc::Internal, "bad type");
}

// Canonical flattening induced by V(T): depth-first, pair left then right,
// array elements in index order.
template <class S>
void flatten_into(const Value<S>& v, std::vector<S>& out) {
  if (v.is_num())
    out.push_back(v.num);
  else
    for (const auto& k : v.kids) flatten_into(k, out);
}

template <class S>
std::vector<S> flatten(const Value<S>& v) {
  std::vector<S> out;
  flatten_into(v, out);
  return out;
}

template <class S>
Value<S> unflatten_rec(const Type& t, const IdxEnv& env, const std::vector<S>& flat, size_t& pos) {
  switch (t.kind()) {
    case Type::Kind::Scalar:
      return Value<S>::number(flat.at(pos++));
    case Type::Kind::Pair: {
      auto a = unflatten_rec(t.left(), env, flat, pos);
      auto b = unflatten_rec(t.right(), env, flat, pos);
      return Value<S>::pair(std::move(a), std::move(b));
    }
    case Type::Kind::Tensor: {
      long long n = t.extent().eval([&](const std::string& v) { return env.lookup(v); });
      std::vector<Value<S>> elems;
      elems.reserve(static_cast<size_t>(n));
      for (long long i = 0; i < n; ++i) elems.push_back(unflatten_rec(t.elem(), env, flat, pos));
      return Value<S>::array(std::move(elems));
    }
  }
  fail(Errc::Internal, "bad type");
}

template <class S>
Value<S> unflatten(const Type& t, const IdxEnv& env, const std::vector<S>& flat) {
  size_t pos = 0;
  Value<S> v = unflatten_rec(t, env, flat, pos);
  if (pos != flat.size()) fail(Errc::InvalidValue, "flat value length does not match type");
  return v;
}

// Standard inner product of two same-shaped values.
template <class S>
S dot(const Value<S>& a, const Value<S>& b) {
  if (a.kind != b.kind) fail(Errc::InvalidValue, "inner product of mismatched shapes");
  if (a.is_num()) return a.num * b.num;
  if (a.kids.size() != b.kids.size())
    fail(Errc::InvalidValue, "inner product of mismatched shapes");
  S acc(0);
  for (size_t i = 0; i < a.kids.size(); ++i) acc += dot(a.kids[i], b.kids[i]);
  return acc;
}

template <class S>
struct Env {
  IdxEnv idx;
  std::map<std::string, Value<S>> values;
};

}  // namespace atl
