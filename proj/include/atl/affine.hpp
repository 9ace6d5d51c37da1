#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "atl/diagnostics.hpp"

namespace atl {

// Normalized affine form over named integer variables: sum of coeff*var plus a
// constant. Serves both as the index-expression representation (variables are
// index or size variables) and as the size-expression representation
// (variables are size variables only). Affineness is canonical by
// construction: the only scaling allowed multiplies by an integer literal.
class Affine {
 public:
  Affine() = default;
  explicit Affine(long long k) : offset_(k) {}

  static Affine constant(long long k) { return Affine(k); }
  static Affine variable(const std::string& name) {
    Affine a;
    a.coeffs_[name] = 1;
    return a;
  }

  const std::map<std::string, long long>& coeffs() const { return coeffs_; }
  long long offset() const { return offset_; }

  bool is_constant() const { return coeffs_.empty(); }
  bool is_variable() const {
    return coeffs_.size() == 1 && coeffs_.begin()->second == 1 && offset_ == 0;
  }
  const std::string& single_variable() const { return coeffs_.begin()->first; }

  friend Affine operator+(const Affine& a, const Affine& b) {
    Affine r = a;
    for (const auto& [v, c] : b.coeffs_) r.bump(v, c);
    r.offset_ += b.offset_;
    return r;
  }
  friend Affine operator-(const Affine& a, const Affine& b) { return a + b.scaled(-1); }
  Affine scaled(long long k) const {
    Affine r;
    if (k == 0) return r;
    for (const auto& [v, c] : coeffs_) r.coeffs_[v] = c * k;
    r.offset_ = offset_ * k;
    return r;
  }

  friend bool operator==(const Affine& a, const Affine& b) {
    return a.offset_ == b.offset_ && a.coeffs_ == b.coeffs_;
  }
  friend bool operator!=(const Affine& a, const Affine& b) { return !(a == b); }
  friend bool operator<(const Affine& a, const Affine& b) {
    if (a.offset_ != b.offset_) return a.offset_ < b.offset_;
    return a.coeffs_ < b.coeffs_;
  }

  bool mentions(const std::string& name) const { return coeffs_.count(name) != 0; }

  // Substitute a variable by another affine form.
  Affine substituted(const std::string& name, const Affine& repl) const {
    auto it = coeffs_.find(name);
    if (it == coeffs_.end()) return *this;
    Affine r = *this;
    long long c = it->second;
    r.coeffs_.erase(name);
    return r + repl.scaled(c);
  }

  // Simultaneous substitution (safe for swaps).
  Affine substituted_all(const std::unordered_map<std::string, Affine>& su) const {
    Affine r;
    r.offset_ = offset_;
    for (const auto& [v, c] : coeffs_) {
      auto it = su.find(v);
      if (it == su.end())
        r.bump(v, c);
      else
        r = r + it->second.scaled(c);
    }
    return r;
  }

  Affine renamed(const std::unordered_map<std::string, std::string>& ren) const {
    Affine r;
    r.offset_ = offset_;
    for (const auto& [v, c] : coeffs_) {
      auto it = ren.find(v);
      r.bump(it == ren.end() ? v : it->second, c);
    }
    return r;
  }

  template <class Lookup>  // Lookup: name -> long long, throws if unbound
  long long eval(Lookup&& lookup) const {
    long long r = offset_;
    for (const auto& [v, c] : coeffs_) r += c * lookup(v);
    return r;
  }

  std::string str() const {
    if (coeffs_.empty()) return std::to_string(offset_);
    std::string s;
    bool first = true;
    for (const auto& [v, c] : coeffs_) {
      if (c >= 0 && !first) s += "+";
      if (c == -1)
        s += "-";
      else if (c != 1)
        s += std::to_string(c) + "*";
      s += v;
      first = false;
    }
    if (offset_ > 0) s += "+" + std::to_string(offset_);
    if (offset_ < 0) s += std::to_string(offset_);
    return s;
  }

  size_t hash() const {
    size_t h = static_cast<size_t>(offset_) * 1000003u;
    for (const auto& [v, c] : coeffs_) {
      h = h * 31 + std::hash<std::string>{}(v);
      h = h * 31 + static_cast<size_t>(c);
    }
    return h;
  }

 private:
  void bump(const std::string& v, long long c) {
    auto [it, inserted] = coeffs_.try_emplace(v, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0) coeffs_.erase(it);
    }
  }

  std::map<std::string, long long> coeffs_;
  long long offset_ = 0;
};

using IndexExpr = Affine;
using SizeExpr = Affine;

}  // namespace atl
