#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "atl/affine.hpp"
#include "atl/diagnostics.hpp"

namespace atl {

// Value type of the language: real scalars, pairs, and size-prefixed tensors.
// Structural equality; small immutable value type.
class Type {
 public:
  enum class Kind { Scalar, Pair, Tensor };

  Type() : Type(scalar()) {}

  static Type scalar() {
    static const Type t{std::make_shared<Node>(Node{Kind::Scalar, {}, {}, {}})};
    return t;
  }
  static Type pair(Type left, Type right) {
    return Type{std::make_shared<Node>(
        Node{Kind::Pair, std::move(left.node_), std::move(right.node_), {}})};
  }
  static Type tensor(SizeExpr extent, Type elem) {
    Type t{std::make_shared<Node>(Node{Kind::Tensor, std::move(elem.node_), {}, std::move(extent)})};
    return t;
  }

  Kind kind() const { return node_->kind; }
  bool is_scalar() const { return kind() == Kind::Scalar; }
  bool is_pair() const { return kind() == Kind::Pair; }
  bool is_tensor() const { return kind() == Kind::Tensor; }

  Type left() const { return Type{node_->a}; }
  Type right() const { return Type{node_->b}; }
  Type elem() const { return Type{node_->a}; }
  const SizeExpr& extent() const { return node_->extent; }

  // Leading tensor spine: extents until a non-tensor element type.
  std::vector<SizeExpr> dims() const {
    std::vector<SizeExpr> r;
    const Node* n = node_.get();
    while (n->kind == Kind::Tensor) {
      r.push_back(n->extent);
      n = n->a.get();
    }
    return r;
  }
  Type base() const {
    Type t = *this;
    while (t.is_tensor()) t = t.elem();
    return t;
  }

  bool contains_pair() const {
    switch (kind()) {
      case Kind::Scalar: return false;
      case Kind::Pair: return true;
      case Kind::Tensor: return elem().contains_pair();
    }
    return false;
  }

  // Struct-of-arrays form: no pair type occurs under a tensor constructor.
  bool is_soa() const {
    switch (kind()) {
      case Kind::Scalar: return true;
      case Kind::Pair: return left().is_soa() && right().is_soa();
      case Kind::Tensor: return !elem().contains_pair();
    }
    return false;
  }

  friend bool operator==(const Type& a, const Type& b) {
    if (a.node_ == b.node_) return true;
    if (a.kind() != b.kind()) return false;
    switch (a.kind()) {
      case Kind::Scalar: return true;
      case Kind::Pair: return a.left() == b.left() && a.right() == b.right();
      case Kind::Tensor: return a.extent() == b.extent() && a.elem() == b.elem();
    }
    return false;
  }
  friend bool operator!=(const Type& a, const Type& b) { return !(a == b); }

  std::string str() const {
    switch (kind()) {
      case Kind::Scalar: return "real";
      case Kind::Pair: return "(" + left().str() + ", " + right().str() + ")";
      case Kind::Tensor: return "[" + extent().str() + "]" + elem().str();
    }
    return "?";
  }

  size_t hash() const {
    switch (kind()) {
      case Kind::Scalar: return 0x9e3779b9;
      case Kind::Pair: return left().hash() * 31 + right().hash() + 1;
      case Kind::Tensor: return extent().hash() * 131 + elem().hash() + 2;
    }
    return 0;
  }

 private:
  struct Node {
    Kind kind;
    std::shared_ptr<const Node> a, b;
    SizeExpr extent;
  };
  explicit Type(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

// $(T): the flat number-of-scalars size of a type at concrete sizes.
template <class Lookup>
long long type_size(const Type& t, Lookup&& sizes) {
  switch (t.kind()) {
    case Type::Kind::Scalar: return 1;
    case Type::Kind::Pair: return type_size(t.left(), sizes) + type_size(t.right(), sizes);
    case Type::Kind::Tensor: {
      long long n = t.extent().eval(sizes);
      if (n <= 0) fail(Errc::InvalidValue, "tensor extent " + t.extent().str() + " not positive");
      return n * type_size(t.elem(), sizes);
    }
  }
  return 0;
}

}  // namespace atl
