#pragma once

#include <cstdint>
#include <string>

#include "atl/diagnostics.hpp"

namespace atl {

// Exact rational on 128-bit integers, always normalized (den > 0, gcd = 1).
// Overflow raises ArithmeticOverflow instead of wrapping; at the scales this
// library evaluates (desk-size programs, denominators <= 16) it never fires.
class Rational {
 public:
  using Int = __int128;

  Rational() : num_(0), den_(1) {}
  Rational(long long n) : num_(n), den_(1) {}
  Rational(Int num, Int den) : num_(num), den_(den) { normalize(); }

  Int num() const { return num_; }
  Int den() const { return den_; }

  bool is_zero() const { return num_ == 0; }
  bool is_integer() const { return den_ == 1; }

  Rational operator-() const { return Rational(-num_, den_); }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return Rational(add_checked(mul_checked(a.num_, b.den_), mul_checked(b.num_, a.den_)),
                    mul_checked(a.den_, b.den_));
  }
  friend Rational operator-(const Rational& a, const Rational& b) { return a + (-b); }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return Rational(mul_checked(a.num_, b.num_), mul_checked(a.den_, b.den_));
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) fail(Errc::ArithmeticOverflow, "rational division by zero");
    return Rational(mul_checked(a.num_, b.den_), mul_checked(a.den_, b.num_));
  }

  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }
  Rational& operator*=(const Rational& o) { return *this = *this * o; }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
  friend bool operator<(const Rational& a, const Rational& b) {
    return mul_checked(a.num_, b.den_) < mul_checked(b.num_, a.den_);
  }

  double to_double() const {
    return static_cast<double>(static_cast<long double>(num_) / static_cast<long double>(den_));
  }

  std::string str() const {
    std::string s = int_str(num_);
    if (den_ != 1) s += "/" + int_str(den_);
    return s;
  }

  size_t hash() const {
    auto h = static_cast<size_t>(num_ ^ (num_ >> 64));
    return h * 1000003u ^ static_cast<size_t>(den_ ^ (den_ >> 64));
  }

 private:
  static Int gcd(Int a, Int b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
      Int t = a % b;
      a = b;
      b = t;
    }
    return a;
  }

  static Int add_checked(Int a, Int b) {
    Int r;
    if (__builtin_add_overflow(a, b, &r)) fail(Errc::ArithmeticOverflow, "rational add overflow");
    return r;
  }
  static Int mul_checked(Int a, Int b) {
    Int r;
    if (__builtin_mul_overflow(a, b, &r)) fail(Errc::ArithmeticOverflow, "rational mul overflow");
    return r;
  }

  static std::string int_str(Int v) {
    if (v == 0) return "0";
    bool neg = v < 0;
    unsigned __int128 u = neg ? static_cast<unsigned __int128>(-(v + 1)) + 1
                              : static_cast<unsigned __int128>(v);
    std::string s;
    while (u != 0) {
      s.push_back(static_cast<char>('0' + static_cast<int>(u % 10)));
      u /= 10;
    }
    if (neg) s.push_back('-');
    return {s.rbegin(), s.rend()};
  }

  void normalize() {
    if (den_ == 0) fail(Errc::ArithmeticOverflow, "rational with zero denominator");
    if (den_ < 0) {
      num_ = -num_;
      den_ = -den_;
    }
    Int g = gcd(num_, den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
    if (num_ == 0) den_ = 1;
  }

  Int num_, den_;
};

}  // namespace atl
