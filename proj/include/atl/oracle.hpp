#pragma once

#include <cmath>
#include <cstdint>

#include "atl/ad.hpp"
#include "atl/cost.hpp"
#include "atl/eval.hpp"
#include "atl/program.hpp"

namespace atl {

// splitmix64: deterministic across platforms.
struct Rng {
  uint64_t state;
  explicit Rng(uint64_t seed) : state(seed) {}
  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  long long below(long long n) { return static_cast<long long>(next() % static_cast<uint64_t>(n)); }
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(next() >> 11) * 0x1.0p-53);
  }
};

// Uniform [-1, 1] doubles / small rationals with denominator <= max_den.
inline Value<double> random_double_value(const Type& t, const IdxEnv& env, Rng& rng) {
  switch (t.kind()) {
    case Type::Kind::Scalar:
      return Value<double>::number(rng.uniform(-1.0, 1.0));
    case Type::Kind::Pair: {
      auto a = random_double_value(t.left(), env, rng);
      auto b = random_double_value(t.right(), env, rng);
      return Value<double>::pair(std::move(a), std::move(b));
    }
    case Type::Kind::Tensor: {
      long long n = t.extent().eval([&](const std::string& v) { return env.lookup(v); });
      std::vector<Value<double>> elems;
      for (long long i = 0; i < n; ++i) elems.push_back(random_double_value(t.elem(), env, rng));
      return Value<double>::array(std::move(elems));
    }
  }
  fail(Errc::Internal, "bad type");
}

inline Value<Rational> random_rational_value(const Type& t, const IdxEnv& env, Rng& rng,
                                             long long max_den = 16) {
  switch (t.kind()) {
    case Type::Kind::Scalar: {
      long long num = rng.below(2 * max_den + 1) - max_den;
      long long den = 1 + rng.below(max_den);
      return Value<Rational>::number(Rational(num, den));
    }
    case Type::Kind::Pair: {
      auto a = random_rational_value(t.left(), env, rng, max_den);
      auto b = random_rational_value(t.right(), env, rng, max_den);
      return Value<Rational>::pair(std::move(a), std::move(b));
    }
    case Type::Kind::Tensor: {
      long long n = t.extent().eval([&](const std::string& v) { return env.lookup(v); });
      std::vector<Value<Rational>> elems;
      for (long long i = 0; i < n; ++i)
        elems.push_back(random_rational_value(t.elem(), env, rng, max_den));
      return Value<Rational>::array(std::move(elems));
    }
  }
  fail(Errc::Internal, "bad type");
}

template <class S>
Value<S> random_value(const Type& t, const IdxEnv& env, Rng& rng) {
  if constexpr (std::is_same_v<S, double>)
    return random_double_value(t, env, rng);
  else
    return random_rational_value(t, env, rng);
}

inline RelTable random_table(size_t arity, long long range, Rng& rng) {
  RelTable t;
  t.arity = arity;
  std::vector<long long> tuple(arity, 0);
  std::function<void(size_t)> go = [&](size_t d) {
    if (d == arity) {
      if (rng.next() & 1) t.rows.insert(tuple);
      return;
    }
    for (long long v = 0; v < range; ++v) {
      tuple[d] = v;
      go(d + 1);
    }
  };
  go(0);
  return t;
}

// Typecheck + desugar + evaluate one program under an environment.
template <class S>
Value<S> eval_program(const SourceProgram& prog, Env<S>& env, const PrimitiveRegistry& reg,
                      OpCount* count = nullptr) {
  TypeEnv tenv = prog.type_env(reg.arities());
  TypeMap types = typecheck(prog.body, tenv);
  ExprPtr body = desugar_guarded_access(prog.body, types);
  if (body != prog.body) types = typecheck(body, tenv);
  FnTable fns = reg.fn_table();
  Evaluator<S> ev(types, &fns);
  Value<S> v = ev.eval(body, env);
  if (count) *count = ev.count;
  return v;
}

template <class S>
struct Jacobian {
  size_t rows = 0, cols = 0;
  std::vector<S> a;
  Jacobian() = default;
  Jacobian(size_t r, size_t c) : rows(r), cols(c), a(r * c, S(0)) {}
  S& at(size_t r, size_t c) { return a[r * cols + c]; }
  const S& at(size_t r, size_t c) const { return a[r * cols + c]; }
  bool equals_transpose_of(const Jacobian& o) const {
    if (rows != o.cols || cols != o.rows) return false;
    for (size_t r = 0; r < rows; ++r)
      for (size_t c = 0; c < cols; ++c)
        if (!(at(r, c) == o.at(c, r))) return false;
    return true;
  }
};

inline long long flat_dim(const std::vector<Type>& types, const IdxEnv& env) {
  long long n = 0;
  auto lookup = [&](const std::string& v) { return env.lookup(v); };
  for (const auto& t : types) n += type_size(t, lookup);
  return n;
}

enum class Probe { Forward, Adjoint };

// Dense Jacobian by one-hot probing: Forward probes columns with one-hot dx,
// Adjoint probes rows with one-hot dy. Rows = flattened output, cols =
// flattened differentiated inputs.
template <class S>
Jacobian<S> jacobian_by_probing(const SourceProgram& prog, const std::vector<std::string>& wrt,
                                Env<S>& base, const PrimitiveRegistry& reg, Probe mode,
                                long long max_dim = 64) {
  TypeEnv tenv = prog.type_env(reg.arities());
  TypeMap types = typecheck(prog.body, tenv);
  Type out_t = types.at(prog.body);
  std::vector<Type> wrt_types;
  for (const auto& w : wrt) wrt_types.push_back(*prog.input_type(w));
  long long in_dim = flat_dim(wrt_types, base.idx);
  long long out_dim = flat_dim({out_t}, base.idx);
  if (in_dim > max_dim || out_dim > max_dim)
    fail(Errc::DimensionTooLarge, "flattened dimension exceeds " + std::to_string(max_dim));

  Jacobian<S> jac(static_cast<size_t>(out_dim), static_cast<size_t>(in_dim));
  if (mode == Probe::Forward) {
    ForwardProgram fp = forward_of_program(prog, wrt, reg);
    for (long long j = 0; j < in_dim; ++j) {
      Env<S> env = base;
      std::vector<S> flat(static_cast<size_t>(in_dim), S(0));
      flat[static_cast<size_t>(j)] = S(1);
      size_t pos = 0;
      for (size_t k = 0; k < wrt.size(); ++k) {
        auto lookup = [&](const std::string& v) { return base.idx.lookup(v); };
        size_t len = static_cast<size_t>(type_size(wrt_types[k], lookup));
        std::vector<S> piece(flat.begin() + pos, flat.begin() + pos + len);
        pos += len;
        env.values[fp.wrt[k].second] = unflatten(wrt_types[k], base.idx, piece);
      }
      std::vector<S> col = flatten(eval_program(fp.program, env, reg));
      for (long long i = 0; i < out_dim; ++i)
        jac.at(static_cast<size_t>(i), static_cast<size_t>(j)) = col[static_cast<size_t>(i)];
    }
    return jac;
  }
  AdjointProgram ap = adjoint_of_program(prog, wrt, reg);
  for (long long i = 0; i < out_dim; ++i) {
    Env<S> env = base;
    std::vector<S> flat(static_cast<size_t>(out_dim), S(0));
    flat[static_cast<size_t>(i)] = S(1);
    env.values[ap.dy] = unflatten(out_t, base.idx, flat);
    std::vector<S> row = flatten(eval_program(ap.program, env, reg));
    for (long long j = 0; j < in_dim; ++j)
      jac.at(static_cast<size_t>(i), static_cast<size_t>(j)) = row[static_cast<size_t>(j)];
  }
  return jac;
}

// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h over the flattened wrt
// coordinates; scalar outputs only.
inline std::vector<double> finite_diff_gradient(const SourceProgram& prog,
                                                const std::vector<std::string>& wrt,
                                                Env<double>& base, const PrimitiveRegistry& reg,
                                                double h) {
  TypeEnv tenv = prog.type_env(reg.arities());
  TypeMap types = typecheck(prog.body, tenv);
  if (!types.at(prog.body).is_scalar())
    fail(Errc::NonScalarOutput, "finite differences need a scalar output");
  std::vector<double> grad;
  for (const auto& w : wrt) {
    const Type& t = *prog.input_type(w);
    std::vector<double> flat = flatten(base.values.at(w));
    for (size_t i = 0; i < flat.size(); ++i) {
      double saved = flat[i];
      Env<double> env = base;
      flat[i] = saved + h;
      env.values[w] = unflatten(t, base.idx, flat);
      double up = eval_program(prog, env, reg).num;
      flat[i] = saved - h;
      env.values[w] = unflatten(t, base.idx, flat);
      double down = eval_program(prog, env, reg).num;
      flat[i] = saved;
      grad.push_back((up - down) / (2 * h));
    }
  }
  return grad;
}

inline double rel_err(double a, double b, double floor = 1e-8) {
  double scale = std::max({std::fabs(a), std::fabs(b), floor});
  return std::fabs(a - b) / scale;
}

struct UniversalReport {
  int trials = 0;
  double max_rel_err = 0.0;
  bool exact = false;
  bool pass = false;
};

// <dy, Df(x,dx)> = <D^T f(x,dy), dx> over random draws; exact equality in
// rational mode, relative error in float mode.
template <class S>
UniversalReport check_universal_property(const SourceProgram& prog,
                                         const std::vector<std::string>& wrt, int trials,
                                         uint64_t seed, const PrimitiveRegistry& reg,
                                         const IdxEnv& sizes) {
  ForwardProgram fp = forward_of_program(prog, wrt, reg);
  AdjointProgram ap = adjoint_of_program(prog, wrt, reg);
  TypeEnv tenv = prog.type_env(reg.arities());
  TypeMap types = typecheck(prog.body, tenv);
  Type out_t = types.at(prog.body);

  Rng rng(seed);
  UniversalReport rep;
  rep.exact = !std::is_same_v<S, double>;
  rep.trials = trials;
  bool all_equal = true;
  for (int t = 0; t < trials; ++t) {
    Env<S> env;
    env.idx = sizes;
    for (const auto& [x, ty] : prog.inputs) env.values[x] = random_value<S>(ty, sizes, rng);
    std::map<std::string, Value<S>> dxs;
    for (size_t k = 0; k < wrt.size(); ++k)
      dxs[wrt[k]] = random_value<S>(*prog.input_type(wrt[k]), sizes, rng);
    Value<S> dy = random_value<S>(out_t, sizes, rng);

    Env<S> fenv = env;
    for (size_t k = 0; k < wrt.size(); ++k) fenv.values[fp.wrt[k].second] = dxs[wrt[k]];
    Value<S> fwd = eval_program(fp.program, fenv, reg);
    S lhs = dot(dy, fwd);

    Env<S> aenv = env;
    aenv.values[ap.dy] = dy;
    Value<S> adj = eval_program(ap.program, aenv, reg);
    // Adjoint output and dx tuple share the wrt order.
    Value<S> dx_tuple = [&] {
      if (wrt.size() == 1) return dxs[wrt[0]];
      Value<S> v = dxs[wrt.back()];
      for (size_t k = wrt.size() - 1; k-- > 0;) v = Value<S>::pair(dxs[wrt[k]], std::move(v));
      return v;
    }();
    S rhs = dot(adj, dx_tuple);

    if constexpr (std::is_same_v<S, double>) {
      rep.max_rel_err = std::max(rep.max_rel_err, rel_err(lhs, rhs));
    } else {
      all_equal = all_equal && lhs == rhs;
    }
  }
  if constexpr (std::is_same_v<S, double>)
    rep.pass = rep.max_rel_err <= 1e-9;
  else
    rep.pass = all_equal;
  return rep;
}

}  // namespace atl
