#include <doctest.h>

#include "helpers.hpp"

using namespace atl;
using namespace atl::testing;

TEST_CASE("jacobian of the identity program is the identity matrix") {
  SourceProgram p = load_program("identity");
  Env<Rational> base = random_env<Rational>(p, {{"n", 4}}, 1);
  auto jac = jacobian_by_probing(p, {"x"}, base, reg(), Probe::Forward);
  REQUIRE(jac.rows == 4);
  REQUIRE(jac.cols == 4);
  for (size_t i = 0; i < 4; ++i)
    for (size_t j = 0; j < 4; ++j)
      CHECK(jac.at(i, j) == Rational(i == j ? 1 : 0));
}

TEST_CASE("jacobian of convolution is the expected banded matrix") {
  SourceProgram p = load_program("conv");
  Env<Rational> base;
  base.idx.ints["n"] = 3;
  base.idx.ints["m"] = 2;
  std::vector<Value<Rational>> c = {Value<Rational>::number(Rational(10)),
                                    Value<Rational>::number(Rational(20))};
  base.values["c"] = Value<Rational>::array(c);
  std::vector<Value<Rational>> x(4, Value<Rational>::number(Rational(0)));
  base.values["x"] = Value<Rational>::array(x);
  auto jac = jacobian_by_probing(p, {"x"}, base, reg(), Probe::Forward);
  long long want[3][4] = {{20, 10, 0, 0}, {0, 20, 10, 0}, {0, 0, 20, 10}};
  REQUIRE(jac.rows == 3);
  REQUIRE(jac.cols == 4);
  for (size_t i = 0; i < 3; ++i)
    for (size_t j = 0; j < 4; ++j)
      CHECK(jac.at(i, j) == Rational(want[i][j]));
}

TEST_CASE("jacobian of the linear DAG program, forward and adjoint") {
  SourceProgram p = load_program("dag_linear");
  Env<Rational> base;
  base.values["x"] = Value<Rational>::number(Rational(0));
  base.values["y"] = Value<Rational>::number(Rational(0));
  auto fwd = jacobian_by_probing(p, {"x", "y"}, base, reg(), Probe::Forward);
  long long want[2][2] = {{8, 0}, {46, 33}};  // rows (z, w), cols (x, y)
  for (size_t i = 0; i < 2; ++i)
    for (size_t j = 0; j < 2; ++j)
      CHECK(fwd.at(i, j) == Rational(want[i][j]));
  auto adj = jacobian_by_probing(p, {"x", "y"}, base, reg(), Probe::Adjoint);
  CHECK(fwd.equals_transpose_of(adj) == false);  // same orientation, not transposed
  for (size_t i = 0; i < 2; ++i)
    for (size_t j = 0; j < 2; ++j)
      CHECK(adj.at(i, j) == fwd.at(i, j));
}

TEST_CASE("forward equals adjoint jacobian entrywise on the corpus") {
  for (const auto& entry : corpus()) {
    if (!entry.polynomial) continue;
    SourceProgram p = load_program(entry.name);
    Env<Rational> base = random_env<Rational>(p, entry.size_sets[0], 5);
    auto fwd = jacobian_by_probing(p, entry.wrt, base, reg(), Probe::Forward);
    auto adj = jacobian_by_probing(p, entry.wrt, base, reg(), Probe::Adjoint);
    REQUIRE(fwd.rows == adj.rows);
    REQUIRE(fwd.cols == adj.cols);
    bool equal = true;
    for (size_t i = 0; i < fwd.rows; ++i)
      for (size_t j = 0; j < fwd.cols; ++j) equal = equal && fwd.at(i, j) == adj.at(i, j);
    CHECK_MESSAGE(equal, entry.name);
  }
}

TEST_CASE("the dimension guard rail trips") {
  SourceProgram p = load_program("identity");
  Env<Rational> base = random_env<Rational>(p, {{"n", 80}}, 1);
  CHECK_THROWS_AS(jacobian_by_probing(p, {"x"}, base, reg(), Probe::Forward), Error);
}

TEST_CASE("finite differences on x*x at 3 give 6") {
  SourceProgram p = parse_program("input x : real; x * x");
  Env<double> base;
  base.values["x"] = Value<double>::number(3.0);
  std::vector<double> g = finite_diff_gradient(p, {"x"}, base, reg(), 1e-5);
  REQUIRE(g.size() == 1);
  CHECK(rel_err(g[0], 6.0) < 1e-9);
}

TEST_CASE("finite differences of a constant function vanish") {
  SourceProgram p = parse_program("size n; input x : [n]real; 5 + 1");
  Env<double> base = random_env<double>(p, {{"n", 3}}, 2);
  std::vector<double> g = finite_diff_gradient(p, {"x"}, base, reg(), 1e-5);
  for (double v : g) CHECK(std::fabs(v) < 1e-9);
}

TEST_CASE("finite differences reject non-scalar outputs") {
  SourceProgram p = load_program("identity");
  Env<double> base = random_env<double>(p, {{"n", 3}}, 2);
  try {
    finite_diff_gradient(p, {"x"}, base, reg(), 1e-5);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonScalarOutput);
  }
}

TEST_CASE("universal property of the zero program") {
  SourceProgram p = parse_program("size n; input x : [n]real; gen i:n. [false] * x[i]");
  IdxEnv sizes;
  sizes.ints["n"] = 3;
  UniversalReport rep = check_universal_property<Rational>(p, {"x"}, 10, 3, reg(), sizes);
  CHECK(rep.pass);
}

TEST_CASE("universal check is seeded and reproducible") {
  SourceProgram p = load_program("dot");
  IdxEnv sizes;
  sizes.ints["n"] = 4;
  UniversalReport a = check_universal_property<double>(p, {"x", "y"}, 20, 42, reg(), sizes);
  UniversalReport b = check_universal_property<double>(p, {"x", "y"}, 20, 42, reg(), sizes);
  CHECK(a.max_rel_err == b.max_rel_err);
  CHECK(a.pass);
}
