#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <thread>

#include "helpers.hpp"

using namespace atl;
using namespace atl::testing;

namespace {

TypeEnv basic_env() {
  TypeEnv env;
  env.size_vars = {"n", "m"};
  env.vars.emplace("x", Type::tensor(SizeExpr::variable("n"), Type::scalar()));
  env.vars.emplace("z", Type::tensor(SizeExpr::variable("n"), Type::scalar()));
  env.vars.emplace("s", Type::scalar());
  env.functions = reg().arities();
  return env;
}

}  // namespace

TEST_CASE("hash consing gives pointer identity for equal terms") {
  ExprPtr a = e_add(e_var("x"), e_const(Rational(1)));
  ExprPtr b = e_add(e_var("x"), e_const(Rational(1)));
  CHECK(a.get() == b.get());
  ExprPtr c = e_add(e_const(Rational(1)), e_var("x"));
  CHECK(a.get() != c.get());
}

TEST_CASE("typecheck identity map over a vector") {
  TypeEnv env = basic_env();
  ExprPtr e = e_gen("i", IndexExpr::variable("n"),
                    e_access(e_var("x"), IndexExpr::variable("i")));
  TypeMap tm = typecheck(e, env);
  CHECK(tm.at(e) == Type::tensor(SizeExpr::variable("n"), Type::scalar()));
}

TEST_CASE("typecheck eye as [n][n]real") {
  TypeEnv env = basic_env();
  ExprPtr body = e_guard(Pred::cmp(CmpOp::Eq, IndexExpr::variable("i"), IndexExpr::variable("j")),
                         e_var("s"));
  ExprPtr e = e_gen("i", IndexExpr::variable("n"),
                    e_gen("j", IndexExpr::variable("n"), body));
  TypeMap tm = typecheck(e, env);
  Type want = Type::tensor(SizeExpr::variable("n"),
                           Type::tensor(SizeExpr::variable("n"), Type::scalar()));
  CHECK(tm.at(e) == want);
}

TEST_CASE("typecheck rejects addition of pairs") {
  TypeEnv env = basic_env();
  ExprPtr e = e_add(e_tuple(e_var("s"), e_var("s")), e_var("s"));
  try {
    typecheck(e, env);
    CHECK(false);
  } catch (const Error& err) {
    CHECK(err.code() == Errc::TypeMismatch);
  }
}

TEST_CASE("typecheck errors") {
  TypeEnv env = basic_env();
  CHECK_THROWS_AS(typecheck(e_var("nope"), env), Error);
  CHECK_THROWS_AS(typecheck(e_call("exp", {e_var("s"), e_var("s")}), env), Error);
  CHECK_THROWS_AS(typecheck(e_call("mystery", {e_var("s")}), env), Error);
  ExprPtr bad = e_gen("i", IndexExpr::variable("n"),
                      e_gen("j", IndexExpr::variable("i"), e_var("s")));
  CHECK_THROWS_AS(typecheck(bad, env), Error);
}

TEST_CASE("substitute: variable replacement and beta step") {
  ExprPtr e = substitute_var(e_var("x"), "x", e_var("y"));
  CHECK(e.get() == e_var("y").get());

  ExprPtr body = e_access(e_var("x"), IndexExpr::variable("i"));
  IndexExpr a = IndexExpr::variable("k") + IndexExpr::constant(1);
  ExprPtr stepped = substitute_idx(body, "i", a);
  CHECK(stepped.get() == e_access(e_var("x"), a).get());
}

TEST_CASE("substitution avoids capture under binders") {
  ExprPtr body = e_add(e_var("x"), e_access(e_var("z"), IndexExpr::variable("i")));
  ExprPtr e = e_gen("i", IndexExpr::variable("n"), body);
  ExprPtr repl = e_access(e_var("y"), IndexExpr::variable("i"));
  ExprPtr out = substitute_var(e, "x", repl);
  CHECK(out->kind == ExprKind::Gen);
  CHECK(out->name != "i");
  auto free = free_index_vars(out);
  CHECK(free.count("i"));
}

TEST_CASE("substitution lemma on random environments") {
  SourceProgram p = parse_program(
      "size n;\n"
      "input x : [n]real;\n"
      "input y : [n]real;\n"
      "sum i:n. x[i] * (y[i] + x[i])");
  TypeEnv env = p.type_env(reg().arities());
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Env<Rational> renv = random_env<Rational>(p, {{"n", 4}}, seed);
    ExprPtr v = e_gen("k", IndexExpr::variable("n"), e_const(Rational(3, 2)));
    ExprPtr substituted = substitute_var(p.body, "x", v);
    TypeMap tm1 = typecheck(substituted, env);
    Env<Rational> e1 = renv;
    e1.values.erase("x");
    Value<Rational> lhs = eval(substituted, e1, tm1);

    TypeMap tm2 = typecheck(p.body, env);
    Env<Rational> e2 = renv;
    std::vector<Value<Rational>> elems(4, Value<Rational>::number(Rational(3, 2)));
    e2.values["x"] = Value<Rational>::array(elems);
    Value<Rational> rhs = eval(p.body, e2, tm2);
    CHECK(lhs == rhs);
  }
}

TEST_CASE("canonicalize renames index binders by first occurrence") {
  ExprPtr e = e_gen("k", IndexExpr::variable("n"),
                    e_gen("m2", IndexExpr::variable("n"),
                          e_guard(Pred::cmp(CmpOp::Eq, IndexExpr::variable("k"),
                                            IndexExpr::variable("m2")),
                                  e_var("s"))));
  ExprPtr c = canonicalize(e);
  CHECK(c->name == "i0");
  CHECK(c->kid(0)->name == "i1");
  CHECK(canonicalize(c).get() == c.get());
}

TEST_CASE("canonicalize orders simple additions") {
  ExprPtr e = e_add(e_var("X2"), e_var("X1"));
  ExprPtr c = canonicalize(e);
  CHECK(c->kid(0)->name == "X1");
  CHECK(c->kid(1)->name == "X2");
  CHECK(canonicalize(c).get() == c.get());
}

TEST_CASE("canonicalize preserves evaluation and cost") {
  SourceProgram p = load_program("sos_loss");
  TypeEnv env = p.type_env(reg().arities());
  ExprPtr c = canonicalize(p.body);
  SourceProgram q = p.with_body(c);
  for (uint64_t seed = 1; seed <= 5; ++seed)
    CHECK(eval_equal<Rational>(p, q, {{"n", 3}, {"m", 2}}, seed));
  TypeMap tp = typecheck(p.body, env);
  TypeMap tq = typecheck(c, env);
  ExprPtr pb = desugar_guarded_access(p.body, tp);
  ExprPtr qb = desugar_guarded_access(c, tq);
  IdxEnv ienv = make_idx_env(p, {{"n", 3}, {"m", 2}});
  IdxEnv ienv2 = ienv;
  CHECK(cost(pb, ienv).total() == cost(qb, ienv2).total());
}

TEST_CASE("alpha uniquify keeps evaluation, renames binders apart") {
  SourceProgram p = load_program("diag_trace");
  std::set<std::string> avoid;
  all_names(p.body, avoid);
  NameGen ng(avoid);
  ExprPtr renamed = alpha_uniquify(p.body, ng);
  SourceProgram q = p.with_body(renamed);
  for (uint64_t seed = 1; seed <= 3; ++seed)
    CHECK(eval_equal<Rational>(p, q, {{"N", 4}}, seed));
}

TEST_CASE("type size follows the $ rules") {
  auto n4 = [](const std::string&) { return 4LL; };
  CHECK(type_size(Type::scalar(), n4) == 1);
  Type vec = Type::tensor(SizeExpr::variable("n"), Type::scalar());
  CHECK(type_size(vec, n4) == 4);
  CHECK(type_size(Type::pair(vec, Type::scalar()), n4) == 5);
  CHECK(type_size(Type::tensor(SizeExpr::variable("n"), vec), n4) == 16);
}

TEST_CASE("terms and passes are safe to use from concurrent threads") {
  // The hash-cons table is the one shared structure; hammer it from several
  // threads while running whole pipelines.
  std::vector<std::thread> workers;
  std::atomic<int> failures{0};
  for (int t = 0; t < 4; ++t) {
    workers.emplace_back([t, &failures] {
      try {
        for (int rep = 0; rep < 5; ++rep) {
          SourceProgram p = load_program(rep % 2 ? "sos_loss" : "matmul");
          TypeEnv env = p.type_env(reg().arities());
          SSAProgram ssa = to_ssa_pipeline(p, env);
          Sizes sizes = rep % 2 ? Sizes{{"n", 3}, {"m", 2}}
                                : Sizes{{"n", 2}, {"m", 3}, {"p", 2}};
          Env<Rational> renv =
              random_env<Rational>(p, sizes, static_cast<uint64_t>(t * 10 + rep));
          Env<Rational> renv2 = renv;
          Value<Rational> a = eval_program(p, renv, reg());
          Value<Rational> b = eval_program(ssa.to_program(), renv2, reg());
          if (!(a == b)) failures++;
        }
      } catch (...) {
        failures++;
      }
    });
  }
  for (auto& w : workers) w.join();
  CHECK(failures == 0);
}
