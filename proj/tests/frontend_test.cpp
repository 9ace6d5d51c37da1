#include <doctest.h>

#include "helpers.hpp"

using namespace atl;
using namespace atl::testing;

TEST_CASE("parse builds the convolution AST") {
  SourceProgram p = parse_program(
      "size n, m;\n"
      "input x : [n+m-1]real;\n"
      "input c : [m]real;\n"
      "gen i:n. sum j:m. x[i-j] * c[j]");
  CHECK(p.size_vars == std::vector<std::string>{"n", "m"});
  REQUIRE(p.inputs.size() == 2);
  CHECK(p.inputs[0].second ==
        Type::tensor(SizeExpr::variable("n") + SizeExpr::variable("m") - SizeExpr::constant(1),
                     Type::scalar()));
  REQUIRE(p.body->kind == ExprKind::Gen);
  const ExprPtr& s = p.body->kid(0);
  REQUIRE(s->kind == ExprKind::Sum);
  const ExprPtr& mul = s->kid(0);
  REQUIRE(mul->kind == ExprKind::Mul);
  CHECK(mul->kid(0)->kind == ExprKind::Access);
  CHECK(mul->kid(0)->idx == IndexExpr::variable("i") - IndexExpr::variable("j"));
}

TEST_CASE("empty input is a syntax error") {
  CHECK_THROWS_AS(parse_program(""), SyntaxError);
}

TEST_CASE("syntax errors carry positions") {
  try {
    parse_program("input x : real;\nx +");
    CHECK(false);
  } catch (const SyntaxError& e) {
    CHECK(e.pos().line == 2);
  }
}

TEST_CASE("duplicate bindings are rejected") {
  auto dup = [](const std::string& text) {
    try {
      parse_program(text);
      return false;
    } catch (const Error& e) {
      return e.code() == Errc::DuplicateBinding;
    }
  };
  CHECK(dup("size n; input n : real; n"));
  CHECK(dup("input x : real; let x = 1 in x"));
  CHECK(dup("size n; input x : [n]real; gen i:n. sum i:n. x[i]"));
  // sibling scopes may reuse an index name
  CHECK_NOTHROW(parse_program("size n; input x : [n]real; (sum i:n. x[i]) + (sum i:n. x[i])"));
}

TEST_CASE("lower bounds desugar to 0-based iteration with an offset") {
  SourceProgram p = parse_program(
      "size n;\n"
      "input x : [n+2]real;\n"
      "gen k:-1..n+1. x[k+1]");
  REQUIRE(p.body->kind == ExprKind::Gen);
  CHECK(p.body->idx == SizeExpr::variable("n") + SizeExpr::constant(2));
  // body was [k -> k + -1]: x[(k-1)+1] = x[k]
  CHECK(p.body->kid(0)->idx == IndexExpr::variable("k"));
}

TEST_CASE("rational and decimal literals parse exactly") {
  SourceProgram p = parse_program("input x : real; 3/4 * x + 2.5e-1");
  const ExprPtr& add = p.body;
  REQUIRE(add->kind == ExprKind::Add);
  CHECK(add->kid(0)->kid(0)->value == Rational(3, 4));
  CHECK(add->kid(1)->value == Rational(1, 4));
}

TEST_CASE("indicator prints compactly") {
  SourceProgram p = parse_program("size n; input x : real; gen i:n. gen j:n. [i = j] * x");
  CHECK(print_expr(p.body->kid(0)->kid(0)) == "[i = j] * x");
}

TEST_CASE("subtraction round-trips as addition of a negated term") {
  SourceProgram p = parse_program("input a : real; input b : real; a - b");
  REQUIRE(p.body->kind == ExprKind::Add);
  REQUIRE(p.body->kid(1)->kind == ExprKind::Mul);
  CHECK(p.body->kid(1)->kid(0)->value == Rational(-1));
  std::string text = print_program(p);
  SourceProgram q = parse_program(text);
  CHECK(q.body.get() == p.body.get());
}

TEST_CASE("guarded access sugar parses and desugars") {
  SourceProgram p = parse_program("size n; input x : [n]real; gen i:n. x[i+1]?");
  REQUIRE(p.body->kid(0)->kind == ExprKind::GuardedAccess);
  TypeEnv env = p.type_env();
  TypeMap tm = typecheck(p.body, env);
  ExprPtr desugared = desugar_guarded_access(p.body, tm);
  REQUIRE(desugared->kid(0)->kind == ExprKind::Guard);
  CHECK(desugared->kid(0)->kid(0)->kind == ExprKind::Access);
}

TEST_CASE("parse-print-parse is the identity on the corpus") {
  for (const auto& entry : corpus()) {
    SourceProgram p = load_program(entry.name);
    std::string text = print_program(p);
    SourceProgram q = parse_program(text);
    CHECK_MESSAGE(q.body.get() == p.body.get(), entry.name, ": ", text);
    CHECK(q.inputs == p.inputs);
    CHECK(q.size_vars == p.size_vars);
    // and printing again is stable
    CHECK(print_program(q) == text);
  }
}

TEST_CASE("printing normalized and SSA programs round-trips") {
  for (const auto& entry : corpus()) {
    SourceProgram p = load_program(entry.name);
    TypeEnv env = p.type_env(reg().arities());
    TypeMap tm = typecheck(p.body, env);
    SourceProgram d = p.with_body(desugar_guarded_access(p.body, tm));
    SSAProgram ssa = to_ssa_pipeline(d, env);
    SourceProgram sp = ssa.to_program();
    std::string text = print_program(sp);
    SourceProgram q = parse_program(text);
    CHECK_MESSAGE(q.body.get() == sp.body.get(), entry.name, ": ssa round-trip");
  }
}

TEST_CASE("predicates with existentials print re-parseably") {
  SourceProgram p = parse_program(
      "size n;\n"
      "input x : [n]real;\n"
      "sum i:n. [(exists k:n. k = i and k < 3) or i = 0] * x[i]");
  std::string text = print_program(p);
  SourceProgram q = parse_program(text);
  CHECK(q.body.get() == p.body.get());
}

TEST_CASE("golden files: canonical SSA prints are stable") {
  for (const auto& entry : corpus()) {
    SourceProgram p = load_program(entry.name);
    TypeEnv env = p.type_env(reg().arities());
    TypeMap tm = typecheck(p.body, env);
    SourceProgram d = p.with_body(desugar_guarded_access(p.body, tm));
    SSAProgram ssa = to_ssa_pipeline(d, env);
    std::string got = print_program(ssa.to_program());
    std::string want = read_file(corpus_dir() + "/golden/" + entry.name + ".ssa.atl");
    CHECK_MESSAGE(got == want, entry.name, ": golden SSA drifted");
  }
}

TEST_CASE("golden files: reference evaluations") {
  struct Golden {
    std::string name;
    Sizes sizes;
  };
  for (const auto& g : {Golden{"conv", {{"n", 3}, {"m", 2}}}, Golden{"trace_eye", {{"n", 2}}},
                        Golden{"relation_mask", {{"n", 3}}}}) {
    SourceProgram p = load_program(g.name);
    // values mirror corpus/inputs/<name>.json
    Env<Rational> env;
    for (const auto& [k, v] : g.sizes) env.idx.ints[k] = v;
    if (g.name == "conv") {
      std::vector<Value<Rational>> x, c;
      for (long long v : {1, 2, 3, 4}) x.push_back(Value<Rational>::number(Rational(v)));
      for (long long v : {10, 20}) c.push_back(Value<Rational>::number(Rational(v)));
      env.values["x"] = Value<Rational>::array(x);
      env.values["c"] = Value<Rational>::array(c);
      Value<Rational> out = eval_program(p, env, reg());
      std::string got = "[";
      for (size_t i = 0; i < out.kids.size(); ++i)
        got += (i ? "," : "") + out.kids[i].num.str();
      got += "]";
      CHECK(got + "\n" == read_file(corpus_dir() + "/golden/conv.eval.json"));
    } else if (g.name == "trace_eye") {
      env.values["x"] = Value<Rational>::number(Rational(3));
      Value<Rational> out = eval_program(p, env, reg());
      CHECK(out.num.str() + "\n" == read_file(corpus_dir() + "/golden/trace_eye.eval.json"));
    } else {
      std::vector<Value<Rational>> x;
      for (long long v : {1, 2, 3}) x.push_back(Value<Rational>::number(Rational(v)));
      env.values["x"] = Value<Rational>::array(x);
      RelTable t;
      t.arity = 2;
      t.rows = {{0, 1}, {1, 2}, {2, 2}};
      env.idx.relations["R"] = t;
      Value<Rational> out = eval_program(p, env, reg());
      CHECK(out.num.str() + "\n" ==
            read_file(corpus_dir() + "/golden/relation_mask.eval.json"));
    }
  }
}
