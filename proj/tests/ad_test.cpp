#include <doctest.h>

#include "helpers.hpp"

using namespace atl;
using namespace atl::testing;

namespace {

std::string deadcode_text(int len) {
  std::string s = "input x : real;\n";
  for (int i = 0; i < len; ++i) s += "let t" + std::to_string(i) + " = x in\n";
  return s + "2 * x";
}

const CorpusEntry& entry_of(const std::string& name) {
  for (const auto& e : corpus())
    if (e.name == name) return e;
  throw std::runtime_error("no corpus entry " + name);
}

}  // namespace

TEST_CASE("forward derivative of convolution is the dx stencil") {
  SourceProgram p = load_program("conv");
  ForwardProgram fp = forward_of_program(p, {"x"}, reg());
  SourceProgram want = parse_program(
      "size n, m;\n"
      "input dx : [n+m-1]real;\n"
      "input c : [m]real;\n"
      "gen i:n. sum j:m. dx[i-j+m-1] * c[j]");
  CHECK(structural_key(fp.program.body) == structural_key(want.body));
}

TEST_CASE("forward derivative of a constant is zero") {
  SourceProgram p = parse_program("input x : real; 7/2");
  ForwardProgram fp = forward_of_program(p, {"x"}, reg());
  CHECK(fp.program.body->kind == ExprKind::Const);
  CHECK(fp.program.body->value == Rational(0));
}

TEST_CASE("forward derivative of x*x is dx*x + x*dx and doubles") {
  SourceProgram p = parse_program("input x : real; x * x");
  ForwardProgram fp = forward_of_program(p, {"x"}, reg());
  REQUIRE(fp.program.body->kind == ExprKind::Add);
  Env<double> env;
  env.values["x"] = Value<double>::number(3.0);
  env.values[fp.wrt[0].second] = Value<double>::number(1.0);
  double got = eval_program(fp.program, env, reg()).num;
  CHECK(rel_err(got, 6.0) < 1e-12);
}

TEST_CASE("forward derivative is linear in the differential") {
  SourceProgram p = load_program("sos_loss");
  ForwardProgram fp = forward_of_program(p, {"x"}, reg());
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Env<Rational> env = random_env<Rational>(fp.program, {{"n", 3}, {"m", 2}}, seed);
    Value<Rational> v1 = eval_program(fp.program, env, reg());
    Env<Rational> env2 = env;
    auto flat = flatten(env.values.at(fp.wrt[0].second));
    for (auto& r : flat) r = r * Rational(5, 3);
    env2.values[fp.wrt[0].second] =
        unflatten(*fp.program.input_type(fp.wrt[0].second), env.idx, flat);
    Value<Rational> v2 = eval_program(fp.program, env2, reg());
    CHECK(v2.num == v1.num * Rational(5, 3));
  }
}

TEST_CASE("adjoint of convolution equals the correlation program exactly") {
  SourceProgram conv = load_program("conv");
  SourceProgram corr = load_program("correlation");
  AdjointProgram adj = adjoint_of_program(conv, {"x"}, reg());
  for (Sizes sizes : {Sizes{{"n", 3}, {"m", 2}}, Sizes{{"n", 4}, {"m", 3}}}) {
    for (uint64_t seed = 1; seed <= 5; ++seed) {
      Env<Rational> env = random_env<Rational>(conv, sizes, seed);
      Rng rng(seed * 101);
      Value<Rational> dy = random_rational_value(
          Type::tensor(SizeExpr::variable("n"), Type::scalar()), env.idx, rng);
      Env<Rational> aenv = env;
      aenv.values[adj.dy] = dy;
      Value<Rational> got = eval_program(adj.program, aenv, reg());
      Env<Rational> cenv;
      cenv.idx = env.idx;
      cenv.values["dy"] = dy;
      cenv.values["c"] = env.values["c"];
      Value<Rational> want = eval_program(corr, cenv, reg());
      CHECK(got == want);
    }
  }
}

TEST_CASE("adjoint of trace is eye and adjoint of eye is trace") {
  SourceProgram trace = load_program("trace");
  AdjointProgram adj_trace = adjoint_of_program(trace, {"A"}, reg());
  Env<Rational> env;
  env.idx.ints["n"] = 3;
  env.values["A"] = zero_of<Rational>(
      Type::tensor(SizeExpr::variable("n"),
                   Type::tensor(SizeExpr::variable("n"), Type::scalar())),
      env.idx);
  env.values[adj_trace.dy] = Value<Rational>::number(Rational(5));
  Value<Rational> m = eval_program(adj_trace.program, env, reg());
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(m.kids[i].kids[j].num == (i == j ? Rational(5) : Rational(0)));

  SourceProgram eye = load_program("eye");
  AdjointProgram adj_eye = adjoint_of_program(eye, {"x"}, reg());
  Env<Rational> env2;
  env2.idx.ints["n"] = 3;
  env2.values["x"] = Value<Rational>::number(Rational(0));
  Rng rng(11);
  Value<Rational> dA = random_rational_value(
      Type::tensor(SizeExpr::variable("n"),
                   Type::tensor(SizeExpr::variable("n"), Type::scalar())),
      env2.idx, rng);
  env2.values[adj_eye.dy] = dA;
  Value<Rational> got = eval_program(adj_eye.program, env2, reg());
  Rational want(0);
  for (int i = 0; i < 3; ++i) want += dA.kids[i].kids[i].num;
  CHECK(got.num == want);
}

TEST_CASE("linear DAG adjoint reproduces the hand-computed listing") {
  SourceProgram p = load_program("dag_linear");
  AdjointProgram adj = adjoint_of_program(p, {"x", "y"}, reg());
  Env<Rational> env;
  env.values["x"] = Value<Rational>::number(Rational(0));
  env.values["y"] = Value<Rational>::number(Rational(0));
  env.values[adj.dy] = Value<Rational>::pair(Value<Rational>::number(Rational(1)),
                                             Value<Rational>::number(Rational(1)));
  Value<Rational> v = eval_program(adj.program, env, reg());
  REQUIRE(v.is_pair());
  CHECK(v.kids[0].num == Rational(54));
  CHECK(v.kids[1].num == Rational(33));
}

TEST_CASE("adjoint output is a valid SSA program") {
  for (const auto& entry : corpus()) {
    SourceProgram p = load_program(entry.name);
    AdjointProgram adj = adjoint_of_program(p, entry.wrt, reg());
    Validation v = validate_ssa(adj.program.body, adj.program);
    CHECK_MESSAGE(v.ok, entry.name, ": ", v.message);
  }
}

TEST_CASE("dead code costs nothing to differentiate") {
  long long expected = -1;
  for (int len : {4, 16, 64}) {
    SourceProgram p = parse_program(deadcode_text(len));
    AdjointProgram adj = adjoint_of_program(p, {"x"}, reg());
    IdxEnv env;
    long long c = cost(adj.program.body, env).total();
    if (expected < 0) expected = c;
    CHECK(c == expected);
  }
}

TEST_CASE("skipped-index sum: adjoint cost grows linearly") {
  SourceProgram p = load_program("skipped_sum");
  AdjointProgram adj = adjoint_of_program(p, {"x"}, reg());
  std::vector<long long> costs;
  for (long long n : {4, 8, 16, 32}) {
    IdxEnv env;
    env.ints["n"] = n;
    costs.push_back(cost(adj.program.body, env).total());
  }
  for (size_t i = 1; i < costs.size(); ++i) {
    CHECK(costs[i] <= 2 * costs[i - 1] + 8);
    CHECK(costs[i] >= costs[i - 1]);
  }
}

TEST_CASE("forward cost theorem: cost(D e) <= 4 cost(e) in SSA form") {
  for (const auto& entry : corpus()) {
    SourceProgram p = load_program(entry.name);
    TypeEnv env = p.type_env(reg().arities());
    TypeMap tm = typecheck(p.body, env);
    SourceProgram d = p.with_body(desugar_guarded_access(p.body, tm));
    SSAProgram ssa = to_ssa_pipeline(d, env);
    for (const auto& sizes : entry.size_sets) {
      IdxEnv ienv = make_idx_env(p, sizes);
      CostBound b = forward_cost_check(ssa, entry.wrt, reg(), ienv);
      CHECK_MESSAGE(b.holds, entry.name, ": fwd ", b.derived, " > 4*", b.base);
    }
  }
}

TEST_CASE("adjoint cost theorem: io(adjoint) <= 4 io(e)") {
  for (const auto& entry : corpus()) {
    SourceProgram p = load_program(entry.name);
    TypeEnv env = p.type_env(reg().arities());
    TypeMap tm = typecheck(p.body, env);
    SourceProgram d = p.with_body(desugar_guarded_access(p.body, tm));
    SSAProgram ssa = to_ssa_pipeline(d, env);
    for (const auto& sizes : entry.size_sets) {
      IdxEnv ienv = make_idx_env(p, sizes);
      CostBound b = adjoint_cost_check(ssa, entry.wrt, reg(), ienv);
      CHECK_MESSAGE(b.holds, entry.name, ": adj ", b.derived, " > 4*", b.base);
    }
  }
}

TEST_CASE("every adjoint rewrite step preserves the desugared value") {
  for (const std::string name : {"conv", "trace_eye", "dag_linear", "skipped_sum"}) {
    SourceProgram p = load_program(name);
    TypeEnv env = p.type_env(reg().arities());
    SSAProgram ssa = to_ssa_pipeline(p, env);

    std::vector<AdjointState> states;
    AdjointOptions opts;
    opts.observer = [&](const AdjointState& s) { states.push_back(s); };
    adjoint_deriv(ssa, {p.inputs[0].first}, reg(), opts);
    REQUIRE(states.size() >= 2);

    Sizes sizes = {{"n", 3}, {"m", 2}};
    for (uint64_t seed = 1; seed <= 2; ++seed) {
      Env<Rational> base = random_env<Rational>(p, sizes, seed);
      Rng rng(seed * 31 + 7);
      Type out_t = ssa.output_type();
      Value<Rational> dy = random_rational_value(out_t, base.idx, rng);
      Value<Rational> dx =
          random_rational_value(*p.input_type(p.inputs[0].first), base.idx, rng);

      std::optional<Value<Rational>> first;
      for (const auto& st : states) {
        ExprPtr desugared = desugar_inner(st, reg());
        TypeEnv tenv2;
        for (const auto& s : p.size_vars) tenv2.size_vars.insert(s);
        for (const auto& [r, a] : p.relations) tenv2.relations.emplace(r, a);
        for (const auto& [x, t] : st.inputs) tenv2.vars.emplace(x, t);
        tenv2.vars.emplace(st.sigma.at(p.inputs[0].first),
                           *p.input_type(p.inputs[0].first));
        tenv2.functions = reg().arities();
        TypeMap tm2 = typecheck(desugared, tenv2);
        Env<Rational> env2 = base;
        env2.values[st.dy] = dy;
        env2.values[st.sigma.at(p.inputs[0].first)] = dx;
        Value<Rational> v = eval(desugared, env2, tm2);
        if (!first)
          first = v;
        else
          CHECK_MESSAGE(v == *first, name, ": state desugar changed value");
      }
    }
  }
}

TEST_CASE("extended cost never increases across main-loop rewrites") {
  for (const std::string name : {"conv", "trace_eye", "dag_linear", "matmul", "skipped_sum"}) {
    SourceProgram p = load_program(name);
    TypeEnv env = p.type_env(reg().arities());
    SSAProgram ssa = to_ssa_pipeline(p, env);
    std::vector<AdjointState> states;
    AdjointOptions opts;
    opts.observer = [&](const AdjointState& s) { states.push_back(s); };
    adjoint_deriv(ssa, {p.inputs[0].first}, reg(), opts);

    Sizes sizes = {{"n", 3}, {"m", 3}, {"p", 2}};
    IdxEnv ienv = make_idx_env(p, sizes);
    long long prev = -1;
    for (const auto& st : states) {
      IdxEnv e2 = ienv;
      long long c = cost_extended(st, e2, reg()).total();
      if (prev >= 0) CHECK_MESSAGE(c <= prev, name, ": ledger increased ", prev, " -> ", c);
      prev = c;
    }
  }
}

TEST_CASE("inner products keep zero-cost left sides") {
  SourceProgram p = load_program("sos_loss");
  TypeEnv env = p.type_env(reg().arities());
  SSAProgram ssa = to_ssa_pipeline(p, env);
  AdjointOptions opts;
  IdxEnv ienv = make_idx_env(p, {{"n", 3}, {"m", 2}});
  opts.observer = [&](const AdjointState& st) {
    for (const auto& prod : st.body) {
      IdxEnv e2 = ienv;
      CHECK(cost(prod.left, e2).total() == 0);
    }
  };
  adjoint_deriv(ssa, {"x"}, reg(), opts);
}

TEST_CASE("gradient of a loss matches central differences") {
  for (const std::string name : {"sos_loss", "exp_loss", "batched_loss"}) {
    SourceProgram p = load_program(name);
    const CorpusEntry& entry = entry_of(name);
    AdjointProgram adj = adjoint_of_program(p, entry.wrt, reg());
    Env<double> base = random_env<double>(p, entry.size_sets[0], 99);
    std::vector<double> fd = finite_diff_gradient(p, entry.wrt, base, reg(), 1e-5);
    Env<double> aenv = base;
    aenv.values[adj.dy] = Value<double>::number(1.0);  // gradient = adjoint at seed 1
    std::vector<double> grad = flatten(eval_program(adj.program, aenv, reg()));
    REQUIRE(grad.size() == fd.size());
    for (size_t i = 0; i < grad.size(); ++i)
      CHECK_MESSAGE(rel_err(grad[i], fd[i]) < 1e-4, name, " coord ", i);
  }
}

TEST_CASE("universal property holds exactly for polynomial programs") {
  for (const std::string name : {"conv", "matmul", "cubic", "relation_mask", "pair_swap"}) {
    const CorpusEntry& entry = entry_of(name);
    SourceProgram p = load_program(name);
    IdxEnv sizes = make_idx_env(p, entry.size_sets[0]);
    UniversalReport rep =
        check_universal_property<Rational>(p, entry.wrt, 25, 1234, reg(), sizes);
    CHECK_MESSAGE(rep.pass, name);
  }
}

TEST_CASE("universal property within 1e-9 for black-box programs") {
  SourceProgram p = load_program("exp_loss");
  IdxEnv sizes = make_idx_env(p, {{"n", 3}});
  UniversalReport rep = check_universal_property<double>(p, {"x"}, 100, 99, reg(), sizes);
  CHECK(rep.pass);
  CHECK(rep.max_rel_err <= 1e-9);
}

TEST_CASE("hessian-vector products compose the two transforms") {
  SourceProgram p = load_program("cubic");
  AdjointProgram grad = adjoint_of_program(p, {"x"}, reg());
  ForwardProgram hvp = forward_of_program(grad.program, {"x"}, reg());
  Env<double> env;
  env.values["x"] = Value<double>::number(1.5);
  env.values[grad.dy] = Value<double>::number(1.0);
  env.values[hvp.wrt[0].second] = Value<double>::number(2.0);
  double got = eval_program(hvp.program, env, reg()).num;
  CHECK(rel_err(got, 6.0 * 1.5 * 2.0) < 1e-9);
}

TEST_CASE("unregistered black boxes are reported") {
  CHECK_THROWS_AS(reg().at("nosuchfn"), Error);
  SourceProgram p = parse_program("input x : real; mystery(x)");
  CHECK_THROWS_AS(forward_of_program(p, {"x"}, reg()), Error);
}

TEST_CASE("differentiating a non-input is an error") {
  SourceProgram p = load_program("cubic");
  CHECK_THROWS_AS(adjoint_of_program(p, {"zz"}, reg()), Error);
}

TEST_CASE("nested pair inputs: slot tree assembly and zero fill") {
  SourceProgram p = parse_program(
      "size n;\n"
      "input xy : (([n]real, real), [n]real);\n"
      "(sum i:n. (fst (fst xy))[i] * (snd xy)[i]) + snd (fst xy)");
  AdjointProgram adj = adjoint_of_program(p, {"xy"}, reg());
  CHECK(validate_ssa(adj.program.body, adj.program).ok);
  IdxEnv sizes;
  sizes.ints["n"] = 3;
  UniversalReport rep = check_universal_property<Rational>(p, {"xy"}, 20, 5, reg(), sizes);
  CHECK(rep.pass);

  // A program that never touches part of its input: that slot's gradient is
  // the typed zero.
  SourceProgram q = parse_program(
      "size n;\n"
      "input xy : ([n]real, [n]real);\n"
      "sum i:n. (fst xy)[i] * (fst xy)[i]");
  AdjointProgram qadj = adjoint_of_program(q, {"xy"}, reg());
  Env<Rational> env = random_env<Rational>(q, {{"n", 3}}, 4);
  env.values[qadj.dy] = Value<Rational>::number(Rational(1));
  Value<Rational> g = eval_program(qadj.program, env, reg());
  REQUIRE(g.is_pair());
  auto xs = flatten(env.values.at("xy").kids[0]);
  for (int i = 0; i < 3; ++i) {
    CHECK(g.kids[0].kids[i].num == Rational(2) * xs[i]);
    CHECK(g.kids[1].kids[i].num == Rational(0));
  }
  IdxEnv ienv;
  ienv.ints["n"] = 3;
  UniversalReport qr = check_universal_property<Rational>(q, {"xy"}, 20, 6, reg(), ienv);
  CHECK(qr.pass);
}

TEST_CASE("adjoint with several differentiated inputs orders outputs by wrt") {
  SourceProgram p = load_program("matmul");
  AdjointProgram adj = adjoint_of_program(p, {"A", "B"}, reg());
  REQUIRE(adj.wrt.size() == 2);
  CHECK(adj.wrt[0].first == "A");
  CHECK(adj.wrt[1].first == "B");
  IdxEnv sizes;
  sizes.ints["n"] = 2;
  sizes.ints["m"] = 3;
  sizes.ints["p"] = 2;
  UniversalReport rep = check_universal_property<Rational>(p, {"A", "B"}, 20, 7, reg(), sizes);
  CHECK(rep.pass);
}

TEST_CASE("adjoint robustness on awkward program shapes") {
  struct Case {
    std::string text;
    std::vector<std::string> wrt;
    Sizes sizes;
  };
  const std::vector<Case> cases = {
      // output is an input
      {"size n; input x : [n]real; x", {"x"}, {{"n", 3}}},
      // tuple output repeating one binding
      {"size n; input x : [n]real; let t = sum i:n. x[i] in (t, t)", {"x"}, {{"n", 3}}},
      // indicator over a pair at the output
      {"size n; input a : real; input b : real; [0 < n] * (a + b, a * b)",
       {"a", "b"},
       {{"n", 3}}},
      // constant output: gradient is all zeros
      {"input x : real; 5 + 1", {"x"}, {}},
      // output ignores the differentiated input
      {"input x : real; input c : real; c * c", {"x"}, {}},
      // existential predicate in the source
      {"size n; input x : [n]real; sum i:n. [exists k:n. k + k = i] * x[i]", {"x"}, {{"n", 5}}},
      // rank-3 outer product
      {"size n; input x : [n]real; input y : [n][n]real; gen i:n. gen j:n. gen k:n. x[i] * y[j, k]",
       {"x", "y"},
       {{"n", 2}}},
      // scaling by a guarded scalar
      {"size n; input x : [n]real; sum i:n. ([i < 2] * x[i]) * ([0 < i] * x[i])", {"x"},
       {{"n", 4}}},
  };
  for (const auto& c : cases) {
    CAPTURE(c.text);
    SourceProgram p = parse_program(c.text);
    AdjointProgram adj = adjoint_of_program(p, c.wrt, reg());
    CHECK(validate_ssa(adj.program.body, adj.program).ok);
    IdxEnv sizes;
    for (const auto& [k, v] : c.sizes) sizes.ints[k] = v;
    UniversalReport rep = check_universal_property<Rational>(p, c.wrt, 15, 77, reg(), sizes);
    CHECK_MESSAGE(rep.pass, c.text);
    // both cost theorems at these sizes
    TypeEnv env = p.type_env(reg().arities());
    SSAProgram ssa = to_ssa_pipeline(p, env);
    IdxEnv e1 = sizes, e2 = sizes;
    CHECK(forward_cost_check(ssa, c.wrt, reg(), e1).holds);
    CHECK(adjoint_cost_check(ssa, c.wrt, reg(), e2).holds);
  }
}

TEST_CASE("binary black-box primitives differentiate through both arguments") {
  SourceProgram p = parse_program(
      "size n;\n"
      "input x : [n]real;\n"
      "input w : [n]real;\n"
      "sum i:n. atan2(x[i], w[i])");
  IdxEnv sizes;
  sizes.ints["n"] = 3;
  UniversalReport rep = check_universal_property<double>(p, {"x", "w"}, 50, 15, reg(), sizes);
  CHECK(rep.pass);
  CHECK(rep.max_rel_err <= 1e-9);

  AdjointProgram adj = adjoint_of_program(p, {"x", "w"}, reg());
  CHECK(validate_ssa(adj.program.body, adj.program).ok);
  Env<double> base = random_env<double>(p, {{"n", 3}}, 44);
  // keep the base point away from the origin
  for (auto& [k, v] : base.values)
    for (auto& e : v.kids) e.num += e.num > 0 ? 1.0 : -1.0;
  std::vector<double> fd = finite_diff_gradient(p, {"x", "w"}, base, reg(), 1e-5);
  Env<double> aenv = base;
  aenv.values[adj.dy] = Value<double>::number(1.0);
  std::vector<double> grad = flatten(eval_program(adj.program, aenv, reg()));
  REQUIRE(grad.size() == fd.size());
  for (size_t i = 0; i < grad.size(); ++i) CHECK(rel_err(grad[i], fd[i], 1e-8) < 1e-4);

  // a repeated argument funnels both contributions into one differential
  SourceProgram q = parse_program("input a : real; atan2(a, a)");
  IdxEnv none;
  UniversalReport qr = check_universal_property<double>(q, {"a"}, 50, 16, reg(), none);
  CHECK(qr.pass);
}

TEST_CASE("lower-bound binders run through the whole pipeline") {
  SourceProgram p = parse_program(
      "size n, m;\n"
      "input x : [n+m-1]real;\n"
      "input c : [m]real;\n"
      "gen k:-m+1..n. sum j:m. x[k+j]? * c[j]");
  TypeEnv env = p.type_env(reg().arities());
  TypeMap tm = typecheck(p.body, env);
  SourceProgram d = p.with_body(desugar_guarded_access(p.body, tm));
  SSAProgram ssa = to_ssa_pipeline(d, env);
  CHECK(validate_ssa(ssa.to_expr(), p).ok);
  for (uint64_t seed = 1; seed <= 3; ++seed)
    CHECK(eval_equal<Rational>(d, ssa.to_program(), {{"n", 3}, {"m", 2}}, seed));
  IdxEnv sizes;
  sizes.ints["n"] = 3;
  sizes.ints["m"] = 2;
  UniversalReport rep = check_universal_property<Rational>(p, {"x"}, 20, 17, reg(), sizes);
  CHECK(rep.pass);
}

TEST_CASE("golden files: printed derivative programs are stable") {
  struct Golden {
    std::string name, file, mode, wrt;
  };
  for (const auto& g : {Golden{"conv", "conv.adj.atl", "adj", "x"},
                        Golden{"trace", "trace.adj.atl", "adj", "A"},
                        Golden{"conv", "conv.fwd.atl", "fwd", "x"}}) {
    SourceProgram p = load_program(g.name);
    std::string got;
    if (g.mode == "adj")
      got = print_program(adjoint_of_program(p, {g.wrt}, reg()).program);
    else
      got = print_program(forward_of_program(p, {g.wrt}, reg()).program);
    std::string want = read_file(corpus_dir() + "/golden/" + g.file);
    CHECK_MESSAGE(got == want, g.file, ": derivative print drifted");
  }
}
