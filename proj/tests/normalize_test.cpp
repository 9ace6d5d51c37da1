#include <doctest.h>

#include "helpers.hpp"

using namespace atl;
using namespace atl::testing;

namespace {

std::set<std::string> input_names(const SourceProgram& p) {
  std::set<std::string> r;
  for (const auto& [x, t] : p.inputs) r.insert(x);
  return r;
}

struct Stages {
  SourceProgram prog;
  TypeEnv env;
  ExprPtr start, lifted, paired, pushed;
  SSAProgram ssa;
};

Stages run_pipeline(const std::string& name) {
  Stages s;
  s.prog = load_program(name);
  s.env = s.prog.type_env(reg().arities());
  TypeMap tm = typecheck(s.prog.body, s.env);
  s.start = desugar_guarded_access(s.prog.body, tm);
  std::set<std::string> avoid;
  all_names(s.start, avoid);
  for (const auto& [x, t] : s.prog.inputs) avoid.insert(x);
  for (const auto& sz : s.prog.size_vars) avoid.insert(sz);
  NameGen names(avoid);
  ExprPtr alpha = alpha_uniquify(s.start, names);
  s.lifted = let_lift(alpha);
  s.paired = pair_elim(s.lifted, s.env, names);
  s.pushed = gen_pushout(s.paired);
  s.ssa = to_ssa(s.prog.with_body(s.pushed), s.pushed);
  return s;
}

WorkCost cost_in(const ExprPtr& e, IdxEnv env) { return cost(e, env); }

}  // namespace

TEST_CASE("let-lifting hoists a let out of a product") {
  SourceProgram p = parse_program("input a : real; (let t = a + a in t * t) * a");
  std::set<std::string> avoid;
  all_names(p.body, avoid);
  NameGen names(avoid);
  ExprPtr lifted = let_lift(alpha_uniquify(p.body, names));
  REQUIRE(lifted->kind == ExprKind::Let);
  CHECK(lifted->kid(1)->kind == ExprKind::Mul);
  CHECK(validate_let_lifted(lifted).ok);
}

TEST_CASE("let-free input is unchanged by let-lifting") {
  SourceProgram p = load_program("conv");
  std::set<std::string> avoid;
  NameGen names(avoid);
  CHECK(let_lift(p.body).get() == p.body.get());
}

TEST_CASE("let-lifting the batched loss arrayifies the inner binding") {
  Stages s = run_pipeline("batched_loss");
  // expected shape: let r = gen k. gen i. ... in sum k. ...
  REQUIRE(s.lifted->kind == ExprKind::Let);
  CHECK(s.lifted->kid(0)->kind == ExprKind::Gen);      // new batch dimension
  CHECK(s.lifted->kid(0)->kid(0)->kind == ExprKind::Gen);
  CHECK(s.lifted->kid(1)->kind == ExprKind::Sum);
  CHECK(validate_let_lifted(s.lifted).ok);
}

TEST_CASE("pair elimination rejects non-SoA inputs and unlifted terms") {
  SourceProgram aos = parse_program(
      "size n; input x : [n](real, real); sum i:n. fst (x[i])");
  TypeEnv env = aos.type_env();
  NameGen names;
  try {
    pair_elim(aos.body, env, names);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InputNotSoA);
  }
  SourceProgram unlifted = parse_program("input a : real; a * (let t = a in t)");
  TypeEnv env2 = unlifted.type_env();
  try {
    pair_elim(unlifted.body, env2, names);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NotLetLifted);
  }
}

TEST_CASE("pair elimination destructures a pair-typed intermediate") {
  SourceProgram p = parse_program(
      "size n;\n"
      "input x : [n]real;\n"
      "let both = (gen i:n. x[i] + x[i], gen i:n. x[i] * x[i]) in\n"
      "(sum i:n. (fst both)[i]) + (sum i:n. (snd both)[i])");
  TypeEnv env = p.type_env();
  std::set<std::string> avoid;
  all_names(p.body, avoid);
  avoid.insert("x");
  NameGen names(avoid);
  ExprPtr lifted = let_lift(alpha_uniquify(p.body, names));
  ExprPtr paired = pair_elim(lifted, env, names);
  CHECK(validate_pair_free(paired, {"x"}).ok);
  for (uint64_t seed = 1; seed <= 5; ++seed)
    CHECK(eval_equal<Rational>(p, p.with_body(paired), {{"n", 3}}, seed));
}

TEST_CASE("gen pushout applies the beta rule") {
  SourceProgram p = parse_program("size n; input x : [n]real; (gen i:n. x[i] * x[i])[2]");
  ExprPtr pushed = gen_pushout(p.body);
  CHECK(pushed->kind == ExprKind::Mul);
  for (uint64_t seed = 1; seed <= 3; ++seed)
    CHECK(eval_equal<Rational>(p, p.with_body(pushed), {{"n", 4}}, seed));
}

TEST_CASE("gen pushout commutes indicators past gen, including zero shapes") {
  SourceProgram p = parse_program(
      "size n; input x : [n]real; sum k:n. ([k < 2] * (gen i:n. x[i] + x[i]))[k]");
  ExprPtr pushed = gen_pushout(p.body);
  std::set<std::string> inputs = {"x"};
  CHECK(validate_gen_outer(pushed, inputs).ok);
  for (uint64_t seed = 1; seed <= 5; ++seed)
    CHECK(eval_equal<Rational>(p, p.with_body(pushed), {{"n", 4}}, seed));
}

TEST_CASE("already-normal terms are fixed points of gen pushout") {
  SourceProgram p = load_program("conv");
  CHECK(gen_pushout(p.body).get() == p.body.get());
}

TEST_CASE("validators report located violations") {
  SourceProgram p = parse_program("input a : real; a * (let t = a in t)");
  Validation v = validate_let_lifted(p.body);
  CHECK_FALSE(v.ok);
  CHECK(v.where != nullptr);
  SourceProgram q = parse_program("size n; input x : [n]real; gen i:n. (gen j:n. x[j])[i]");
  Validation g = validate_gen_outer(q.body, {"x"});
  CHECK_FALSE(g.ok);
}

TEST_CASE("each pass preserves evaluation and respects cost bounds on the corpus") {
  for (const auto& entry : corpus()) {
    Stages s = run_pipeline(entry.name);
    std::set<std::string> inputs = input_names(s.prog);

    CHECK_MESSAGE(validate_let_lifted(s.lifted).ok, entry.name);
    CHECK_MESSAGE(validate_pair_free(s.paired, inputs).ok, entry.name);
    CHECK_MESSAGE(validate_gen_outer(s.pushed, inputs).ok, entry.name);
    Validation sv = validate_ssa(s.ssa.to_expr(), s.prog);
    CHECK_MESSAGE(sv.ok, entry.name, ": ", sv.message);

    const Sizes& sizes = entry.size_sets[0];
    for (uint64_t seed = 1; seed <= 4; ++seed) {
      SourceProgram base = s.prog.with_body(s.start);
      if (entry.polynomial) {
        CHECK_MESSAGE(
            eval_equal<Rational>(base, s.prog.with_body(s.lifted), sizes, seed), entry.name);
        CHECK_MESSAGE(
            eval_equal<Rational>(base, s.prog.with_body(s.paired), sizes, seed), entry.name);
        CHECK_MESSAGE(
            eval_equal<Rational>(base, s.prog.with_body(s.pushed), sizes, seed), entry.name);
        CHECK_MESSAGE(
            eval_equal<Rational>(base, s.ssa.to_program(), sizes, seed), entry.name);
      } else {
        CHECK_MESSAGE(
            eval_equal<double>(base, s.prog.with_body(s.lifted), sizes, seed, 1e-9), entry.name);
        CHECK_MESSAGE(
            eval_equal<double>(base, s.prog.with_body(s.paired), sizes, seed, 1e-9), entry.name);
        CHECK_MESSAGE(
            eval_equal<double>(base, s.prog.with_body(s.pushed), sizes, seed, 1e-9), entry.name);
        CHECK_MESSAGE(eval_equal<double>(base, s.ssa.to_program(), sizes, seed, 1e-6),
                      entry.name);
      }
    }

    IdxEnv env = make_idx_env(s.prog, sizes);
    long long c0 = cost_in(s.start, env).total();
    long long c1 = cost_in(s.lifted, env).total();
    long long c2 = cost_in(s.paired, env).total();
    long long c3 = cost_in(s.pushed, env).total();
    long long c4 = cost_in(s.ssa.to_expr(), env).total();
    CHECK_MESSAGE(c1 == c0, entry.name, " let_lift cost");
    CHECK_MESSAGE(c2 == c1, entry.name, " pair_elim cost");
    CHECK_MESSAGE(c3 <= c2, entry.name, " gen_pushout cost");
    if (entry.cse_reduces)
      CHECK_MESSAGE(c4 <= c3, entry.name, " to_ssa cost");
    else
      CHECK_MESSAGE(c4 == c3, entry.name, " to_ssa cost");
  }
}

TEST_CASE("passes are idempotent") {
  for (const auto& entry : corpus()) {
    Stages s = run_pipeline(entry.name);
    CHECK(let_lift(s.lifted).get() == s.lifted.get());
    NameGen names2;
    CHECK(pair_elim(s.paired, s.env, names2).get() == s.paired.get());
    CHECK(gen_pushout(s.pushed).get() == s.pushed.get());
    // SSA conversion of an SSA program is alpha-identical
    SSAProgram again = to_ssa(s.ssa.to_program(), s.ssa.to_expr());
    CHECK(structural_key(again.to_expr()) == structural_key(s.ssa.to_expr()));
  }
}

TEST_CASE("SSA bindings all have scalar or tensor-of-scalar types") {
  Stages s = run_pipeline("pair_swap");
  for (const auto& b : s.ssa.bindings) CHECK_FALSE(b.type.contains_pair());
  // and the validator rejects a hand-built alias binding
  SourceProgram alias = parse_program(
      "size n; input x : [n]real; let a = gen i0:n. sum i1:n. [i1 = i0] * x[i1] in let b = a in b");
  Validation v = validate_ssa(alias.body, alias);
  CHECK_FALSE(v.ok);
}
