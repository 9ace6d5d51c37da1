// atlc: compiler driver for the tensor language.
//
// Subcommands: check, eval, cost, normalize, deriv, verify, report.
// Exit codes: 0 success, 1 check failure, 2 usage error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "atl/ad.hpp"
#include "atl/cost.hpp"
#include "atl/normalize.hpp"
#include "atl/oracle.hpp"
#include "atl/program.hpp"
#include "atl/ssa.hpp"

using json = nlohmann::json;
using namespace atl;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SourceProgram load(const std::string& path) { return parse_program(read_file(path)); }

const PrimitiveRegistry& reg() { return PrimitiveRegistry::standard(); }

uint64_t default_seed() {
  if (const char* s = std::getenv("ATLC_SEED")) return std::strtoull(s, nullptr, 10);
  return 20260808;
}

struct SizeArgs {
  std::vector<std::string> raw;
  std::map<std::string, long long> parse() const {
    std::map<std::string, long long> out;
    for (const auto& kv : raw) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw CLI::ValidationError("--size expects name=int");
      out[kv.substr(0, eq)] = std::stoll(kv.substr(eq + 1));
    }
    return out;
  }
};

template <class S>
Value<S> value_from_json(const json& j, const Type& t, const IdxEnv& env) {
  switch (t.kind()) {
    case Type::Kind::Scalar: {
      if (j.is_number()) {
        if constexpr (std::is_same_v<S, double>)
          return Value<S>::number(j.get<double>());
        else {
          if (j.is_number_integer()) return Value<S>::number(Rational(j.get<long long>()));
          fail(Errc::InvalidValue, "exact mode needs integers or \"p/q\" strings");
        }
      }
      if (j.is_string()) {
        std::string s = j.get<std::string>();
        auto slash = s.find('/');
        long long num = std::stoll(s.substr(0, slash));
        long long den = slash == std::string::npos ? 1 : std::stoll(s.substr(slash + 1));
        Rational r(num, den);
        return Value<S>::number(scalar_of<S>(r));
      }
      fail(Errc::InvalidValue, "expected a number");
    }
    case Type::Kind::Pair: {
      if (!j.is_object() || !j.contains("fst") || !j.contains("snd"))
        fail(Errc::InvalidValue, "pair values are {\"fst\": ..., \"snd\": ...}");
      return Value<S>::pair(value_from_json<S>(j["fst"], t.left(), env),
                            value_from_json<S>(j["snd"], t.right(), env));
    }
    case Type::Kind::Tensor: {
      if (!j.is_array()) fail(Errc::InvalidValue, "tensor values are JSON arrays");
      long long n = t.extent().eval([&](const std::string& v) { return env.lookup(v); });
      if (static_cast<long long>(j.size()) != n)
        fail(Errc::InvalidValue, "array length " + std::to_string(j.size()) + ", expected " +
                                     std::to_string(n));
      std::vector<Value<S>> elems;
      for (const auto& e : j) elems.push_back(value_from_json<S>(e, t.elem(), env));
      return Value<S>::array(std::move(elems));
    }
  }
  fail(Errc::Internal, "bad type");
}

template <class S>
json value_to_json(const Value<S>& v) {
  if (v.is_num()) {
    if constexpr (std::is_same_v<S, double>)
      return v.num;
    else
      return v.num.is_integer() ? json(static_cast<long long>(v.num.num()))
                                : json(v.num.str());
  }
  if (v.is_pair())
    return json{{"fst", value_to_json(v.kids[0])}, {"snd", value_to_json(v.kids[1])}};
  json arr = json::array();
  for (const auto& k : v.kids) arr.push_back(value_to_json(k));
  return arr;
}

template <class S>
Env<S> build_env(const SourceProgram& prog, const std::map<std::string, long long>& sizes,
                 const std::string& inputs_path) {
  Env<S> env;
  for (const auto& s : prog.size_vars) {
    auto it = sizes.find(s);
    if (it == sizes.end())
      fail(Errc::UnboundSizeVariable, "size '" + s + "' needs --size " + s + "=...");
    env.idx.ints[s] = it->second;
  }
  json j = json::object();
  if (!inputs_path.empty()) j = json::parse(read_file(inputs_path));
  if (j.contains("_relations")) {
    for (auto& [name, rows] : j["_relations"].items()) {
      RelTable t;
      for (const auto& row : rows) {
        std::vector<long long> tuple;
        for (const auto& v : row) tuple.push_back(v.template get<long long>());
        t.arity = tuple.size();
        t.rows.insert(tuple);
      }
      env.idx.relations[name] = t;
    }
  }
  for (const auto& [x, t] : prog.inputs) {
    if (!j.contains(x)) fail(Errc::UnboundVariable, "input '" + x + "' missing from --inputs file");
    env.values[x] = value_from_json<S>(j[x], t, env.idx);
  }
  for (const auto& [r, arity] : prog.relations)
    if (!env.idx.relations.count(r))
      fail(Errc::MissingRelationTable, "relation '" + r + "' missing from --inputs file");
  return env;
}

json cost_report(const SourceProgram& prog, IdxEnv& env) {
  TypeEnv tenv = prog.type_env(reg().arities());
  TypeMap tm = typecheck(prog.body, tenv);
  ExprPtr body = desugar_guarded_access(prog.body, tm);
  WorkCost c = cost(body, env);
  long long io = c.total() + io_size(prog.input_types(), tm.at(prog.body), env);
  return json{{"schema", 1},
              {"cost", c.total()},
              {"breakdown",
               {{"additions", c.adds}, {"multiplications", c.muls}, {"calls", c.calls}}},
              {"io_cost", io}};
}

bool is_polynomial(const ExprPtr& e) {
  if (e->kind == ExprKind::Call) return false;
  for (const auto& k : e->kids)
    if (!is_polynomial(k)) return false;
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"atlc: tensor-language compiler, interpreter, and differentiator"};
  app.require_subcommand(1);

  std::string file, inputs_path, format = "text", pass = "all", validate, mode = "adj";
  std::string wrt_csv, seed_file, checks_csv = "universal,finite-diff,jacobian,cost";
  std::string corpus_dir = "corpus";
  bool exact = false;
  uint64_t seed = default_seed();
  SizeArgs sizes;

  auto add_common = [&](CLI::App* cmd, bool needs_sizes) {
    cmd->add_option("file", file, "program file (.atl)")->required();
    if (needs_sizes) {
      cmd->add_option("--size", sizes.raw, "size binding name=int (repeatable)")
          ->allow_extra_args(false)
          ->delimiter(',');
      cmd->add_option("--inputs", inputs_path, "JSON file with input values");
      cmd->add_flag("--exact", exact, "exact rational arithmetic");
    }
    cmd->add_option("--format", format, "text|json");
  };

  CLI::App* check = app.add_subcommand("check", "parse and typecheck");
  add_common(check, false);

  CLI::App* evalc = app.add_subcommand("eval", "evaluate under an environment");
  add_common(evalc, true);

  CLI::App* costc = app.add_subcommand("cost", "work cost under an environment");
  add_common(costc, true);

  CLI::App* norm = app.add_subcommand("normalize", "run normalization passes");
  add_common(norm, false);
  norm->add_option("--pass", pass, "let-lift|pair-elim|gen-pushout|ssa|all");
  norm->add_option("--validate", validate, "let-lifted|pair-free|gen-outer|ssa (exit 0/1)");

  CLI::App* deriv = app.add_subcommand("deriv", "differentiate");
  add_common(deriv, true);
  deriv->add_option("--mode", mode, "fwd|adj");
  deriv->add_option("--wrt", wrt_csv, "comma-separated input names")->required();
  deriv->add_option("--seed-file", seed_file, "JSON value for the adjoint seed; also evaluates");

  CLI::App* verify = app.add_subcommand("verify", "oracle checks");
  add_common(verify, true);
  verify->add_option("--wrt", wrt_csv, "comma-separated input names");
  verify->add_option("--checks", checks_csv, "universal,finite-diff,jacobian,cost");
  verify->add_option("--seed", seed, "rng seed (default ATLC_SEED)");

  CLI::App* report = app.add_subcommand("report", "run the shipped corpus and summarize");
  report->add_option("--corpus", corpus_dir, "corpus directory");
  report->add_option("--format", format, "text|json");
  report->add_option("--seed", seed, "rng seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    auto wrt = [&]() {
      std::vector<std::string> out;
      std::stringstream ss(wrt_csv);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
      return out;
    };

    if (app.got_subcommand(check)) {
      SourceProgram prog = load(file);
      TypeEnv env = prog.type_env(reg().arities());
      TypeMap tm = typecheck(prog.body, env);
      if (format == "json")
        std::cout << json{{"schema", 1}, {"type", tm.at(prog.body).str()}}.dump() << "\n";
      else
        std::cout << "ok: " << tm.at(prog.body).str() << "\n";
      return 0;
    }

    if (app.got_subcommand(evalc)) {
      SourceProgram prog = load(file);
      if (exact) {
        Env<Rational> env = build_env<Rational>(prog, sizes.parse(), inputs_path);
        std::cout << value_to_json(eval_program(prog, env, reg())).dump() << "\n";
      } else {
        Env<double> env = build_env<double>(prog, sizes.parse(), inputs_path);
        std::cout << value_to_json(eval_program(prog, env, reg())).dump() << "\n";
      }
      return 0;
    }

    if (app.got_subcommand(costc)) {
      SourceProgram prog = load(file);
      std::map<std::string, long long> sz = sizes.parse();
      IdxEnv ienv;
      for (const auto& s : prog.size_vars) {
        auto it = sz.find(s);
        if (it == sz.end())
          fail(Errc::UnboundSizeVariable, "size '" + s + "' needs --size " + s + "=...");
        ienv.ints[s] = it->second;
      }
      if (!inputs_path.empty()) {
        Env<double> env = build_env<double>(prog, sz, inputs_path);
        ienv = env.idx;
      } else {
        Rng rng(seed ^ 0x5eedD1ce);
        for (const auto& [r, arity] : prog.relations) {
          long long range = 8;
          for (const auto& [k, v] : sz) range = std::max(range, v);
          ienv.relations[r] = random_table(arity, range, rng);
        }
      }
      json r = cost_report(prog, ienv);
      std::cout << (format == "json" ? r.dump() : r.dump(2)) << "\n";
      return 0;
    }

    if (app.got_subcommand(norm)) {
      SourceProgram prog = load(file);
      TypeEnv env = prog.type_env(reg().arities());
      TypeMap tm = typecheck(prog.body, env);
      ExprPtr body = desugar_guarded_access(prog.body, tm);
      std::set<std::string> avoid;
      all_names(body, avoid);
      for (const auto& [x, t] : prog.inputs) avoid.insert(x);
      for (const auto& s : prog.size_vars) avoid.insert(s);
      NameGen names(avoid);
      std::set<std::string> input_names;
      for (const auto& [x, t] : prog.inputs) input_names.insert(x);

      if (!validate.empty()) {
        Validation v;
        if (validate == "let-lifted")
          v = validate_let_lifted(body);
        else if (validate == "pair-free")
          v = validate_pair_free(body, input_names);
        else if (validate == "gen-outer")
          v = validate_gen_outer(body, input_names);
        else if (validate == "ssa")
          v = validate_ssa(body, prog);
        else
          throw CLI::ValidationError("unknown form " + validate);
        if (!v.ok) {
          std::cerr << "violation: " << v.message << "\n";
          if (v.where) std::cerr << "  at: " << print_expr(v.where) << "\n";
          return 1;
        }
        std::cout << "valid\n";
        return 0;
      }

      ExprPtr out = alpha_uniquify(body, names);
      out = let_lift(out);
      if (pass != "let-lift") {
        if (pass == "pair-elim" || pass == "gen-pushout" || pass == "ssa" || pass == "all") {
          out = pair_elim(out, env, names);
          if (pass != "pair-elim") {
            out = gen_pushout(out);
            if (pass == "ssa" || pass == "all")
              out = to_ssa(prog.with_body(out), out).to_expr();
          }
        } else {
          throw CLI::ValidationError("unknown pass " + pass);
        }
      }
      std::cout << print_program(prog.with_body(out));
      return 0;
    }

    if (app.got_subcommand(deriv)) {
      SourceProgram prog = load(file);
      SourceProgram dprog;
      std::string seed_name;
      Type seed_type;
      if (mode == "fwd") {
        ForwardProgram fp = forward_of_program(prog, wrt(), reg());
        dprog = fp.program;
      } else if (mode == "adj") {
        AdjointProgram ap = adjoint_of_program(prog, wrt(), reg());
        dprog = ap.program;
        seed_name = ap.dy;
        for (const auto& [x, t] : dprog.inputs)
          if (x == seed_name) seed_type = t;
      } else {
        throw CLI::ValidationError("mode must be fwd or adj");
      }
      std::cout << print_program(dprog);
      if (!sizes.raw.empty() && prog.relations.empty()) {
        std::map<std::string, long long> sz = sizes.parse();
        IdxEnv e1, e2;
        for (const auto& [k, v] : sz) e1.ints[k] = e2.ints[k] = v;
        TypeEnv tenv0 = prog.type_env(reg().arities());
        TypeMap tm0 = typecheck(prog.body, tenv0);
        ExprPtr base_body = desugar_guarded_access(prog.body, tm0);
        json r{{"schema", 1},
               {"cost_base", cost(base_body, e1).total()},
               {"cost_derivative", cost(dprog.body, e2).total()}};
        std::cerr << r.dump() << "\n";
      }
      if (!seed_file.empty() && mode == "adj") {
        Env<double> env = build_env<double>(prog, sizes.parse(), inputs_path);
        json sj = json::parse(read_file(seed_file));
        env.values[seed_name] = value_from_json<double>(sj, seed_type, env.idx);
        Value<double> v = eval_program(dprog, env, reg());
        std::cout << "# value: " << value_to_json(v).dump() << "\n";
      }
      return 0;
    }

    if (app.got_subcommand(verify)) {
      SourceProgram prog = load(file);
      std::vector<std::string> targets = wrt();
      if (targets.empty())
        for (const auto& [x, t] : prog.inputs) targets.push_back(x);
      std::map<std::string, long long> sz = sizes.parse();
      IdxEnv ienv;
      for (const auto& s : prog.size_vars) {
        auto it = sz.find(s);
        if (it == sz.end())
          fail(Errc::UnboundSizeVariable, "size '" + s + "' needs --size " + s + "=...");
        ienv.ints[s] = it->second;
      }
      Rng rng(seed ^ 0x5eedD1ce);
      for (const auto& [r, arity] : prog.relations) {
        long long range = 8;
        for (const auto& [k, v] : sz) range = std::max(range, v);
        ienv.relations[r] = random_table(arity, range, rng);
      }
      TypeEnv tenv = prog.type_env(reg().arities());
      TypeMap tm = typecheck(prog.body, tenv);
      bool scalar_out = tm.at(prog.body).is_scalar();
      bool polynomial = is_polynomial(prog.body);

      json out{{"schema", 1}, {"seed", seed}, {"checks", json::object()}};
      bool all_ok = true;
      std::stringstream ss(checks_csv);
      std::string checkname;
      while (std::getline(ss, checkname, ',')) {
        json r;
        if (checkname == "universal") {
          if (polynomial) {
            UniversalReport rep =
                check_universal_property<Rational>(prog, targets, 100, seed, reg(), ienv);
            r = {{"pass", rep.pass}, {"trials", rep.trials}, {"exact", true}};
          } else {
            UniversalReport rep =
                check_universal_property<double>(prog, targets, 100, seed, reg(), ienv);
            r = {{"pass", rep.pass}, {"trials", rep.trials}, {"max_rel_err", rep.max_rel_err}};
          }
        } else if (checkname == "finite-diff") {
          if (!scalar_out) {
            r = {{"pass", true}, {"skipped", "non-scalar output"}};
          } else {
            Env<double> env;
            env.idx = ienv;
            Rng vr(seed);
            for (const auto& [x, t] : prog.inputs)
              env.values[x] = random_double_value(t, ienv, vr);
            std::vector<double> fd = finite_diff_gradient(prog, targets, env, reg(), 1e-5);
            AdjointProgram ap = adjoint_of_program(prog, targets, reg());
            Env<double> aenv = env;
            aenv.values[ap.dy] = Value<double>::number(1.0);
            std::vector<double> grad = flatten(eval_program(ap.program, aenv, reg()));
            double worst = 0;
            for (size_t i = 0; i < fd.size(); ++i)
              worst = std::max(worst, rel_err(grad[i], fd[i], 1e-8));
            r = {{"pass", worst <= 1e-4}, {"max_rel_err", worst}};
          }
        } else if (checkname == "jacobian") {
          if (polynomial) {
            Env<Rational> env;
            env.idx = ienv;
            Rng vr(seed);
            for (const auto& [x, t] : prog.inputs)
              env.values[x] = random_rational_value(t, ienv, vr);
            auto fwd = jacobian_by_probing(prog, targets, env, reg(), Probe::Forward);
            auto adj = jacobian_by_probing(prog, targets, env, reg(), Probe::Adjoint);
            bool equal = fwd.rows == adj.rows && fwd.cols == adj.cols;
            for (size_t i = 0; equal && i < fwd.rows; ++i)
              for (size_t j = 0; equal && j < fwd.cols; ++j)
                equal = fwd.at(i, j) == adj.at(i, j);
            r = {{"pass", equal}, {"rows", fwd.rows}, {"cols", fwd.cols}, {"exact", true}};
          } else {
            Env<double> fenv;
            fenv.idx = ienv;
            Rng vr2(seed);
            for (const auto& [x, t] : prog.inputs)
              fenv.values[x] = random_double_value(t, ienv, vr2);
            auto fwd = jacobian_by_probing(prog, targets, fenv, reg(), Probe::Forward);
            auto adj = jacobian_by_probing(prog, targets, fenv, reg(), Probe::Adjoint);
            double worst = 0;
            for (size_t i = 0; i < fwd.rows; ++i)
              for (size_t j = 0; j < fwd.cols; ++j)
                worst = std::max(worst, rel_err(fwd.at(i, j), adj.at(i, j)));
            r = {{"pass", worst <= 1e-9}, {"max_rel_err", worst}};
          }
        } else if (checkname == "cost") {
          OpCount count;
          if (polynomial) {
            Env<Rational> env;
            env.idx = ienv;
            Rng vr(seed);
            for (const auto& [x, t] : prog.inputs)
              env.values[x] = random_rational_value(t, ienv, vr);
            eval_program(prog, env, reg(), &count);
          } else {
            Env<double> env;
            env.idx = ienv;
            Rng vr(seed);
            for (const auto& [x, t] : prog.inputs)
              env.values[x] = random_double_value(t, ienv, vr);
            eval_program(prog, env, reg(), &count);
          }
          IdxEnv e2 = ienv;
          WorkCost c = cost(desugar_guarded_access(prog.body, tm), e2);
          r = {{"pass", c.matches(count)},
               {"cost", c.total()},
               {"instrumented", count.total()}};
        } else {
          throw CLI::ValidationError("unknown check " + checkname);
        }
        all_ok = all_ok && r["pass"].get<bool>();
        out["checks"][checkname] = r;
      }
      std::cout << (format == "json" ? out.dump() : out.dump(2)) << "\n";
      return all_ok ? 0 : 1;
    }

    if (app.got_subcommand(report)) {
      struct Fixture {
        std::string name;
        std::vector<std::string> wrt;
        std::map<std::string, long long> sizes;
      };
      const std::vector<Fixture> fixtures = {
          {"conv", {"x"}, {{"n", 3}, {"m", 2}}},
          {"correlation", {"dy"}, {{"n", 3}, {"m", 2}}},
          {"sos_loss", {"x"}, {{"n", 3}, {"m", 2}}},
          {"trace", {"A"}, {{"n", 3}}},
          {"eye", {"x"}, {{"n", 3}}},
          {"trace_eye", {"x"}, {{"n", 3}}},
          {"deadcode", {"x"}, {}},
          {"skipped_sum", {"x"}, {{"n", 6}}},
          {"dag_linear", {"x", "y"}, {}},
          {"batched_loss", {"w"}, {{"B", 2}, {"n", 3}, {"m", 2}}},
          {"dot", {"x", "y"}, {{"n", 4}}},
          {"matmul", {"A", "B"}, {{"n", 2}, {"m", 3}, {"p", 2}}},
          {"diag_trace", {"x"}, {{"N", 4}}},
          {"pair_swap", {"xy"}, {{"n", 3}}},
          {"exp_loss", {"x"}, {{"n", 3}}},
          {"relation_mask", {"x"}, {{"n", 3}}},
          {"guarded_shift", {"x"}, {{"n", 4}}},
          {"identity", {"x"}, {{"n", 4}}},
          {"affine_map", {"x"}, {{"n", 4}}},
          {"cubic", {"x"}, {}},
      };
      json rows = json::array();
      bool all_ok = true;
      for (const auto& f : fixtures) {
        json row{{"program", f.name}};
        try {
          SourceProgram prog = load(corpus_dir + "/" + f.name + ".atl");
          IdxEnv ienv;
          for (const auto& [k, v] : f.sizes) ienv.ints[k] = v;
          Rng rng(seed ^ 0x5eedD1ce);
          for (const auto& [r, arity] : prog.relations) {
            long long range = 8;
            for (const auto& [k, v] : f.sizes) range = std::max(range, v);
            ienv.relations[r] = random_table(arity, range, rng);
          }
          TypeEnv tenv = prog.type_env(reg().arities());
          TypeMap tm = typecheck(prog.body, tenv);
          SourceProgram d = prog.with_body(desugar_guarded_access(prog.body, tm));
          SSAProgram ssa = to_ssa_pipeline(d, tenv);
          Validation v = validate_ssa(ssa.to_expr(), prog);
          IdxEnv e1 = ienv, e2 = ienv;
          CostBound fb = forward_cost_check(ssa, f.wrt, reg(), e1);
          CostBound ab = adjoint_cost_check(ssa, f.wrt, reg(), e2);
          bool uni;
          if (is_polynomial(prog.body))
            uni = check_universal_property<Rational>(prog, f.wrt, 20, seed, reg(), ienv).pass;
          else
            uni = check_universal_property<double>(prog, f.wrt, 20, seed, reg(), ienv).pass;
          bool ok = v.ok && fb.holds && ab.holds && uni;
          row["ssa_valid"] = v.ok;
          row["fwd_cost_bound"] = fb.holds;
          row["adj_cost_bound"] = ab.holds;
          row["universal"] = uni;
          row["pass"] = ok;
          all_ok = all_ok && ok;
        } catch (const std::exception& e) {
          row["pass"] = false;
          row["error"] = e.what();
          all_ok = false;
        }
        rows.push_back(row);
      }
      if (format == "json") {
        std::cout << json{{"schema", 1}, {"results", rows}, {"pass", all_ok}}.dump() << "\n";
      } else {
        for (const auto& row : rows) {
          std::cout << (row["pass"].get<bool>() ? "[pass] " : "[FAIL] ")
                    << row["program"].get<std::string>();
          if (row.contains("error")) std::cout << "  (" << row["error"].get<std::string>() << ")";
          std::cout << "\n";
        }
        std::cout << (all_ok ? "all fixtures pass" : "FAILURES present") << "\n";
      }
      return all_ok ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
