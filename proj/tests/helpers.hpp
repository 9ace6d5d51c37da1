#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "atl/ad.hpp"
#include "atl/cost.hpp"
#include "atl/normalize.hpp"
#include "atl/oracle.hpp"
#include "atl/program.hpp"
#include "atl/ssa.hpp"

namespace atl::testing {

inline std::string corpus_dir() { return ATL_CORPUS_DIR; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline SourceProgram load_program(const std::string& name) {
  return parse_program(read_file(corpus_dir() + "/" + name + ".atl"));
}

using Sizes = std::map<std::string, long long>;

struct CorpusEntry {
  std::string name;
  std::vector<std::string> wrt;
  std::vector<Sizes> size_sets;  // first entry is the default
  bool polynomial = true;        // exact rational evaluation possible
  bool scalar_out = false;
  // CSE merges repeated source-level work, strictly lowering SSA cost.
  bool cse_reduces = false;
};

// Every SSA right-hand-side form is covered: input projections
// (pair_swap), constants (affine_map), predicated additions (dag_linear,
// skipped_sum, guarded_shift), scalar maps (exp_loss), binary contractions
// (conv, dot, matmul, ...), unary contractions (trace, skipped_sum, ...).
inline const std::vector<CorpusEntry>& corpus() {
  static const std::vector<CorpusEntry> entries = {
      {"conv", {"x"}, {{{"n", 3}, {"m", 2}}, {{"n", 2}, {"m", 2}}, {{"n", 4}, {"m", 3}}, {{"n", 8}, {"m", 4}}}},
      {"correlation", {"dy"}, {{{"n", 3}, {"m", 2}}, {{"n", 2}, {"m", 2}}, {{"n", 4}, {"m", 3}}, {{"n", 8}, {"m", 4}}}},
      {"trace", {"A"}, {{{"n", 3}}, {{"n", 2}}, {{"n", 4}}, {{"n", 8}}}, true, true},
      {"eye", {"x"}, {{{"n", 3}}, {{"n", 2}}, {{"n", 4}}, {{"n", 8}}}},
      {"trace_eye", {"x"}, {{{"n", 2}}, {{"n", 4}}, {{"n", 8}}}, true, true},
      {"dot", {"x", "y"}, {{{"n", 4}}, {{"n", 2}}, {{"n", 8}}}, true, true},
      {"matmul", {"A", "B"}, {{{"n", 2}, {"m", 3}, {"p", 2}}, {{"n", 2}, {"m", 2}, {"p", 2}}, {{"n", 4}, {"m", 4}, {"p", 4}}, {{"n", 8}, {"m", 2}, {"p", 2}}}},
      {"skipped_sum", {"x"}, {{{"n", 4}}, {{"n", 2}}, {{"n", 8}}}, true, true},
      {"dag_linear", {"x", "y"}, {{{}}}},
      {"deadcode", {"x"}, {{{}}}, true, true},
      {"diag_trace", {"x"}, {{{"N", 4}}, {{"N", 2}}, {{"N", 8}}}, true, true, true},
      {"sos_loss", {"x"}, {{{"n", 3}, {"m", 2}}, {{"n", 2}, {"m", 2}}, {{"n", 4}, {"m", 3}}, {{"n", 8}, {"m", 4}}}, true, true},
      {"batched_loss", {"w"}, {{{"B", 2}, {"n", 3}, {"m", 2}}, {{"B", 2}, {"n", 2}, {"m", 2}}, {{"B", 4}, {"n", 4}, {"m", 3}}, {{"B", 8}, {"n", 8}, {"m", 2}}}, true, true},
      {"pair_swap", {"xy"}, {{{"n", 3}}, {{"n", 2}}, {{"n", 4}}, {{"n", 8}}}},
      {"exp_loss", {"x"}, {{{"n", 3}}, {{"n", 2}}, {{"n", 4}}, {{"n", 8}}}, false, true},
      {"relation_mask", {"x"}, {{{"n", 3}}, {{"n", 2}}, {{"n", 4}}, {{"n", 8}}}, true, true},
      {"guarded_shift", {"x"}, {{{"n", 4}}, {{"n", 2}}, {{"n", 8}}}},
      {"identity", {"x"}, {{{"n", 4}}, {{"n", 2}}, {{"n", 8}}}},
      {"affine_map", {"x"}, {{{"n", 4}}, {{"n", 2}}, {{"n", 8}}}},
      {"cubic", {"x"}, {{{}}}, true, true},
  };
  return entries;
}

inline IdxEnv make_idx_env(const SourceProgram& prog, const Sizes& sizes, uint64_t seed = 7) {
  IdxEnv env;
  for (const auto& [k, v] : sizes) env.ints[k] = v;
  Rng rng(seed ^ 0x5eedD1ce);
  for (const auto& [r, arity] : prog.relations) {
    long long range = 8;
    for (const auto& [k, v] : sizes) range = std::max(range, v);
    env.relations[r] = random_table(arity, range, rng);
  }
  return env;
}

template <class S>
Env<S> random_env(const SourceProgram& prog, const Sizes& sizes, uint64_t seed) {
  Env<S> env;
  env.idx = make_idx_env(prog, sizes, seed);
  Rng rng(seed);
  for (const auto& [x, t] : prog.inputs) env.values[x] = random_value<S>(t, env.idx, rng);
  return env;
}

inline const PrimitiveRegistry& reg() { return PrimitiveRegistry::standard(); }

// Evaluation equality of two bodies over shared declarations, random envs.
template <class S>
bool eval_equal(const SourceProgram& a, const SourceProgram& b, const Sizes& sizes, uint64_t seed,
                double tol = 0.0) {
  Env<S> env = random_env<S>(a, sizes, seed);
  Env<S> env2 = env;
  Value<S> va = eval_program(a, env, reg());
  Value<S> vb = eval_program(b, env2, reg());
  if constexpr (std::is_same_v<S, double>) {
    auto fa = flatten(va), fb = flatten(vb);
    if (fa.size() != fb.size()) return false;
    for (size_t i = 0; i < fa.size(); ++i)
      if (rel_err(fa[i], fb[i]) > tol) return false;
    return true;
  } else {
    (void)tol;
    return va == vb;
  }
}

}  // namespace atl::testing
