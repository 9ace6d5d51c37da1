#include "atl/eval.hpp"

namespace atl {

long long eval_idx(const IndexExpr& a, const IdxEnv& env) {
  return a.eval([&](const std::string& v) { return env.lookup(v); });
}

bool eval_pred(const PredPtr& p, IdxEnv& env) {
  switch (p->kind) {
    case Pred::Kind::True:
      return true;
    case Pred::Kind::False:
      return false;
    case Pred::Kind::Cmp: {
      long long a = eval_idx(p->lhs, env);
      long long b = eval_idx(p->rhs, env);
      switch (p->op) {
        case CmpOp::Lt: return a < b;
        case CmpOp::Le: return a <= b;
        case CmpOp::Eq: return a == b;
      }
      return false;
    }
    case Pred::Kind::Rel: {
      auto it = env.relations.find(p->rel);
      if (it == env.relations.end())
        fail(Errc::MissingRelationTable, "no table for relation '" + p->rel + "'");
      if (it->second.arity != p->args.size())
        fail(Errc::ArityMismatch, "relation '" + p->rel + "' table arity " +
                                      std::to_string(it->second.arity) + ", applied to " +
                                      std::to_string(p->args.size()));
      std::vector<long long> args;
      args.reserve(p->args.size());
      for (const auto& a : p->args) args.push_back(eval_idx(a, env));
      return it->second.contains(args);
    }
    case Pred::Kind::And:
      return eval_pred(p->a, env) && eval_pred(p->b, env);
    case Pred::Kind::Or:
      return eval_pred(p->a, env) || eval_pred(p->b, env);
    case Pred::Kind::Exists: {
      long long n = eval_idx(p->extent, env);
      auto saved = env.ints.count(p->var) ? std::optional<long long>(env.ints.at(p->var))
                                          : std::nullopt;
      bool found = false;
      for (long long i = 0; i < n && !found; ++i) {
        env.ints[p->var] = i;
        found = eval_pred(p->body, env);
      }
      if (saved)
        env.ints[p->var] = *saved;
      else
        env.ints.erase(p->var);
      return found;
    }
  }
  return false;
}

}  // namespace atl
