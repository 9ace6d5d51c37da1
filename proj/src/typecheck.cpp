#include "atl/typecheck.hpp"

#include <functional>

namespace atl {

namespace {

struct Checker {
  const TypeEnv& env;
  std::map<std::string, Type> lets;
  std::set<std::string> index_vars;
  TypeMap out;

  void check_affine(const IndexExpr& a, bool size_only) {
    for (const auto& [v, c] : a.coeffs()) {
      if (env.size_vars.count(v)) continue;
      if (!size_only && index_vars.count(v)) continue;
      if (size_only)
        fail(Errc::NonAffineIndex,
             "extent " + a.str() + " must be affine in size variables; '" + v + "' is not a size");
      fail(Errc::UnboundIndexVariable, "'" + v + "' in index term " + a.str());
    }
  }

  void check_pred(const PredPtr& p) {
    switch (p->kind) {
      case Pred::Kind::True:
      case Pred::Kind::False:
        return;
      case Pred::Kind::Cmp:
        check_affine(p->lhs, false);
        check_affine(p->rhs, false);
        return;
      case Pred::Kind::Rel: {
        auto it = env.relations.find(p->rel);
        if (it == env.relations.end())
          fail(Errc::UnboundVariable, "relation '" + p->rel + "' not declared");
        if (it->second != p->args.size())
          fail(Errc::ArityMismatch, "relation '" + p->rel + "' expects " +
                                        std::to_string(it->second) + " arguments, got " +
                                        std::to_string(p->args.size()));
        for (const auto& a : p->args) check_affine(a, false);
        return;
      }
      case Pred::Kind::And:
      case Pred::Kind::Or:
        check_pred(p->a);
        check_pred(p->b);
        return;
      case Pred::Kind::Exists: {
        check_affine(p->extent, true);
        bool had = index_vars.count(p->var);
        index_vars.insert(p->var);
        check_pred(p->body);
        if (!had) index_vars.erase(p->var);
        return;
      }
    }
  }

  Type expect_scalar(const ExprPtr& e, const char* what) {
    Type t = check(e);
    if (!t.is_scalar())
      fail(Errc::TypeMismatch, std::string(what) + " requires scalar operands, got " + t.str());
    return t;
  }

  Type check(const ExprPtr& e) {
    Type t = check_inner(e);
    out.set(e, t);
    return t;
  }

  Type check_inner(const ExprPtr& e) {
    switch (e->kind) {
      case ExprKind::Var: {
        auto it = lets.find(e->name);
        if (it != lets.end()) return it->second;
        auto jt = env.vars.find(e->name);
        if (jt != env.vars.end()) return jt->second;
        fail(Errc::UnboundVariable, "'" + e->name + "'");
      }
      case ExprKind::Const:
        return Type::scalar();
      case ExprKind::Add:
      case ExprKind::Mul: {
        const char* what = e->kind == ExprKind::Add ? "addition" : "multiplication";
        expect_scalar(e->kid(0), what);
        expect_scalar(e->kid(1), what);
        return Type::scalar();
      }
      case ExprKind::Call: {
        auto it = env.functions.find(e->name);
        if (it == env.functions.end())
          fail(Errc::UnknownBlackBox, "'" + e->name + "'");
        if (it->second != e->kids.size())
          fail(Errc::ArityMismatch, "'" + e->name + "' expects " + std::to_string(it->second) +
                                        " arguments, got " + std::to_string(e->kids.size()));
        for (const auto& a : e->kids) expect_scalar(a, "black-box application");
        return Type::scalar();
      }
      case ExprKind::Tuple:
        return Type::pair(check(e->kid(0)), check(e->kid(1)));
      case ExprKind::Proj: {
        Type t = check(e->kid(0));
        if (!t.is_pair()) fail(Errc::TypeMismatch, "projection requires a pair, got " + t.str());
        return e->side == 0 ? t.left() : t.right();
      }
      case ExprKind::Gen: {
        check_affine(e->idx, true);
        bool had = index_vars.count(e->name);
        index_vars.insert(e->name);
        Type t = check(e->kid(0));
        if (!had) index_vars.erase(e->name);
        return Type::tensor(e->idx, t);
      }
      case ExprKind::Sum: {
        check_affine(e->idx, true);
        bool had = index_vars.count(e->name);
        index_vars.insert(e->name);
        expect_scalar(e->kid(0), "big summation");
        if (!had) index_vars.erase(e->name);
        return Type::scalar();
      }
      case ExprKind::Access:
      case ExprKind::GuardedAccess: {
        Type t = check(e->kid(0));
        if (!t.is_tensor())
          fail(Errc::TypeMismatch, "tensor access requires a tensor, got " + t.str());
        check_affine(e->idx, false);
        return t.elem();
      }
      case ExprKind::Guard:
        check_pred(e->pred);
        return check(e->kid(0));
      case ExprKind::Let: {
        Type rhs = check(e->kid(0));
        if (e->ann && !(*e->ann == rhs))
          fail(Errc::TypeMismatch, "let " + e->name + " annotated " + e->ann->str() +
                                       " but bound to " + rhs.str());
        auto saved = lets.find(e->name) != lets.end() ? std::optional<Type>(lets.at(e->name))
                                                      : std::nullopt;
        lets[e->name] = rhs;
        Type t = check(e->kid(1));
        if (saved)
          lets[e->name] = *saved;
        else
          lets.erase(e->name);
        return t;
      }
    }
    fail(Errc::Internal, "bad expr kind");
  }
};

}  // namespace

TypeMap typecheck(const ExprPtr& e, const TypeEnv& env) {
  Checker c{env};
  c.check(e);
  return std::move(c.out);
}

ExprPtr desugar_guarded_access(const ExprPtr& e, const TypeMap& types) {
  std::function<ExprPtr(const ExprPtr&)> go = [&](const ExprPtr& x) -> ExprPtr {
    std::vector<ExprPtr> kids;
    kids.reserve(x->kids.size());
    for (const auto& k : x->kids) kids.push_back(go(k));
    switch (x->kind) {
      case ExprKind::GuardedAccess: {
        const Type& t = types.at(x->kid(0));
        PredPtr in_range = Pred::conj(Pred::cmp(CmpOp::Le, IndexExpr::constant(0), x->idx),
                                      Pred::cmp(CmpOp::Lt, x->idx, t.extent()));
        return e_guard(in_range, e_access(kids[0], x->idx));
      }
      case ExprKind::Var:
      case ExprKind::Const:
        return x;
      case ExprKind::Add: return e_add(kids[0], kids[1]);
      case ExprKind::Mul: return e_mul(kids[0], kids[1]);
      case ExprKind::Call: return e_call(x->name, std::move(kids));
      case ExprKind::Tuple: return e_tuple(kids[0], kids[1]);
      case ExprKind::Proj: return e_proj(x->side, kids[0]);
      case ExprKind::Gen: return e_gen(x->name, x->idx, kids[0]);
      case ExprKind::Sum: return e_sum(x->name, x->idx, kids[0]);
      case ExprKind::Access: return e_access(kids[0], x->idx);
      case ExprKind::Guard: return e_guard(x->pred, kids[0]);
      case ExprKind::Let: return e_let(x->name, x->ann, kids[0], kids[1]);
    }
    fail(Errc::Internal, "bad expr kind");
  };
  return go(e);
}

}  // namespace atl
