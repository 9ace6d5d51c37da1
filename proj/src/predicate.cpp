#include "atl/predicate.hpp"

#include <mutex>
#include <unordered_set>

namespace atl {

namespace {

size_t combine(size_t h, size_t v) { return h * 1000003u ^ v; }

size_t content_hash(const Pred& p) {
  size_t h = static_cast<size_t>(p.kind) + 0x517cc1b7;
  switch (p.kind) {
    case Pred::Kind::True:
    case Pred::Kind::False:
      break;
    case Pred::Kind::Cmp:
      h = combine(h, static_cast<size_t>(p.op));
      h = combine(h, p.lhs.hash());
      h = combine(h, p.rhs.hash());
      break;
    case Pred::Kind::Rel:
      h = combine(h, std::hash<std::string>{}(p.rel));
      for (const auto& a : p.args) h = combine(h, a.hash());
      break;
    case Pred::Kind::And:
    case Pred::Kind::Or:
      h = combine(h, std::hash<const Pred*>{}(p.a.get()));
      h = combine(h, std::hash<const Pred*>{}(p.b.get()));
      break;
    case Pred::Kind::Exists:
      h = combine(h, std::hash<std::string>{}(p.var));
      h = combine(h, p.extent.hash());
      h = combine(h, std::hash<const Pred*>{}(p.body.get()));
      break;
  }
  return h;
}

bool content_eq(const Pred& x, const Pred& y) {
  if (x.kind != y.kind) return false;
  switch (x.kind) {
    case Pred::Kind::True:
    case Pred::Kind::False:
      return true;
    case Pred::Kind::Cmp:
      return x.op == y.op && x.lhs == y.lhs && x.rhs == y.rhs;
    case Pred::Kind::Rel:
      return x.rel == y.rel && x.args == y.args;
    case Pred::Kind::And:
    case Pred::Kind::Or:
      return x.a == y.a && x.b == y.b;
    case Pred::Kind::Exists:
      return x.var == y.var && x.extent == y.extent && x.body == y.body;
  }
  return false;
}

struct TableHash {
  size_t operator()(const PredPtr& p) const { return p->hash; }
};
struct TableEq {
  bool operator()(const PredPtr& a, const PredPtr& b) const { return content_eq(*a, *b); }
};

PredPtr intern(Pred&& node) {
  static std::mutex mu;
  static std::unordered_set<PredPtr, TableHash, TableEq> table;
  node.hash = content_hash(node);
  auto candidate = std::make_shared<const Pred>(std::move(node));
  std::lock_guard<std::mutex> lock(mu);
  auto [it, inserted] = table.insert(candidate);
  return *it;
}

}  // namespace

PredPtr Pred::truth() {
  static PredPtr t = intern(Pred{Kind::True});
  return t;
}

PredPtr Pred::falsity() {
  static PredPtr f = intern(Pred{Kind::False});
  return f;
}

PredPtr Pred::cmp(CmpOp op, IndexExpr lhs, IndexExpr rhs) {
  // Comparisons between constants fold.
  if (lhs.is_constant() && rhs.is_constant()) {
    long long a = lhs.offset(), b = rhs.offset();
    bool v = op == CmpOp::Lt ? a < b : op == CmpOp::Le ? a <= b : a == b;
    return v ? truth() : falsity();
  }
  Pred p{Kind::Cmp};
  p.op = op;
  p.lhs = std::move(lhs);
  p.rhs = std::move(rhs);
  return intern(std::move(p));
}

PredPtr Pred::relation(std::string name, std::vector<IndexExpr> args) {
  Pred p{Kind::Rel};
  p.rel = std::move(name);
  p.args = std::move(args);
  return intern(std::move(p));
}

PredPtr Pred::conj(PredPtr a, PredPtr b) {
  if (a->is_true()) return b;
  if (b->is_true()) return a;
  if (a->is_false() || b->is_false()) return falsity();
  if (a == b) return a;
  Pred p{Kind::And};
  p.a = std::move(a);
  p.b = std::move(b);
  return intern(std::move(p));
}

PredPtr Pred::disj(PredPtr a, PredPtr b) {
  if (a->is_false()) return b;
  if (b->is_false()) return a;
  if (a->is_true() || b->is_true()) return truth();
  if (a == b) return a;
  Pred p{Kind::Or};
  p.a = std::move(a);
  p.b = std::move(b);
  return intern(std::move(p));
}

PredPtr Pred::exists(std::string var, IndexExpr extent, PredPtr body) {
  if (body->is_false()) return falsity();
  if (extent.is_constant() && extent.offset() <= 0) return falsity();
  Pred p{Kind::Exists};
  p.var = std::move(var);
  p.extent = std::move(extent);
  p.body = std::move(body);
  return intern(std::move(p));
}

void pred_free_vars(const PredPtr& p, std::set<std::string>& out) {
  switch (p->kind) {
    case Pred::Kind::True:
    case Pred::Kind::False:
      return;
    case Pred::Kind::Cmp:
      for (const auto& [v, c] : p->lhs.coeffs()) out.insert(v);
      for (const auto& [v, c] : p->rhs.coeffs()) out.insert(v);
      return;
    case Pred::Kind::Rel:
      for (const auto& a : p->args)
        for (const auto& [v, c] : a.coeffs()) out.insert(v);
      return;
    case Pred::Kind::And:
    case Pred::Kind::Or:
      pred_free_vars(p->a, out);
      pred_free_vars(p->b, out);
      return;
    case Pred::Kind::Exists: {
      for (const auto& [v, c] : p->extent.coeffs()) out.insert(v);
      std::set<std::string> inner;
      pred_free_vars(p->body, inner);
      inner.erase(p->var);
      out.insert(inner.begin(), inner.end());
      return;
    }
  }
}

void pred_relations(const PredPtr& p, std::set<std::string>& out) {
  switch (p->kind) {
    case Pred::Kind::Rel:
      out.insert(p->rel);
      return;
    case Pred::Kind::And:
    case Pred::Kind::Or:
      pred_relations(p->a, out);
      pred_relations(p->b, out);
      return;
    case Pred::Kind::Exists:
      pred_relations(p->body, out);
      return;
    default:
      return;
  }
}

PredPtr pred_substitute(const PredPtr& p, const std::unordered_map<std::string, IndexExpr>& su) {
  if (su.empty()) return p;
  auto subst_aff = [&](const IndexExpr& a) { return a.substituted_all(su); };
  switch (p->kind) {
    case Pred::Kind::True:
    case Pred::Kind::False:
      return p;
    case Pred::Kind::Cmp:
      return Pred::cmp(p->op, subst_aff(p->lhs), subst_aff(p->rhs));
    case Pred::Kind::Rel: {
      std::vector<IndexExpr> args;
      args.reserve(p->args.size());
      for (const auto& a : p->args) args.push_back(subst_aff(a));
      return Pred::relation(p->rel, std::move(args));
    }
    case Pred::Kind::And:
      return Pred::conj(pred_substitute(p->a, su), pred_substitute(p->b, su));
    case Pred::Kind::Or:
      return Pred::disj(pred_substitute(p->a, su), pred_substitute(p->b, su));
    case Pred::Kind::Exists: {
      auto inner = su;
      inner.erase(p->var);
      IndexExpr extent = subst_aff(p->extent);
      // Rename the binder if a replacement would capture it.
      bool capture = false;
      for (const auto& [v, repl] : inner)
        if (repl.mentions(p->var)) capture = true;
      std::string var = p->var;
      PredPtr body = p->body;
      if (capture) {
        std::set<std::string> avoid;
        pred_free_vars(body, avoid);
        for (const auto& [v, repl] : inner) {
          avoid.insert(v);
          for (const auto& [w, c] : repl.coeffs()) avoid.insert(w);
        }
        int k = 0;
        do {
          var = p->var + "_r" + std::to_string(k++);
        } while (avoid.count(var));
        std::unordered_map<std::string, IndexExpr> ren{{p->var, IndexExpr::variable(var)}};
        body = pred_substitute(body, ren);
      }
      return Pred::exists(var, std::move(extent), pred_substitute(body, inner));
    }
  }
  return p;
}

std::string pred_str(const PredPtr& p) {
  switch (p->kind) {
    case Pred::Kind::True: return "true";
    case Pred::Kind::False: return "false";
    case Pred::Kind::Cmp: {
      const char* op = p->op == CmpOp::Lt ? " < " : p->op == CmpOp::Le ? " <= " : " = ";
      return p->lhs.str() + op + p->rhs.str();
    }
    case Pred::Kind::Rel: {
      std::string s = p->rel + "(";
      for (size_t i = 0; i < p->args.size(); ++i) {
        if (i) s += ", ";
        s += p->args[i].str();
      }
      return s + ")";
    }
    case Pred::Kind::And: {
      auto side = [](const PredPtr& q) {
        bool wrap = q->kind == Pred::Kind::Or || q->kind == Pred::Kind::Exists;
        return wrap ? "(" + pred_str(q) + ")" : pred_str(q);
      };
      return side(p->a) + " and " + side(p->b);
    }
    case Pred::Kind::Or: {
      auto side = [](const PredPtr& q) {
        return q->kind == Pred::Kind::Exists ? "(" + pred_str(q) + ")" : pred_str(q);
      };
      return side(p->a) + " or " + side(p->b);
    }
    case Pred::Kind::Exists:
      return "exists " + p->var + ":" + p->extent.str() + ". " + pred_str(p->body);
  }
  return "?";
}

}  // namespace atl
