#include "atl/program.hpp"

namespace atl {

namespace {

// Precedence: 0 binders (let/gen/sum), 1 addition, 2 multiplication,
// 3 unary (guard/minus), 4 postfix access, 5 atoms.
int level_of(const ExprPtr& e) {
  switch (e->kind) {
    case ExprKind::Let:
    case ExprKind::Gen:
    case ExprKind::Sum:
      return 0;
    case ExprKind::Add:
      return 1;
    case ExprKind::Mul:
      return e->kid(0)->kind == ExprKind::Const && e->kid(0)->value == Rational(-1) &&
                     e->kid(1)->kind != ExprKind::Const
                 ? 3
                 : 2;
    case ExprKind::Guard:
      return 3;
    case ExprKind::Access:
    case ExprKind::GuardedAccess:
      return 4;
    default:
      return 5;
  }
}

void print_rec(const ExprPtr& e, bool multiline, std::string& out);

void print_at(const ExprPtr& e, int min_level, bool multiline, std::string& out) {
  if (level_of(e) < min_level) {
    out += "(";
    print_rec(e, false, out);
    out += ")";
  } else {
    print_rec(e, multiline, out);
  }
}

bool is_negation(const ExprPtr& e) {
  return e->kind == ExprKind::Mul && e->kid(0)->kind == ExprKind::Const &&
         e->kid(0)->value == Rational(-1) && e->kid(1)->kind != ExprKind::Const;
}

void print_rec(const ExprPtr& e, bool multiline, std::string& out) {
  switch (e->kind) {
    case ExprKind::Var:
      out += e->name;
      return;
    case ExprKind::Const:
      out += e->value.str();
      return;
    case ExprKind::Add:
      print_at(e->kid(0), 1, false, out);
      if (is_negation(e->kid(1))) {
        out += " - ";
        print_at(e->kid(1)->kid(1), 2, false, out);
      } else {
        out += " + ";
        print_at(e->kid(1), 2, false, out);
      }
      return;
    case ExprKind::Mul:
      if (is_negation(e)) {
        out += "-";
        print_at(e->kid(1), 3, false, out);
        return;
      }
      print_at(e->kid(0), 2, false, out);
      out += " * ";
      print_at(e->kid(1), 3, false, out);
      return;
    case ExprKind::Call: {
      out += e->name + "(";
      for (size_t i = 0; i < e->kids.size(); ++i) {
        if (i) out += ", ";
        print_rec(e->kid(i), false, out);
      }
      out += ")";
      return;
    }
    case ExprKind::Tuple:
      out += "(";
      print_rec(e->kid(0), false, out);
      out += ", ";
      print_rec(e->kid(1), false, out);
      out += ")";
      return;
    case ExprKind::Proj:
      out += e->side == 0 ? "fst " : "snd ";
      print_at(e->kid(0), 5, false, out);
      return;
    case ExprKind::Gen:
    case ExprKind::Sum:
      out += e->kind == ExprKind::Gen ? "gen " : "sum ";
      out += e->name + ":" + e->idx.str() + ". ";
      print_at(e->kid(0), 0, false, out);
      return;
    case ExprKind::Access:
    case ExprKind::GuardedAccess: {
      // Collapse a chain of accesses into one bracket group.
      std::vector<const Expr*> chain;
      const Expr* cur = e.get();
      while (cur->kind == ExprKind::Access || cur->kind == ExprKind::GuardedAccess) {
        chain.push_back(cur);
        cur = cur->kids[0].get();
      }
      ExprPtr base = chain.back()->kids[0];
      print_at(base, 4, false, out);
      // chain is outermost-first; emit base-first.
      std::string group;
      for (size_t i = chain.size(); i-- > 0;) {
        group += group.empty() ? "[" : ", ";
        group += chain[i]->idx.str();
        if (chain[i]->kind == ExprKind::GuardedAccess || i == 0) {
          out += group + "]";
          if (chain[i]->kind == ExprKind::GuardedAccess) out += "?";
          group.clear();
        }
      }
      return;
    }
    case ExprKind::Guard:
      out += "[" + pred_str(e->pred) + "] * ";
      print_at(e->kid(0), 3, false, out);
      return;
    case ExprKind::Let:
      out += "let " + e->name + " = ";
      print_at(e->kid(0), 0, false, out);
      out += multiline ? " in\n" : " in ";
      print_at(e->kid(1), 0, multiline, out);
      return;
  }
}

}  // namespace

std::string print_expr(const ExprPtr& e) {
  std::string out;
  print_rec(e, true, out);
  return out;
}

std::string print_program(const SourceProgram& p) {
  std::string out;
  if (!p.size_vars.empty()) {
    out += "size ";
    for (size_t i = 0; i < p.size_vars.size(); ++i) {
      if (i) out += ", ";
      out += p.size_vars[i];
    }
    out += ";\n";
  }
  for (const auto& [r, a] : p.relations) out += "relation " + r + "(" + std::to_string(a) + ");\n";
  for (const auto& [x, t] : p.inputs) out += "input " + x + " : " + t.str() + ";\n";
  out += print_expr(p.body);
  out += "\n";
  return out;
}

}  // namespace atl
