#include <algorithm>
#include <cctype>
#include <optional>
#include <set>

#include "atl/program.hpp"

namespace atl {

namespace {

enum class Tok {
  Ident, Int, Decimal,
  LParen, RParen, LBracket, RBracket,
  Comma, Dot, DotDot, Colon, Semi, Question,
  Plus, Minus, Star, Slash,
  Lt, Le, Gt, Ge, Eq,
  KwLet, KwIn, KwGen, KwSum, KwFst, KwSnd, KwExists, KwAnd, KwOr,
  KwTrue, KwFalse, KwSize, KwRelation, KwInput, KwReal,
  End,
};

struct Token {
  Tok kind;
  std::string text;
  SourcePos pos;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_ws();
      Token t = next();
      out.push_back(t);
      if (t.kind == Tok::End) break;
    }
    return out;
  }

 private:
  void skip_ws() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  Token next() {
    SourcePos here{line_, col_};
    if (pos_ >= src_.size()) return {Tok::End, "", here};
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string s;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_' ||
              src_[pos_] == '\'')) {
        s.push_back(src_[pos_]);
        advance();
      }
      static const std::map<std::string, Tok> kw = {
          {"let", Tok::KwLet},       {"in", Tok::KwIn},     {"gen", Tok::KwGen},
          {"sum", Tok::KwSum},       {"fst", Tok::KwFst},   {"snd", Tok::KwSnd},
          {"exists", Tok::KwExists}, {"and", Tok::KwAnd},   {"or", Tok::KwOr},
          {"true", Tok::KwTrue},     {"false", Tok::KwFalse}, {"size", Tok::KwSize},
          {"relation", Tok::KwRelation}, {"input", Tok::KwInput}, {"real", Tok::KwReal}};
      auto it = kw.find(s);
      return {it == kw.end() ? Tok::Ident : it->second, s, here};
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string s;
      bool decimal = false;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        s.push_back(src_[pos_]);
        advance();
      }
      if (pos_ < src_.size() && src_[pos_] == '.' &&
          pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
        decimal = true;
        s.push_back('.');
        advance();
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
          s.push_back(src_[pos_]);
          advance();
        }
      }
      if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
        size_t save = pos_;
        int save_line = line_, save_col = col_;
        std::string exp;
        exp.push_back(src_[pos_]);
        advance();
        if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) {
          exp.push_back(src_[pos_]);
          advance();
        }
        if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
          while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
            exp.push_back(src_[pos_]);
            advance();
          }
          s += exp;
          decimal = true;
        } else {
          pos_ = save;
          line_ = save_line;
          col_ = save_col;
        }
      }
      return {decimal ? Tok::Decimal : Tok::Int, s, here};
    }
    advance();
    switch (c) {
      case '(': return {Tok::LParen, "(", here};
      case ')': return {Tok::RParen, ")", here};
      case '[': return {Tok::LBracket, "[", here};
      case ']': return {Tok::RBracket, "]", here};
      case ',': return {Tok::Comma, ",", here};
      case ':': return {Tok::Colon, ":", here};
      case ';': return {Tok::Semi, ";", here};
      case '?': return {Tok::Question, "?", here};
      case '+': return {Tok::Plus, "+", here};
      case '-': return {Tok::Minus, "-", here};
      case '*': return {Tok::Star, "*", here};
      case '/': return {Tok::Slash, "/", here};
      case '=': return {Tok::Eq, "=", here};
      case '.':
        if (pos_ < src_.size() && src_[pos_] == '.') {
          advance();
          return {Tok::DotDot, "..", here};
        }
        return {Tok::Dot, ".", here};
      case '<':
        if (pos_ < src_.size() && src_[pos_] == '=') {
          advance();
          return {Tok::Le, "<=", here};
        }
        return {Tok::Lt, "<", here};
      case '>':
        if (pos_ < src_.size() && src_[pos_] == '=') {
          advance();
          return {Tok::Ge, ">=", here};
        }
        return {Tok::Gt, ">", here};
      default:
        throw SyntaxError(here, std::string("unexpected character '") + c + "'");
    }
  }

  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
};

Rational parse_decimal(const std::string& text) {
  // Exact: mantissa / 10^frac * 10^exp.
  size_t epos = text.find_first_of("eE");
  std::string mant = epos == std::string::npos ? text : text.substr(0, epos);
  long long expo = epos == std::string::npos ? 0 : std::stoll(text.substr(epos + 1));
  size_t dot = mant.find('.');
  std::string digits = dot == std::string::npos ? mant : mant.substr(0, dot) + mant.substr(dot + 1);
  long long frac = dot == std::string::npos ? 0 : static_cast<long long>(mant.size() - dot - 1);
  Rational v(0);
  for (char c : digits) v = v * Rational(10) + Rational(c - '0');
  long long net = expo - frac;
  Rational ten(10);
  for (long long i = 0; i < (net > 0 ? net : -net); ++i)
    v = net > 0 ? v * ten : v / ten;
  return v;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  SourceProgram program() {
    SourceProgram p;
    while (true) {
      if (at(Tok::KwSize)) {
        eat();
        do {
          p.size_vars.push_back(declare(ident()));
        } while (try_eat(Tok::Comma));
        expect(Tok::Semi);
      } else if (at(Tok::KwRelation)) {
        eat();
        std::string name = declare(ident());
        expect(Tok::LParen);
        Token n = expect(Tok::Int);
        expect(Tok::RParen);
        expect(Tok::Semi);
        p.relations.emplace_back(name, static_cast<size_t>(std::stoll(n.text)));
      } else if (at(Tok::KwInput)) {
        eat();
        std::string name = declare(ident());
        expect(Tok::Colon);
        Type t = type();
        expect(Tok::Semi);
        p.inputs.emplace_back(name, t);
      } else {
        break;
      }
    }
    p.body = expr();
    expect(Tok::End);
    return p;
  }

 private:
  const Token& cur() const { return toks_[i_]; }
  bool at(Tok k) const { return cur().kind == k; }
  Token eat() { return toks_[i_++]; }
  bool try_eat(Tok k) {
    if (at(k)) {
      ++i_;
      return true;
    }
    return false;
  }
  Token expect(Tok k) {
    if (!at(k)) throw SyntaxError(cur().pos, "expected " + token_name(k) + ", got '" + cur().text + "'");
    return eat();
  }
  static std::string token_name(Tok k) {
    switch (k) {
      case Tok::Ident: return "identifier";
      case Tok::Int: return "integer";
      case Tok::Semi: return "';'";
      case Tok::Colon: return "':'";
      case Tok::Dot: return "'.'";
      case Tok::LParen: return "'('";
      case Tok::RParen: return "')'";
      case Tok::LBracket: return "'['";
      case Tok::RBracket: return "']'";
      case Tok::KwIn: return "'in'";
      case Tok::Eq: return "'='";
      case Tok::End: return "end of input";
      default: return "token";
    }
  }

  std::string ident() { return expect(Tok::Ident).text; }

  // Declared names and let binders are unique across the whole program; index
  // binders may be reused in disjoint scopes (SSA bindings all start at i0)
  // but may not shadow anything in scope.
  [[noreturn]] void duplicate(const std::string& name) {
    throw Error(Errc::DuplicateBinding, std::to_string(cur().pos.line) + ":" +
                                            std::to_string(cur().pos.col) + ": '" + name + "'");
  }

  std::string declare(const std::string& name) {
    if (!names_.insert(name).second) duplicate(name);
    return name;
  }

  std::string declare_index(const std::string& name) {
    if (names_.count(name) ||
        std::find(idx_scope_.begin(), idx_scope_.end(), name) != idx_scope_.end())
      duplicate(name);
    idx_scope_.push_back(name);
    return name;
  }

  Type type() {
    if (try_eat(Tok::KwReal)) return Type::scalar();
    if (try_eat(Tok::LBracket)) {
      IndexExpr ext = affine();
      expect(Tok::RBracket);
      return Type::tensor(ext, type());
    }
    if (try_eat(Tok::LParen)) {
      Type a = type();
      expect(Tok::Comma);
      Type b = type();
      expect(Tok::RParen);
      return Type::pair(a, b);
    }
    throw SyntaxError(cur().pos, "expected a type");
  }

  // Affine index terms: sums/differences of optionally integer-scaled atoms.
  IndexExpr affine() {
    IndexExpr r = cur().kind == Tok::Minus ? IndexExpr::constant(0) : affine_term();
    while (at(Tok::Plus) || at(Tok::Minus)) {
      bool minus = eat().kind == Tok::Minus;
      IndexExpr t = affine_term();
      r = minus ? r - t : r + t;
    }
    return r;
  }

  IndexExpr affine_term() {
    if (at(Tok::Int)) {
      long long k = std::stoll(eat().text);
      if (try_eat(Tok::Star)) return affine_atom().scaled(k);
      return IndexExpr::constant(k);
    }
    IndexExpr a = affine_atom();
    if (try_eat(Tok::Star)) {
      Token k = expect(Tok::Int);
      return a.scaled(std::stoll(k.text));
    }
    return a;
  }

  IndexExpr affine_atom() {
    if (at(Tok::Ident)) return IndexExpr::variable(eat().text);
    if (try_eat(Tok::LParen)) {
      IndexExpr a = affine();
      expect(Tok::RParen);
      return a;
    }
    throw SyntaxError(cur().pos, "expected an index term");
  }

  // Binder range "lo..hi" or plain extent "n"; returns (offset, extent).
  std::pair<IndexExpr, IndexExpr> range() {
    IndexExpr first = affine();
    if (try_eat(Tok::DotDot)) {
      IndexExpr hi = affine();
      return {first, hi - first};
    }
    return {IndexExpr::constant(0), first};
  }

  ExprPtr binder_body(bool is_gen) {
    std::string v = declare_index(ident());
    expect(Tok::Colon);
    auto [lo, extent] = range();
    expect(Tok::Dot);
    ExprPtr body = expr();
    idx_scope_.pop_back();
    // Internal iteration is 0-based: a lower bound becomes an offset on the
    // bound variable.
    if (!(lo == IndexExpr::constant(0)))
      body = substitute_idx(body, v, IndexExpr::variable(v) + lo);
    return is_gen ? e_gen(v, extent, body) : e_sum(v, extent, body);
  }

  ExprPtr expr() {
    if (try_eat(Tok::KwLet)) {
      std::string v = declare(ident());
      std::optional<Type> ann;
      if (try_eat(Tok::Colon)) ann = type();
      expect(Tok::Eq);
      ExprPtr rhs = expr();
      expect(Tok::KwIn);
      ExprPtr body = expr();
      return e_let(v, ann, rhs, body);
    }
    if (try_eat(Tok::KwGen)) return binder_body(true);
    if (try_eat(Tok::KwSum)) return binder_body(false);
    return sum_expr();
  }

  ExprPtr sum_expr() {
    ExprPtr r = product();
    while (at(Tok::Plus) || at(Tok::Minus)) {
      bool minus = eat().kind == Tok::Minus;
      ExprPtr t = product();
      r = e_add(r, minus ? e_mul(e_const(Rational(-1)), t) : t);
    }
    return r;
  }

  ExprPtr product() {
    ExprPtr r = unary();
    while (try_eat(Tok::Star)) r = e_mul(r, unary());
    return r;
  }

  ExprPtr unary() {
    if (at(Tok::LBracket)) {
      eat();
      PredPtr p = pred();
      expect(Tok::RBracket);
      expect(Tok::Star);
      return e_guard(p, unary());
    }
    if (try_eat(Tok::Minus)) {
      ExprPtr t = unary();
      if (t->kind == ExprKind::Const) return e_const(-t->value);
      return e_mul(e_const(Rational(-1)), t);
    }
    return postfix();
  }

  ExprPtr postfix() {
    ExprPtr r = primary();
    while (at(Tok::LBracket)) {
      eat();
      std::vector<IndexExpr> idxs;
      idxs.push_back(affine());
      while (try_eat(Tok::Comma)) idxs.push_back(affine());
      expect(Tok::RBracket);
      bool guarded = try_eat(Tok::Question);
      for (size_t k = 0; k < idxs.size(); ++k) {
        bool last = k + 1 == idxs.size();
        r = (guarded && last) ? e_guarded_access(r, idxs[k]) : e_access(r, idxs[k]);
      }
    }
    return r;
  }

  ExprPtr primary() {
    if (at(Tok::Int)) {
      Rational v(std::stoll(eat().text));
      if (try_eat(Tok::Slash)) {
        Token d = expect(Tok::Int);
        v = v / Rational(std::stoll(d.text));
      }
      return e_const(v);
    }
    if (at(Tok::Decimal)) return e_const(parse_decimal(eat().text));
    if (try_eat(Tok::KwFst)) return e_proj(0, primary_postfix());
    if (try_eat(Tok::KwSnd)) return e_proj(1, primary_postfix());
    if (at(Tok::Ident)) {
      std::string name = eat().text;
      if (try_eat(Tok::LParen)) {
        std::vector<ExprPtr> args;
        if (!at(Tok::RParen)) {
          args.push_back(expr());
          while (try_eat(Tok::Comma)) args.push_back(expr());
        }
        expect(Tok::RParen);
        return e_call(name, std::move(args));
      }
      return e_var(name);
    }
    if (try_eat(Tok::LParen)) {
      ExprPtr a = expr();
      if (try_eat(Tok::Comma)) {
        ExprPtr b = expr();
        expect(Tok::RParen);
        return e_tuple(a, b);
      }
      expect(Tok::RParen);
      return a;
    }
    throw SyntaxError(cur().pos, "expected an expression, got '" + cur().text + "'");
  }

  // fst/snd bind their operand tightly; postfix accessors outside apply to the
  // projection (write fst (x[i]) for the other reading).
  ExprPtr primary_postfix() { return primary(); }

  PredPtr pred() {
    PredPtr r = pred_and();
    while (try_eat(Tok::KwOr)) r = Pred::disj(r, pred_and());
    return r;
  }

  PredPtr pred_and() {
    PredPtr r = pred_atom();
    while (try_eat(Tok::KwAnd)) r = Pred::conj(r, pred_atom());
    return r;
  }

  PredPtr pred_atom() {
    if (try_eat(Tok::KwTrue)) return Pred::truth();
    if (try_eat(Tok::KwFalse)) return Pred::falsity();
    if (try_eat(Tok::KwExists)) {
      std::string v = declare_index(ident());
      expect(Tok::Colon);
      auto [lo, extent] = range();
      expect(Tok::Dot);
      PredPtr body = pred();
      idx_scope_.pop_back();
      if (!(lo == IndexExpr::constant(0))) {
        std::unordered_map<std::string, IndexExpr> su{{v, IndexExpr::variable(v) + lo}};
        body = pred_substitute(body, su);
      }
      return Pred::exists(v, extent, body);
    }
    if (at(Tok::LParen)) {
      // Parenthesized predicate or a parenthesized affine term starting a
      // comparison; try the predicate reading first.
      size_t save = i_;
      size_t scope_depth = idx_scope_.size();
      eat();
      try {
        PredPtr p = pred();
        expect(Tok::RParen);
        return p;
      } catch (const SyntaxError&) {
        i_ = save;
        idx_scope_.resize(scope_depth);
      }
    }
    if (at(Tok::Ident) && toks_[i_ + 1].kind == Tok::LParen) {
      std::string name = eat().text;
      eat();
      std::vector<IndexExpr> args;
      if (!at(Tok::RParen)) {
        args.push_back(affine());
        while (try_eat(Tok::Comma)) args.push_back(affine());
      }
      expect(Tok::RParen);
      return Pred::relation(name, std::move(args));
    }
    // Comparison chain: a0 op a1 op a2 ... folds to a conjunction.
    IndexExpr lhs = affine();
    PredPtr acc = nullptr;
    while (at(Tok::Lt) || at(Tok::Le) || at(Tok::Gt) || at(Tok::Ge) || at(Tok::Eq)) {
      Tok op = eat().kind;
      IndexExpr rhs = affine();
      PredPtr leg;
      switch (op) {
        case Tok::Lt: leg = Pred::cmp(CmpOp::Lt, lhs, rhs); break;
        case Tok::Le: leg = Pred::cmp(CmpOp::Le, lhs, rhs); break;
        case Tok::Gt: leg = Pred::cmp(CmpOp::Lt, rhs, lhs); break;
        case Tok::Ge: leg = Pred::cmp(CmpOp::Le, rhs, lhs); break;
        default: leg = Pred::cmp(CmpOp::Eq, lhs, rhs); break;
      }
      acc = acc ? Pred::conj(acc, leg) : leg;
      lhs = rhs;
    }
    if (!acc) throw SyntaxError(cur().pos, "expected a comparison");
    return acc;
  }

  std::vector<Token> toks_;
  size_t i_ = 0;
  std::set<std::string> names_;
  std::vector<std::string> idx_scope_;
};

}  // namespace

SourceProgram parse_program(std::string_view text) {
  Lexer lex(text);
  Parser p(lex.run());
  return p.program();
}

}  // namespace atl
