#include "axcap/fof.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace axcap::fof {

ParseError::ParseError(std::string context, int line, int col, const std::string& what)
    : std::runtime_error(context + ":" + std::to_string(line) + ":" +
                         std::to_string(col) + ": " + what),
      line_(line),
      col_(col) {}

bool Term::operator==(const Term& o) const {
  if (node.index() != o.node.index()) return false;
  if (auto* v = std::get_if<Variable>(&node))
    return v->name == std::get<Variable>(o.node).name;
  const auto& a = std::get<Application>(node);
  const auto& b = std::get<Application>(o.node);
  return a.symbol == b.symbol && a.args == b.args;
}

bool Formula::operator==(const Formula& o) const {
  if (node.index() != o.node.index()) return false;
  return std::visit(
      [&o](const auto& lhs) -> bool {
        using T = std::decay_t<decltype(lhs)>;
        const auto& rhs = std::get<T>(o.node);
        if constexpr (std::is_same_v<T, Atom>) {
          return lhs.symbol == rhs.symbol && lhs.args == rhs.args;
        } else if constexpr (std::is_same_v<T, Equal>) {
          return lhs.lhs == rhs.lhs && lhs.rhs == rhs.rhs;
        } else if constexpr (std::is_same_v<T, Negation>) {
          return *lhs.child == *rhs.child;
        } else if constexpr (std::is_same_v<T, Binary>) {
          return lhs.op == rhs.op && *lhs.lhs == *rhs.lhs && *lhs.rhs == *rhs.rhs;
        } else if constexpr (std::is_same_v<T, Quantified>) {
          return lhs.quant == rhs.quant && lhs.variable == rhs.variable &&
                 *lhs.body == *rhs.body;
        } else {
          return lhs.value == rhs.value;
        }
      },
      node);
}

const AnnotatedFormula* Problem::find_axiom(const std::string& name) const {
  for (const auto& ax : axioms)
    if (ax.name == name) return &ax;
  return nullptr;
}

namespace {

enum class Tok {
  Lparen, Rparen, Lbracket, Rbracket, Comma, Dot, Colon,
  Tilde, Amp, Vline, Implies, Iff, Equal, NotEqual, Bang, Question,
  LowerWord, UpperWord, DollarWord, End,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int line = 1;
  int col = 1;
};

const char* tok_name(Tok k) {
  switch (k) {
    case Tok::Lparen: return "'('";
    case Tok::Rparen: return "')'";
    case Tok::Lbracket: return "'['";
    case Tok::Rbracket: return "']'";
    case Tok::Comma: return "','";
    case Tok::Dot: return "'.'";
    case Tok::Colon: return "':'";
    case Tok::Tilde: return "'~'";
    case Tok::Amp: return "'&'";
    case Tok::Vline: return "'|'";
    case Tok::Implies: return "'=>'";
    case Tok::Iff: return "'<=>'";
    case Tok::Equal: return "'='";
    case Tok::NotEqual: return "'!='";
    case Tok::Bang: return "'!'";
    case Tok::Question: return "'?'";
    case Tok::LowerWord: return "name";
    case Tok::UpperWord: return "variable";
    case Tok::DollarWord: return "$-word";
    case Tok::End: return "end of input";
  }
  return "?";
}

class Lexer {
 public:
  Lexer(const std::string& text, const std::string& context)
      : text_(text), context_(context) {}

  Token next() {
    skip_blank();
    Token t;
    t.line = line_;
    t.col = col_;
    if (pos_ >= text_.size()) {
      t.kind = Tok::End;
      return t;
    }
    char c = text_[pos_];
    switch (c) {
      case '(': return single(t, Tok::Lparen);
      case ')': return single(t, Tok::Rparen);
      case '[': return single(t, Tok::Lbracket);
      case ']': return single(t, Tok::Rbracket);
      case ',': return single(t, Tok::Comma);
      case '.': return single(t, Tok::Dot);
      case ':': return single(t, Tok::Colon);
      case '~': return single(t, Tok::Tilde);
      case '&': return single(t, Tok::Amp);
      case '|': return single(t, Tok::Vline);
      case '?': return single(t, Tok::Question);
      case '=':
        advance();
        if (peek() == '>') {
          advance();
          t.kind = Tok::Implies;
        } else {
          t.kind = Tok::Equal;
        }
        return t;
      case '!':
        advance();
        if (peek() == '=') {
          advance();
          t.kind = Tok::NotEqual;
        } else {
          t.kind = Tok::Bang;
        }
        return t;
      case '<':
        advance();
        if (peek() == '=' && peek(1) == '>') {
          advance();
          advance();
          t.kind = Tok::Iff;
          return t;
        }
        fail(t, "expected '<=>'");
      case '\'': {
        advance();
        std::string word;
        while (pos_ < text_.size() && text_[pos_] != '\'') {
          if (text_[pos_] == '\\' || text_[pos_] == '\n')
            fail(t, "unsupported character in quoted name");
          word.push_back(text_[pos_]);
          advance();
        }
        if (pos_ >= text_.size()) fail(t, "unterminated quoted name");
        advance();  // closing quote
        if (word.empty()) fail(t, "empty quoted name");
        t.kind = Tok::LowerWord;
        t.text = std::move(word);
        return t;
      }
      case '$': {
        advance();
        t.kind = Tok::DollarWord;
        t.text = read_word();
        if (t.text.empty()) fail(t, "expected a word after '$'");
        return t;
      }
      default:
        if (std::islower(static_cast<unsigned char>(c)) ||
            std::isdigit(static_cast<unsigned char>(c))) {
          t.kind = Tok::LowerWord;
          t.text = read_word();
          return t;
        }
        if (std::isupper(static_cast<unsigned char>(c)) || c == '_') {
          t.kind = Tok::UpperWord;
          t.text = read_word();
          return t;
        }
        fail(t, std::string("unexpected character '") + c + "'");
    }
    return t;  // unreachable
  }

 private:
  [[noreturn]] void fail(const Token& at, const std::string& msg) {
    throw ParseError(context_, at.line, at.col, msg);
  }

  Token single(Token& t, Tok kind) {
    advance();
    t.kind = kind;
    return t;
  }

  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
  }

  void advance() {
    if (pos_ < text_.size()) {
      if (text_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }

  void skip_blank() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '%') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else {
        break;
      }
    }
  }

  std::string read_word() {
    std::string w;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
        w.push_back(c);
        advance();
      } else {
        break;
      }
    }
    return w;
  }

  const std::string& text_;
  std::string context_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  Parser(const std::string& text, const std::string& context)
      : lexer_(text, context), context_(context) {
    cur_ = lexer_.next();
  }

  Problem parse() {
    Problem p;
    p.id = context_;
    std::set<std::string> names;
    bool have_conjecture = false;
    while (cur_.kind != Tok::End) {
      AnnotatedFormula af = parse_record();
      if (!names.insert(af.name).second)
        fail("duplicate record name '" + af.name + "'");
      if (af.role == Role::Conjecture) {
        if (have_conjecture) fail("more than one conjecture");
        have_conjecture = true;
        p.conjecture = std::move(af);
      } else {
        p.axioms.push_back(std::move(af));
      }
    }
    if (!have_conjecture)
      throw ParseError(context_, 1, 1, "problem has no conjecture");
    return p;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) {
    throw ParseError(context_, cur_.line, cur_.col, msg);
  }

  void advance() { cur_ = lexer_.next(); }

  void expect(Tok kind) {
    if (cur_.kind != kind)
      fail(std::string("expected ") + tok_name(kind) + " but found " +
           tok_name(cur_.kind));
    advance();
  }

  AnnotatedFormula parse_record() {
    if (cur_.kind != Tok::LowerWord || cur_.text != "fof")
      fail(std::string("expected 'fof' but found ") + tok_name(cur_.kind));
    advance();
    expect(Tok::Lparen);
    if (cur_.kind != Tok::LowerWord) fail("expected a record name");
    AnnotatedFormula af;
    af.name = cur_.text;
    advance();
    expect(Tok::Comma);
    if (cur_.kind != Tok::LowerWord || (cur_.text != "axiom" && cur_.text != "conjecture"))
      fail("expected role 'axiom' or 'conjecture'");
    af.role = cur_.text == "conjecture" ? Role::Conjecture : Role::Axiom;
    advance();
    expect(Tok::Comma);
    af.formula = parse_formula();
    expect(Tok::Rparen);
    expect(Tok::Dot);
    return af;
  }

  // <=> binds loosest and chains to the left; => is right-associative;
  // | and & chain to the left and bind tighter, in that order.
  Formula::Ptr parse_formula() {
    Formula::Ptr lhs = parse_implication();
    while (cur_.kind == Tok::Iff) {
      advance();
      Formula::Ptr rhs = parse_implication();
      lhs = std::make_shared<Formula>(
          Formula{Formula::Binary{Connective::Iff, std::move(lhs), std::move(rhs)}});
    }
    return lhs;
  }

  Formula::Ptr parse_implication() {
    Formula::Ptr lhs = parse_disjunction();
    if (cur_.kind == Tok::Implies) {
      advance();
      Formula::Ptr rhs = parse_implication();
      return std::make_shared<Formula>(
          Formula{Formula::Binary{Connective::Implies, std::move(lhs), std::move(rhs)}});
    }
    return lhs;
  }

  Formula::Ptr parse_disjunction() {
    Formula::Ptr lhs = parse_conjunction();
    while (cur_.kind == Tok::Vline) {
      advance();
      Formula::Ptr rhs = parse_conjunction();
      lhs = std::make_shared<Formula>(
          Formula{Formula::Binary{Connective::Or, std::move(lhs), std::move(rhs)}});
    }
    return lhs;
  }

  Formula::Ptr parse_conjunction() {
    Formula::Ptr lhs = parse_unitary();
    while (cur_.kind == Tok::Amp) {
      advance();
      Formula::Ptr rhs = parse_unitary();
      lhs = std::make_shared<Formula>(
          Formula{Formula::Binary{Connective::And, std::move(lhs), std::move(rhs)}});
    }
    return lhs;
  }

  Formula::Ptr parse_unitary() {
    switch (cur_.kind) {
      case Tok::Tilde: {
        advance();
        Formula::Ptr child = parse_unitary();
        return std::make_shared<Formula>(Formula{Formula::Negation{std::move(child)}});
      }
      case Tok::Bang:
      case Tok::Question:
        return parse_quantified();
      case Tok::Lparen: {
        advance();
        Formula::Ptr f = parse_formula();
        expect(Tok::Rparen);
        return f;
      }
      case Tok::DollarWord: {
        if (cur_.text == "true" || cur_.text == "false") {
          bool v = cur_.text == "true";
          advance();
          return std::make_shared<Formula>(Formula{Formula::Boolean{v}});
        }
        fail("unknown $-word '$" + cur_.text + "'");
      }
      case Tok::LowerWord:
      case Tok::UpperWord:
        return parse_atomic();
      default:
        fail(std::string("expected a formula but found ") + tok_name(cur_.kind));
    }
  }

  Formula::Ptr parse_quantified() {
    Quantifier q = cur_.kind == Tok::Bang ? Quantifier::Forall : Quantifier::Exists;
    advance();
    expect(Tok::Lbracket);
    std::vector<std::string> vars;
    while (true) {
      if (cur_.kind != Tok::UpperWord) fail("expected a variable");
      vars.push_back(cur_.text);
      advance();
      if (cur_.kind == Tok::Comma) {
        advance();
        continue;
      }
      break;
    }
    expect(Tok::Rbracket);
    expect(Tok::Colon);
    for (const auto& v : vars) bound_.push_back(v);
    Formula::Ptr body = parse_unitary();
    bound_.resize(bound_.size() - vars.size());
    // [X, Y] desugars to nested single-variable quantifiers
    for (auto it = vars.rbegin(); it != vars.rend(); ++it) {
      body = std::make_shared<Formula>(Formula{Formula::Quantified{q, *it, std::move(body)}});
    }
    return body;
  }

  // An atomic formula is a predicate application or an equality between
  // terms; which one only becomes clear after the first term.
  Formula::Ptr parse_atomic() {
    Token start = cur_;
    Term first = parse_term();
    if (cur_.kind == Tok::Equal || cur_.kind == Tok::NotEqual) {
      bool negated = cur_.kind == Tok::NotEqual;
      advance();
      Term second = parse_term();
      auto eq = std::make_shared<Formula>(
          Formula{Formula::Equal{std::move(first), std::move(second)}});
      if (!negated) return eq;
      return std::make_shared<Formula>(Formula{Formula::Negation{std::move(eq)}});
    }
    if (auto* app = std::get_if<Term::Application>(&first.node)) {
      return std::make_shared<Formula>(
          Formula{Formula::Atom{app->symbol, std::move(app->args)}});
    }
    throw ParseError(context_, start.line, start.col,
                     "a variable is not a formula");
  }

  Term parse_term() {
    if (cur_.kind == Tok::UpperWord) {
      std::string name = cur_.text;
      if (std::find(bound_.begin(), bound_.end(), name) == bound_.end())
        fail("unbound variable '" + name + "'");
      advance();
      return Term{Term::Variable{std::move(name)}};
    }
    if (cur_.kind != Tok::LowerWord)
      fail(std::string("expected a term but found ") + tok_name(cur_.kind));
    std::string symbol = cur_.text;
    advance();
    std::vector<Term> args;
    if (cur_.kind == Tok::Lparen) {
      advance();
      while (true) {
        args.push_back(parse_term());
        if (cur_.kind == Tok::Comma) {
          advance();
          continue;
        }
        break;
      }
      expect(Tok::Rparen);
      if (args.empty()) fail("empty argument list");
    }
    return Term{Term::Application{std::move(symbol), std::move(args)}};
  }

  Lexer lexer_;
  std::string context_;
  Token cur_;
  std::vector<std::string> bound_;
};

bool plain_word(const std::string& s) {
  if (s.empty()) return false;
  if (!std::islower(static_cast<unsigned char>(s[0]))) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_';
  });
}

void print_name(std::ostream& out, const std::string& name) {
  if (plain_word(name)) {
    out << name;
  } else {
    out << '\'' << name << '\'';
  }
}

void print_term(std::ostream& out, const Term& t) {
  if (auto* v = std::get_if<Term::Variable>(&t.node)) {
    out << v->name;
    return;
  }
  const auto& app = std::get<Term::Application>(t.node);
  print_name(out, app.symbol);
  if (!app.args.empty()) {
    out << '(';
    for (std::size_t i = 0; i < app.args.size(); ++i) {
      if (i) out << ',';
      print_term(out, app.args[i]);
    }
    out << ')';
  }
}

const char* connective_text(Connective c) {
  switch (c) {
    case Connective::And: return " & ";
    case Connective::Or: return " | ";
    case Connective::Implies: return " => ";
    case Connective::Iff: return " <=> ";
  }
  return "";
}

bool is_unit(const Formula& f) {
  return std::holds_alternative<Formula::Atom>(f.node) ||
         std::holds_alternative<Formula::Equal>(f.node) ||
         std::holds_alternative<Formula::Boolean>(f.node) ||
         std::holds_alternative<Formula::Negation>(f.node);
}

void print_formula(std::ostream& out, const Formula& f) {
  std::visit(
      [&out](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Formula::Atom>) {
          print_name(out, n.symbol);
          if (!n.args.empty()) {
            out << '(';
            for (std::size_t i = 0; i < n.args.size(); ++i) {
              if (i) out << ',';
              print_term(out, n.args[i]);
            }
            out << ')';
          }
        } else if constexpr (std::is_same_v<T, Formula::Equal>) {
          print_term(out, n.lhs);
          out << " = ";
          print_term(out, n.rhs);
        } else if constexpr (std::is_same_v<T, Formula::Negation>) {
          out << '~';
          if (is_unit(*n.child) && !std::holds_alternative<Formula::Equal>(n.child->node)) {
            print_formula(out, *n.child);
          } else {
            out << '(';
            print_formula(out, *n.child);
            out << ')';
          }
        } else if constexpr (std::is_same_v<T, Formula::Binary>) {
          auto side = [&out](const Formula& s) {
            if (is_unit(s)) {
              print_formula(out, s);
            } else {
              out << '(';
              print_formula(out, s);
              out << ')';
            }
          };
          side(*n.lhs);
          out << connective_text(n.op);
          side(*n.rhs);
        } else if constexpr (std::is_same_v<T, Formula::Quantified>) {
          out << (n.quant == Quantifier::Forall ? '!' : '?');
          out << '[' << n.variable << "]: ";
          if (is_unit(*n.body) || std::holds_alternative<Formula::Quantified>(n.body->node)) {
            print_formula(out, *n.body);
          } else {
            out << '(';
            print_formula(out, *n.body);
            out << ')';
          }
        } else {
          out << (n.value ? "$true" : "$false");
        }
      },
      f.node);
}

void collect_term_symbols(const Term& t, std::map<SymbolKey, long>& occ) {
  if (auto* app = std::get_if<Term::Application>(&t.node)) {
    occ[SymbolKey{app->symbol, static_cast<int>(app->args.size()), SymbolKind::Function}]++;
    for (const Term& a : app->args) collect_term_symbols(a, occ);
  }
}

void collect_formula_symbols(const Formula& f, std::map<SymbolKey, long>& occ) {
  std::visit(
      [&occ](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Formula::Atom>) {
          occ[SymbolKey{n.symbol, static_cast<int>(n.args.size()), SymbolKind::Predicate}]++;
          for (const Term& a : n.args) collect_term_symbols(a, occ);
        } else if constexpr (std::is_same_v<T, Formula::Equal>) {
          collect_term_symbols(n.lhs, occ);
          collect_term_symbols(n.rhs, occ);
        } else if constexpr (std::is_same_v<T, Formula::Negation>) {
          collect_formula_symbols(*n.child, occ);
        } else if constexpr (std::is_same_v<T, Formula::Binary>) {
          collect_formula_symbols(*n.lhs, occ);
          collect_formula_symbols(*n.rhs, occ);
        } else if constexpr (std::is_same_v<T, Formula::Quantified>) {
          collect_formula_symbols(*n.body, occ);
        }
        // Boolean constants carry no symbols.
      },
      f.node);
}

}  // namespace

Problem parse_problem(const std::string& text, const std::string& id) {
  Parser parser(text, id);
  return parser.parse();
}

std::string serialize_formula(const Formula& f) {
  std::ostringstream out;
  print_formula(out, f);
  return out.str();
}

std::string serialize_record(const AnnotatedFormula& af) {
  std::ostringstream out;
  out << "fof(";
  print_name(out, af.name);
  out << ", " << (af.role == Role::Conjecture ? "conjecture" : "axiom") << ", ";
  print_formula(out, *af.formula);
  out << ").";
  return out.str();
}

std::string serialize_problem(const Problem& p) {
  std::ostringstream out;
  out << serialize_record(p.conjecture) << "\n";
  for (const auto& ax : p.axioms) out << serialize_record(ax) << "\n";
  return out.str();
}

std::map<SymbolKey, long> symbol_occurrences(std::span<const AnnotatedFormula> formulas) {
  std::map<SymbolKey, long> occ;
  for (const auto& af : formulas) collect_formula_symbols(*af.formula, occ);
  return occ;
}

std::map<SymbolKey, long> symbol_occurrences(const AnnotatedFormula& formula) {
  return symbol_occurrences(std::span<const AnnotatedFormula>(&formula, 1));
}

}  // namespace axcap::fof
