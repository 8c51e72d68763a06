#pragma once

// First-order formula support for the fof(...) problem format used by the
// rest of the toolkit. The accepted language is the untyped first-order
// fragment: quantifiers ! and ?, connectives ~ & | => <=>, equality,
// $true/$false, and annotated records of the form
//
//   fof(name, role, formula).
//
// where role is either conjecture or axiom. '%' starts a line comment.
// Variables are upper-case words bound by an enclosing quantifier; a free
// variable is a parse error. Symbols are keyed by (name, arity, kind), so
// the same name used with two different arities denotes two symbols.

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace axcap::fof {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string context, int line, int col, const std::string& what);
  int line() const { return line_; }
  int col() const { return col_; }

 private:
  int line_;
  int col_;
};

struct Term {
  struct Variable {
    std::string name;
  };
  struct Application {  // arity 0 is a constant
    std::string symbol;
    std::vector<Term> args;
  };
  std::variant<Variable, Application> node;

  bool operator==(const Term&) const;
};

enum class Connective { And, Or, Implies, Iff };
enum class Quantifier { Forall, Exists };

struct Formula {
  using Ptr = std::shared_ptr<const Formula>;

  struct Atom {  // predicate application, possibly zero arity
    std::string symbol;
    std::vector<Term> args;
  };
  struct Equal {
    Term lhs;
    Term rhs;
  };
  struct Negation {
    Ptr child;
  };
  struct Binary {
    Connective op;
    Ptr lhs;
    Ptr rhs;
  };
  struct Quantified {
    Quantifier quant;
    std::string variable;
    Ptr body;
  };
  struct Boolean {
    bool value;
  };

  std::variant<Atom, Equal, Negation, Binary, Quantified, Boolean> node;

  bool operator==(const Formula&) const;
};

enum class Role { Conjecture, Axiom };

struct AnnotatedFormula {
  std::string name;
  Role role = Role::Axiom;
  Formula::Ptr formula;
};

// One parsed problem: exactly one conjecture plus its axioms, in file order.
struct Problem {
  std::string id;
  AnnotatedFormula conjecture;
  std::vector<AnnotatedFormula> axioms;

  const AnnotatedFormula* find_axiom(const std::string& name) const;
};

// Parses a whole problem file. `id` names the problem in error messages and
// in Problem::id. Throws ParseError on syntax errors, free variables,
// duplicate record names, and zero or multiple conjectures.
Problem parse_problem(const std::string& text, const std::string& id);

std::string serialize_formula(const Formula& f);
std::string serialize_record(const AnnotatedFormula& af);
// Records in order: conjecture first, then axioms. Output re-parses to an
// equal problem.
std::string serialize_problem(const Problem& p);

enum class SymbolKind { Function, Predicate };

struct SymbolKey {
  std::string name;
  int arity = 0;
  SymbolKind kind = SymbolKind::Function;

  auto operator<=>(const SymbolKey&) const = default;
};

// Occurrence counts over the given formulas. Each occurrence of a symbol
// counts once; variables and the equality sign are not symbols.
std::map<SymbolKey, long> symbol_occurrences(std::span<const AnnotatedFormula> formulas);
std::map<SymbolKey, long> symbol_occurrences(const AnnotatedFormula& formula);

}  // namespace axcap::fof
