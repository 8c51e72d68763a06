#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "axcap/fof.hpp"

using namespace axcap::fof;

namespace {

const char* kSmall = R"(
% toy problem
fof(goal, conjecture, p(a)).
fof(a1, axiom, ![X]: (p(X) => q(X))).
fof(a2, axiom, q(b) & r(b, a)).
)";

Formula::Ptr formula_of(const std::string& text) {
  Problem p = parse_problem("fof(goal, conjecture, " + text + ").", "t");
  return p.conjecture.formula;
}

}  // namespace

TEST_CASE("parses records, roles and order") {
  Problem p = parse_problem(kSmall, "small");
  CHECK(p.id == "small");
  CHECK(p.conjecture.name == "goal");
  CHECK(p.conjecture.role == Role::Conjecture);
  REQUIRE(p.axioms.size() == 2);
  CHECK(p.axioms[0].name == "a1");
  CHECK(p.axioms[1].name == "a2");
  CHECK(p.find_axiom("a2") != nullptr);
  CHECK(p.find_axiom("nope") == nullptr);
}

TEST_CASE("quantified implication has the expected shape") {
  Problem p = parse_problem(kSmall, "small");
  const Formula& f = *p.axioms[0].formula;
  const auto* q = std::get_if<Formula::Quantified>(&f.node);
  REQUIRE(q != nullptr);
  CHECK(q->quant == Quantifier::Forall);
  CHECK(q->variable == "X");
  const auto* impl = std::get_if<Formula::Binary>(&q->body->node);
  REQUIRE(impl != nullptr);
  CHECK(impl->op == Connective::Implies);
  const auto* lhs = std::get_if<Formula::Atom>(&impl->lhs->node);
  REQUIRE(lhs != nullptr);
  CHECK(lhs->symbol == "p");
  REQUIRE(lhs->args.size() == 1);
  CHECK(std::holds_alternative<Term::Variable>(lhs->args[0].node));
}

TEST_CASE("connective precedence and associativity") {
  // & binds tighter than |
  auto f = formula_of("p | q & r");
  const auto* top = std::get_if<Formula::Binary>(&f->node);
  REQUIRE(top != nullptr);
  CHECK(top->op == Connective::Or);
  const auto* rhs = std::get_if<Formula::Binary>(&top->rhs->node);
  REQUIRE(rhs != nullptr);
  CHECK(rhs->op == Connective::And);

  // => is right-associative
  auto g = formula_of("p => q => r");
  const auto* gi = std::get_if<Formula::Binary>(&g->node);
  REQUIRE(gi != nullptr);
  CHECK(gi->op == Connective::Implies);
  CHECK(std::holds_alternative<Formula::Atom>(gi->lhs->node));
  CHECK(std::holds_alternative<Formula::Binary>(gi->rhs->node));

  // negation binds tighter than &
  auto h = formula_of("~p & q");
  const auto* hi = std::get_if<Formula::Binary>(&h->node);
  REQUIRE(hi != nullptr);
  CHECK(hi->op == Connective::And);
  CHECK(std::holds_alternative<Formula::Negation>(hi->lhs->node));
}

TEST_CASE("multi-variable quantifier desugars to nested binders") {
  auto f = formula_of("![X, Y]: r(X, Y)");
  const auto* outer = std::get_if<Formula::Quantified>(&f->node);
  REQUIRE(outer != nullptr);
  CHECK(outer->variable == "X");
  const auto* inner = std::get_if<Formula::Quantified>(&outer->body->node);
  REQUIRE(inner != nullptr);
  CHECK(inner->variable == "Y");
}

TEST_CASE("inequality desugars to negated equality") {
  auto f = formula_of("![X]: (f(X) != X)");
  const auto* q = std::get_if<Formula::Quantified>(&f->node);
  REQUIRE(q != nullptr);
  const auto* n = std::get_if<Formula::Negation>(&q->body->node);
  REQUIRE(n != nullptr);
  CHECK(std::holds_alternative<Formula::Equal>(n->child->node));
}

TEST_CASE("round trip: parse, serialize, parse is stable") {
  const char* samples[] = {
      kSmall,
      "fof(goal, conjecture, $true).\n"
      "fof(a, axiom, ?[X]: ![Y]: (r(X, Y) <=> ~(p(X) & q(Y)))).\n",
      "fof(goal, conjecture, a = b | b != c).\n"
      "fof(a, axiom, ![X, Y, Z]: ((r(X, Y) & r(Y, Z)) => r(X, Z))).\n",
      "fof(goal, conjecture, p('odd name', g(c, h(c)))).\n"
      "fof(a1, axiom, p => (q <=> r) <=> s).\n"
      "fof(a2, axiom, $false => p).\n",
  };
  for (const char* s : samples) {
    Problem p1 = parse_problem(s, "rt");
    std::string text = serialize_problem(p1);
    Problem p2 = parse_problem(text, "rt");
    REQUIRE(p2.axioms.size() == p1.axioms.size());
    CHECK(*p2.conjecture.formula == *p1.conjecture.formula);
    for (std::size_t i = 0; i < p1.axioms.size(); ++i) {
      CHECK(p2.axioms[i].name == p1.axioms[i].name);
      CHECK(*p2.axioms[i].formula == *p1.axioms[i].formula);
    }
    // serialization is a fixpoint after one round
    CHECK(serialize_problem(p2) == text);
  }
}

TEST_CASE("parse errors carry position and expectation") {
  try {
    parse_problem("fof(goal, conjecture, p(a)\n.", "err");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("expected") != std::string::npos);
    CHECK(std::string(e.what()).find("err:2:") != std::string::npos);
  }

  CHECK_THROWS_AS(parse_problem("fof(g, conjecture, p(a)).\nfof(g, axiom, q).", "d"),
                  ParseError);
  CHECK_THROWS_AS(parse_problem("fof(a, axiom, p).", "noconj"), ParseError);
  CHECK_THROWS_AS(
      parse_problem("fof(g, conjecture, p).\nfof(h, conjecture, q).", "two"),
      ParseError);
  CHECK_THROWS_AS(parse_problem("fof(g, conjecture, p # q).", "char"), ParseError);
  CHECK_THROWS_AS(parse_problem("fof(g, conjecture, p(X)).", "free"), ParseError);
  CHECK_THROWS_AS(parse_problem("fof(g, conjecture, ![X]: p(X) & q(Y)).", "free2"),
                  ParseError);

  // quantifier scope ends with its body
  try {
    parse_problem("fof(g, conjecture, (![X]: p(X)) & q(X)).", "scope");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("unbound variable") != std::string::npos);
  }
}

TEST_CASE("symbol occurrences count per occurrence, keyed by arity and kind") {
  Problem p = parse_problem(
      "fof(goal, conjecture, p(a)).\n"
      "fof(a1, axiom, p(b)).\n"
      "fof(a2, axiom, ![X]: (q(X, b) => p(f(X)))).\n"
      "fof(a3, axiom, p(a, a)).\n",  // p/2 is a different symbol than p/1
      "occ");
  auto occ = symbol_occurrences(p.axioms);
  CHECK(occ[SymbolKey{"p", 1, SymbolKind::Predicate}] == 2);
  CHECK(occ[SymbolKey{"p", 2, SymbolKind::Predicate}] == 1);
  CHECK(occ[SymbolKey{"b", 0, SymbolKind::Function}] == 2);
  CHECK(occ[SymbolKey{"a", 0, SymbolKind::Function}] == 2);
  CHECK(occ[SymbolKey{"f", 1, SymbolKind::Function}] == 1);
  CHECK(occ.find(SymbolKey{"q", 2, SymbolKind::Predicate}) != occ.end());
  // variables and the conjecture's symbols are absent
  CHECK(occ.size() == 6);

  auto conj = symbol_occurrences(p.conjecture);
  CHECK(conj[SymbolKey{"p", 1, SymbolKind::Predicate}] == 1);
  CHECK(conj[SymbolKey{"a", 0, SymbolKind::Function}] == 1);
  CHECK(conj.size() == 2);
}

TEST_CASE("boolean constants and shared names across kinds") {
  Problem p = parse_problem(
      "fof(goal, conjecture, $true => p).\n"
      "fof(a1, axiom, p & p(c)).\n",  // p/0 and p/1 coexist
      "kinds");
  auto occ = symbol_occurrences(p.axioms);
  CHECK(occ[SymbolKey{"p", 0, SymbolKind::Predicate}] == 1);
  CHECK(occ[SymbolKey{"p", 1, SymbolKind::Predicate}] == 1);
}
