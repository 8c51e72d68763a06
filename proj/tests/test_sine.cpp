#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "axcap/fof.hpp"
#include "axcap/rng.hpp"
#include "axcap/sine.hpp"

using namespace axcap;
using sine::SineParams;

namespace {

// Hand-traced fixture. Occurrences over the axioms: p 1, b 2, q 2, r 1,
// s 1, d 1, t 1, a 1. With tolerance 1 the triggers are p->ax1, {q,b}->ax2,
// r->ax3, {s,d}->ax4, {t,a}->ax5.
const char* kFixture = R"(
fof(goal, conjecture, p(a)).
fof(ax1, axiom, p(b)).
fof(ax2, axiom, q(b)).
fof(ax3, axiom, ![X]: (q(X) => r(X))).
fof(ax4, axiom, s(d)).
fof(ax5, axiom, t(a)).
)";

fof::Problem fixture() { return fof::parse_problem(kFixture, "fixture"); }

std::set<std::string> select_set(const fof::Problem& p, double t, int d) {
  std::vector<std::string> sel = sine::sine_select(p, SineParams{t, d});
  return {sel.begin(), sel.end()};
}

fof::Term constant(int j) {
  fof::Term t;
  t.node = fof::Term::Application{"c" + std::to_string(j), {}};
  return t;
}

fof::Formula::Ptr random_atom(Rng& rng) {
  fof::Formula::Atom a;
  a.symbol = "p" + std::to_string(rng.uniform_index(6));
  int arity = 1 + static_cast<int>(rng.uniform_index(2));
  for (int i = 0; i < arity; ++i)
    a.args.push_back(constant(static_cast<int>(rng.uniform_index(8))));
  auto f = std::make_shared<fof::Formula>();
  f->node = std::move(a);
  return f;
}

fof::Formula::Ptr random_formula(Rng& rng) {
  fof::Formula::Ptr f = random_atom(rng);
  while (rng.uniform() < 0.4) {
    auto parent = std::make_shared<fof::Formula>();
    parent->node = fof::Formula::Binary{
        rng.uniform() < 0.5 ? fof::Connective::And : fof::Connective::Or, f, random_atom(rng)};
    f = std::move(parent);
  }
  return f;
}

fof::Problem random_problem(Rng& rng) {
  fof::Problem p;
  p.id = "random";
  p.conjecture = {"goal", fof::Role::Conjecture, random_formula(rng)};
  int n = 3 + static_cast<int>(rng.uniform_index(8));
  for (int i = 0; i < n; ++i)
    p.axioms.push_back(
        {"ax" + std::to_string(i), fof::Role::Axiom, random_formula(rng)});
  return p;
}

bool subset(const std::set<std::string>& a, const std::set<std::string>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

TEST_CASE("trigger relation follows the least-occurrence rule") {
  fof::Problem p = fixture();
  auto occ = fof::symbol_occurrences(p.axioms);
  CHECK(occ.size() == 8);
  CHECK(occ.at({"p", 1, fof::SymbolKind::Predicate}) == 1);
  CHECK(occ.at({"b", 0, fof::SymbolKind::Function}) == 2);
  CHECK(occ.at({"q", 1, fof::SymbolKind::Predicate}) == 2);

  auto triggers = sine::trigger_relation(occ, p.axioms, 1.0);
  CHECK(triggers.at({"p", 1, fof::SymbolKind::Predicate}) == std::set<std::string>{"ax1"});
  // b's count 2 equals ax2's least (q is also 2), so b triggers ax2 but
  // not ax1 where the least is p's 1.
  CHECK(triggers.at({"b", 0, fof::SymbolKind::Function}) == std::set<std::string>{"ax2"});
  CHECK(triggers.at({"q", 1, fof::SymbolKind::Predicate}) == std::set<std::string>{"ax2"});
  CHECK(triggers.at({"r", 1, fof::SymbolKind::Predicate}) == std::set<std::string>{"ax3"});
  CHECK(triggers.at({"t", 1, fof::SymbolKind::Predicate}) == std::set<std::string>{"ax5"});
  CHECK(triggers.at({"a", 0, fof::SymbolKind::Function}) == std::set<std::string>{"ax5"});

  // A generous tolerance makes every symbol trigger its axioms.
  auto loose = sine::trigger_relation(occ, p.axioms, 100.0);
  CHECK(loose.at({"b", 0, fof::SymbolKind::Function}) ==
        std::set<std::string>{"ax1", "ax2"});
  CHECK(loose.at({"q", 1, fof::SymbolKind::Predicate}) ==
        std::set<std::string>{"ax2", "ax3"});

  // A single-symbol axiom is triggered by that symbol at any tolerance.
  fof::Problem solo = fof::parse_problem(
      "fof(goal, conjecture, u(e)).\n"
      "fof(only, axiom, ![X]: w(X)).\n"
      "fof(other, axiom, u(e) & w(e)).\n",
      "solo");
  auto socc = fof::symbol_occurrences(solo.axioms);
  auto strig = sine::trigger_relation(socc, solo.axioms, 1.0);
  CHECK(strig.at({"w", 1, fof::SymbolKind::Predicate}).count("only") == 1);

  auto missing = std::map<fof::SymbolKey, long>{};
  CHECK_THROWS_AS(sine::trigger_relation(missing, p.axioms, 1.0), std::invalid_argument);
}

TEST_CASE("hand-traced selections for the committed parameter pairs") {
  fof::Problem p = fixture();
  // Depth 1: only the conjecture's own symbols (p, a) may trigger.
  CHECK(sine::sine_select(p, SineParams{1.0, 1}) ==
        std::vector<std::string>{"ax1", "ax5"});
  // Tolerance 3, unbounded depth: b (via ax1) pulls in ax2, then q pulls in
  // ax3; ax4 stays unreachable.
  CHECK(sine::sine_select(p, SineParams{3.0, 0}) ==
        std::vector<std::string>{"ax1", "ax2", "ax3", "ax5"});
}

TEST_CASE("selection preserves original axiom order") {
  fof::Problem p = fixture();
  std::vector<std::string> sel = sine::sine_select(p, SineParams{3.0, 0});
  std::vector<std::string> order;
  for (const auto& ax : p.axioms)
    if (std::find(sel.begin(), sel.end(), ax.name) != sel.end()) order.push_back(ax.name);
  CHECK(sel == order);
}

TEST_CASE("unreachable conjectures select nothing") {
  fof::Problem p = fof::parse_problem(
      "fof(goal, conjecture, u(e)).\n"
      "fof(ax1, axiom, p(b)).\n"
      "fof(ax2, axiom, q(b)).\n",
      "disjoint");
  CHECK(sine::sine_select(p, SineParams{1.0, 0}).empty());
  CHECK(sine::sine_select(p, SineParams{10.0, 5}).empty());
}

TEST_CASE("symbol-free axioms are always selected") {
  fof::Problem p = fof::parse_problem(
      "fof(goal, conjecture, u(e)).\n"
      "fof(ax1, axiom, p(b)).\n"
      "fof(truth, axiom, $true).\n"
      "fof(mix, axiom, $true | $false).\n",
      "free");
  for (SineParams params : {SineParams{1.0, 1}, SineParams{1.0, 0}, SineParams{5.0, 3}})
    CHECK(sine::sine_select(p, params) == std::vector<std::string>{"truth", "mix"});
}

TEST_CASE("chained triggers resolve at unbounded depth") {
  fof::Problem p = fof::parse_problem(
      "fof(goal, conjecture, p(x0)).\n"
      "fof(ax1, axiom, p(x0) & q(x1)).\n"
      "fof(ax2, axiom, q(x1) & r(x2)).\n"
      "fof(ax3, axiom, r(x2)).\n",
      "chain");
  CHECK(sine::sine_select(p, SineParams{1.0, 1}) == std::vector<std::string>{"ax1"});
  CHECK(sine::sine_select(p, SineParams{1.0, 2}) == std::vector<std::string>{"ax1", "ax2"});
  CHECK(sine::sine_select(p, SineParams{1.0, 0}) ==
        std::vector<std::string>{"ax1", "ax2", "ax3"});
}

TEST_CASE("monotone in tolerance and depth over random problems") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    fof::Problem p = random_problem(rng);
    double t1 = 1.0 + 3.0 * rng.uniform();
    double t2 = t1 + 3.0 * rng.uniform();
    int d = static_cast<int>(rng.uniform_index(4));
    CHECK(subset(select_set(p, t1, d), select_set(p, t2, d)));

    double t = 1.0 + 3.0 * rng.uniform();
    std::set<std::string> unbounded = select_set(p, t, 0);
    std::set<std::string> prev = select_set(p, t, 1);
    CHECK(subset(prev, unbounded));
    for (int depth = 2; depth <= 4; ++depth) {
      std::set<std::string> cur = select_set(p, t, depth);
      CHECK(subset(prev, cur));
      CHECK(subset(cur, unbounded));
      prev = cur;
    }
    // The fixpoint arrives within |axioms| rounds.
    CHECK(select_set(p, t, static_cast<int>(p.axioms.size())) == unbounded);
  }
}

TEST_CASE("parameter validation") {
  fof::Problem p = fixture();
  CHECK_THROWS_AS(sine::sine_select(p, SineParams{0.5, 1}), std::invalid_argument);
  CHECK_THROWS_AS(sine::sine_select(p, SineParams{1.0, -1}), std::invalid_argument);
}
