#include "axcap/sine.hpp"

#include <algorithm>
#include <stdexcept>

namespace axcap::sine {

namespace {

void validate(const SineParams& p) {
  if (!(p.tolerance >= 1.0))
    throw std::invalid_argument("sine: tolerance must be at least 1");
  if (p.depth < 0) throw std::invalid_argument("sine: depth must be non-negative");
}

}  // namespace

std::map<fof::SymbolKey, std::set<std::string>> trigger_relation(
    const std::map<fof::SymbolKey, long>& occ, std::span<const fof::AnnotatedFormula> axioms,
    double tolerance) {
  std::map<fof::SymbolKey, std::set<std::string>> triggers;
  for (const fof::AnnotatedFormula& axiom : axioms) {
    std::map<fof::SymbolKey, long> local = fof::symbol_occurrences(axiom);
    if (local.empty()) continue;
    long least = 0;
    bool first = true;
    for (const auto& [sym, count] : local) {
      auto it = occ.find(sym);
      if (it == occ.end())
        throw std::invalid_argument("sine: occurrence map is missing symbol " + sym.name);
      least = first ? it->second : std::min(least, it->second);
      first = false;
    }
    for (const auto& [sym, count] : local)
      if (static_cast<double>(occ.at(sym)) <= tolerance * static_cast<double>(least))
        triggers[sym].insert(axiom.name);
  }
  return triggers;
}

std::vector<std::string> sine_select(const fof::Problem& problem, const SineParams& params) {
  validate(params);
  const std::vector<fof::AnnotatedFormula>& axioms = problem.axioms;
  std::map<fof::SymbolKey, long> occ = fof::symbol_occurrences(axioms);
  std::map<fof::SymbolKey, std::set<std::string>> triggers =
      trigger_relation(occ, axioms, params.tolerance);

  std::map<std::string, std::size_t> index_of;
  std::vector<std::map<fof::SymbolKey, long>> axiom_symbols(axioms.size());
  for (std::size_t i = 0; i < axioms.size(); ++i) {
    index_of[axioms[i].name] = i;
    axiom_symbols[i] = fof::symbol_occurrences(axioms[i]);
  }

  std::set<fof::SymbolKey> reachable;
  for (const auto& [sym, count] : fof::symbol_occurrences(problem.conjecture))
    reachable.insert(sym);

  std::vector<bool> selected(axioms.size(), false);
  // Every productive round selects at least one new axiom, so the fixpoint
  // arrives within |axioms| rounds.
  std::size_t max_rounds = params.depth == 0 ? axioms.size() + 1
                                             : static_cast<std::size_t>(params.depth);
  for (std::size_t round = 0; round < max_rounds; ++round) {
    std::vector<std::size_t> fresh;
    if (round == 0)
      for (std::size_t i = 0; i < axioms.size(); ++i)
        if (axiom_symbols[i].empty()) {
          selected[i] = true;
          fresh.push_back(i);
        }
    for (const fof::SymbolKey& sym : reachable) {
      auto it = triggers.find(sym);
      if (it == triggers.end()) continue;
      for (const std::string& name : it->second) {
        std::size_t i = index_of.at(name);
        if (!selected[i]) {
          selected[i] = true;
          fresh.push_back(i);
        }
      }
    }
    if (fresh.empty()) break;
    for (std::size_t i : fresh)
      for (const auto& [sym, count] : axiom_symbols[i]) reachable.insert(sym);
  }

  std::vector<std::string> out;
  for (std::size_t i = 0; i < axioms.size(); ++i)
    if (selected[i]) out.push_back(axioms[i].name);
  return out;
}

}  // namespace axcap::sine
