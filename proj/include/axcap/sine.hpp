#pragma once

// Symbol-based axiom selection. Starting from the conjecture's symbols, the
// selector repeatedly adds axioms triggered by a reachable symbol and folds
// the new axioms' symbols back into the reachable set. A symbol triggers an
// axiom when its global occurrence count (over the problem's axioms) is
// within a tolerance factor of the axiom's least-occurring symbol.

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "axcap/fof.hpp"

namespace axcap::sine {

struct SineParams {
  double tolerance = 1.0;  // t >= 1; larger tolerates more common symbols
  int depth = 1;           // rounds of expansion; 0 runs to the fixpoint
};

// Which axioms each symbol triggers: s triggers a iff
// occ(s) <= tolerance * min over a's symbols s' of occ(s'). Symbol-free
// axioms appear in no trigger set; sine_select adds them unconditionally.
// occ must cover every symbol of the given axioms.
std::map<fof::SymbolKey, std::set<std::string>> trigger_relation(
    const std::map<fof::SymbolKey, long>& occ, std::span<const fof::AnnotatedFormula> axioms,
    double tolerance);

// Names of the selected axioms in their original problem order. Occurrence
// counts are taken over the problem's axioms only; the conjecture seeds the
// reachable symbol set but never counts.
std::vector<std::string> sine_select(const fof::Problem& problem, const SineParams& params);

}  // namespace axcap::sine
