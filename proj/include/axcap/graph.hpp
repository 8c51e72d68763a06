#pragma once

// Conversion of parsed problems into directed typed graphs. Node types carry
// all the information the encoder sees; symbol names only participate in the
// construction-time sharing keys, so uniformly renaming symbols yields an
// identical graph.
//
// Shape of the encoding:
//   - one Conjecture root and one Axiom root per axiom, each pointing at its
//     formula subgraph (edges run parent -> child)
//   - connectives and quantifiers become nodes of their own type
//   - an application with arguments gets a fresh Predicate/Function node
//     whose arguments hang off a chain of ArgumentPosition nodes; the chain
//     is what preserves argument order
//   - equality uses the same chain encoding with an Equality node on top
//   - leaves are shared problem-wide: constants and zero-arity predicates by
//     (name, arity, kind), $true/$false globally
//   - each quantifier binding owns one Variable node referenced by every
//     occurrence of that bound variable

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "axcap/fof.hpp"

namespace axcap::graph {

enum class NodeType : int {
  Conjecture = 0,
  Axiom = 1,
  Forall = 2,
  Exists = 3,
  And = 4,
  Or = 5,
  Not = 6,
  Implies = 7,
  Iff = 8,
  Equality = 9,
  Predicate = 10,
  Function = 11,
  Constant = 12,
  Variable = 13,
  ArgumentPosition = 14,
  True = 15,
  False = 16,
};

inline constexpr int kNodeTypeCount = 17;

const char* node_type_name(NodeType t);

struct ProblemGraph {
  std::string problem_id;
  std::vector<NodeType> node_types;
  std::vector<std::pair<int, int>> edges;  // (src, dst), src is the parent
  int conjecture_node = -1;
  std::vector<int> axiom_nodes;  // aligned with Problem::axioms
  std::map<int, std::string> node_origin;  // root node -> formula name

  int node_count() const { return static_cast<int>(node_types.size()); }
};

ProblemGraph build_problem_graph(const fof::Problem& problem);

// Symmetric neighbor lists: deduplicated, self-loop free, each list sorted.
std::vector<std::vector<int>> undirected_view(const ProblemGraph& g);

// Creation order is a topological order by construction; this verifies it.
bool is_acyclic(const ProblemGraph& g);

// Text dump: "node <id> <type-code>" lines then "edge <src> <dst>" lines.
std::string to_text(const ProblemGraph& g);
ProblemGraph graph_from_text(const std::string& text, const std::string& id);

}  // namespace axcap::graph
