#include "axcap/graph.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

namespace axcap::graph {

const char* node_type_name(NodeType t) {
  switch (t) {
    case NodeType::Conjecture: return "Conjecture";
    case NodeType::Axiom: return "Axiom";
    case NodeType::Forall: return "Forall";
    case NodeType::Exists: return "Exists";
    case NodeType::And: return "And";
    case NodeType::Or: return "Or";
    case NodeType::Not: return "Not";
    case NodeType::Implies: return "Implies";
    case NodeType::Iff: return "Iff";
    case NodeType::Equality: return "Equality";
    case NodeType::Predicate: return "Predicate";
    case NodeType::Function: return "Function";
    case NodeType::Constant: return "Constant";
    case NodeType::Variable: return "Variable";
    case NodeType::ArgumentPosition: return "ArgumentPosition";
    case NodeType::True: return "True";
    case NodeType::False: return "False";
  }
  return "?";
}

namespace {

class Builder {
 public:
  explicit Builder(const fof::Problem& problem) { build(problem); }

  ProblemGraph take() { return std::move(g_); }

 private:
  void build(const fof::Problem& problem) {
    g_.problem_id = problem.id;
    g_.conjecture_node = fresh(NodeType::Conjecture);
    g_.node_origin[g_.conjecture_node] = problem.conjecture.name;
    edge(g_.conjecture_node, visit_formula(*problem.conjecture.formula));
    for (const auto& ax : problem.axioms) {
      int root = fresh(NodeType::Axiom);
      g_.axiom_nodes.push_back(root);
      g_.node_origin[root] = ax.name;
      edge(root, visit_formula(*ax.formula));
    }
  }

  int fresh(NodeType t) {
    g_.node_types.push_back(t);
    return static_cast<int>(g_.node_types.size()) - 1;
  }

  void edge(int src, int dst) { g_.edges.emplace_back(src, dst); }

  // Leaves are shared problem-wide by symbol key; everything with arguments
  // is a node per occurrence.
  int leaf(const fof::SymbolKey& key, NodeType t) {
    auto it = shared_.find(key);
    if (it != shared_.end()) return it->second;
    int id = fresh(t);
    shared_.emplace(key, id);
    return id;
  }

  int bool_leaf(bool value) {
    int& slot = value ? true_node_ : false_node_;
    if (slot < 0) slot = fresh(value ? NodeType::True : NodeType::False);
    return slot;
  }

  // Argument chain: parent -> pos1, pos_i -> value_i, pos_i -> pos_{i+1}.
  void attach_args(int parent, const std::vector<fof::Term>& args) {
    int prev = -1;
    for (std::size_t i = 0; i < args.size(); ++i) {
      int pos = fresh(NodeType::ArgumentPosition);
      edge(i == 0 ? parent : prev, pos);
      edge(pos, visit_term(args[i]));
      prev = pos;
    }
  }

  int visit_term(const fof::Term& t) {
    if (auto* v = std::get_if<fof::Term::Variable>(&t.node)) {
      for (auto it = bindings_.rbegin(); it != bindings_.rend(); ++it) {
        if (it->first == v->name) return it->second;
      }
      throw std::logic_error("graph: unbound variable " + v->name);
    }
    const auto& app = std::get<fof::Term::Application>(t.node);
    if (app.args.empty()) {
      return leaf(fof::SymbolKey{app.symbol, 0, fof::SymbolKind::Function},
                  NodeType::Constant);
    }
    int node = fresh(NodeType::Function);
    attach_args(node, app.args);
    return node;
  }

  int visit_formula(const fof::Formula& f) {
    return std::visit(
        [this](const auto& n) -> int {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, fof::Formula::Atom>) {
            if (n.args.empty()) {
              return leaf(fof::SymbolKey{n.symbol, 0, fof::SymbolKind::Predicate},
                          NodeType::Predicate);
            }
            int node = fresh(NodeType::Predicate);
            attach_args(node, n.args);
            return node;
          } else if constexpr (std::is_same_v<T, fof::Formula::Equal>) {
            int node = fresh(NodeType::Equality);
            attach_args(node, {n.lhs, n.rhs});
            return node;
          } else if constexpr (std::is_same_v<T, fof::Formula::Negation>) {
            int node = fresh(NodeType::Not);
            edge(node, visit_formula(*n.child));
            return node;
          } else if constexpr (std::is_same_v<T, fof::Formula::Binary>) {
            NodeType t = NodeType::And;
            switch (n.op) {
              case fof::Connective::And: t = NodeType::And; break;
              case fof::Connective::Or: t = NodeType::Or; break;
              case fof::Connective::Implies: t = NodeType::Implies; break;
              case fof::Connective::Iff: t = NodeType::Iff; break;
            }
            int node = fresh(t);
            edge(node, visit_formula(*n.lhs));
            edge(node, visit_formula(*n.rhs));
            return node;
          } else if constexpr (std::is_same_v<T, fof::Formula::Quantified>) {
            int node = fresh(n.quant == fof::Quantifier::Forall ? NodeType::Forall
                                                                : NodeType::Exists);
            int var = fresh(NodeType::Variable);
            edge(node, var);
            bindings_.emplace_back(n.variable, var);
            edge(node, visit_formula(*n.body));
            bindings_.pop_back();
            return node;
          } else {
            return bool_leaf(n.value);
          }
        },
        f.node);
  }

  ProblemGraph g_;
  std::map<fof::SymbolKey, int> shared_;
  std::vector<std::pair<std::string, int>> bindings_;  // stack, shadowing-aware
  int true_node_ = -1;
  int false_node_ = -1;
};

}  // namespace

ProblemGraph build_problem_graph(const fof::Problem& problem) {
  return Builder(problem).take();
}

std::vector<std::vector<int>> undirected_view(const ProblemGraph& g) {
  std::vector<std::set<int>> nbr(g.node_count());
  for (auto [s, d] : g.edges) {
    if (s == d) continue;
    nbr[s].insert(d);
    nbr[d].insert(s);
  }
  std::vector<std::vector<int>> out(g.node_count());
  for (int i = 0; i < g.node_count(); ++i) out[i].assign(nbr[i].begin(), nbr[i].end());
  return out;
}

bool is_acyclic(const ProblemGraph& g) {
  // Edges must point from lower to higher creation index only if the builder
  // laid parents out first, which it does not guarantee for shared leaves.
  // Run a proper DFS instead.
  enum { White, Grey, Black };
  std::vector<int> color(g.node_count(), White);
  std::vector<std::vector<int>> adj(g.node_count());
  for (auto [s, d] : g.edges) adj[s].push_back(d);

  std::vector<std::pair<int, std::size_t>> stack;
  for (int start = 0; start < g.node_count(); ++start) {
    if (color[start] != White) continue;
    stack.emplace_back(start, 0);
    color[start] = Grey;
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < adj[node].size()) {
        int child = adj[node][next++];
        if (color[child] == Grey) return false;
        if (color[child] == White) {
          color[child] = Grey;
          stack.emplace_back(child, 0);
        }
      } else {
        color[node] = Black;
        stack.pop_back();
      }
    }
  }
  return true;
}

std::string to_text(const ProblemGraph& g) {
  std::ostringstream out;
  for (int i = 0; i < g.node_count(); ++i)
    out << "node " << i << " " << static_cast<int>(g.node_types[i]) << "\n";
  for (auto [s, d] : g.edges) out << "edge " << s << " " << d << "\n";
  return out.str();
}

ProblemGraph graph_from_text(const std::string& text, const std::string& id) {
  ProblemGraph g;
  g.problem_id = id;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "node") {
      int idx = -1, code = -1;
      ls >> idx >> code;
      if (ls.fail() || idx != g.node_count() || code < 0 || code >= kNodeTypeCount)
        throw std::runtime_error("graph text: bad node line: " + line);
      g.node_types.push_back(static_cast<NodeType>(code));
      if (code == static_cast<int>(NodeType::Conjecture) && g.conjecture_node < 0)
        g.conjecture_node = idx;
      if (code == static_cast<int>(NodeType::Axiom)) g.axiom_nodes.push_back(idx);
    } else if (tag == "edge") {
      int s = -1, d = -1;
      ls >> s >> d;
      if (ls.fail() || s < 0 || s >= g.node_count() || d < 0 || d >= g.node_count())
        throw std::runtime_error("graph text: bad edge line: " + line);
      g.edges.emplace_back(s, d);
    } else {
      throw std::runtime_error("graph text: unknown line: " + line);
    }
  }
  return g;
}

}  // namespace axcap::graph
