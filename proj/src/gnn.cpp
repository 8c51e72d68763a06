#include "axcap/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "axcap/rng.hpp"

namespace axcap::gnn {

namespace {

void validate_config(const GnnConfig& c) {
  if (c.dim < 1) throw std::invalid_argument("gnn config: dim must be positive");
  if (c.layers < 1) throw std::invalid_argument("gnn config: need at least one layer");
}

std::vector<int> all_node_ids(const graph::ProblemGraph& g) {
  std::vector<int> ids(static_cast<std::size_t>(g.node_count()));
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

std::vector<int> pooling_rows(const graph::ProblemGraph& g, Pooling mode) {
  switch (mode) {
    case Pooling::AllNodes:
      return all_node_ids(g);
    case Pooling::AxiomNodes:
      if (g.axiom_nodes.empty())
        throw std::invalid_argument("pool: AxiomNodes pooling on a graph without axioms");
      return g.axiom_nodes;
    case Pooling::ConjectureNode:
      return {g.conjecture_node};
  }
  throw std::invalid_argument("pool: unknown pooling mode");
}

// Snapshot/restore of parameter values only, for best-epoch rollback.
std::vector<num::Tensor2> snapshot(const std::vector<num::Parameter*>& params) {
  std::vector<num::Tensor2> values;
  values.reserve(params.size());
  for (const num::Parameter* p : params) values.push_back(p->value);
  return values;
}

void restore(const std::vector<num::Parameter*>& params, const std::vector<num::Tensor2>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

// Shared epoch driver: `step(i)` runs one optimizer step for train item i and
// returns its loss, `evaluate()` scores the validation set. Implements
// patience-based early stopping with best-weight restore.
TrainHistory run_epochs(GnnModel& m, std::size_t train_size, bool has_val,
                        const TrainConfig& cfg,
                        const std::function<double(std::size_t)>& step,
                        const std::function<double()>& evaluate) {
  if (train_size == 0) throw std::invalid_argument("train: empty dataset");
  if (cfg.max_epochs < 1) throw std::invalid_argument("train: max_epochs must be positive");
  if (cfg.patience < 0) throw std::invalid_argument("train: negative patience");

  Rng order_rng(cfg.seed);
  std::vector<std::size_t> order(train_size);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainHistory history;
  double best = 0.0;
  std::vector<num::Tensor2> best_values;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    order_rng.shuffle(order);
    double total = 0.0;
    for (std::size_t i : order) total += step(i);
    history.train_loss.push_back(total / static_cast<double>(train_size));
    if (has_val) history.val_loss.push_back(evaluate());

    double monitored = has_val ? history.val_loss.back() : history.train_loss.back();
    if (history.best_epoch < 0 || monitored < best) {
      best = monitored;
      history.best_epoch = epoch;
      best_values = snapshot(m.parameters());
    } else if (epoch - history.best_epoch >= cfg.patience) {
      break;
    }
  }
  restore(m.parameters(), best_values);
  return history;
}

bool plain_id(const std::string& id) {
  if (id.empty()) return false;
  for (char c : id)
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return false;
  return true;
}

}  // namespace

std::vector<num::Parameter*> GnnModel::parameters() {
  std::vector<num::Parameter*> out{&type_embeddings};
  for (num::Parameter& w : layer_weights) out.push_back(&w);
  if (config.supervised_head) {
    out.push_back(&head_weight);
    out.push_back(&head_bias);
  }
  return out;
}

std::vector<const num::Parameter*> GnnModel::parameters() const {
  std::vector<const num::Parameter*> out{&type_embeddings};
  for (const num::Parameter& w : layer_weights) out.push_back(&w);
  if (config.supervised_head) {
    out.push_back(&head_weight);
    out.push_back(&head_bias);
  }
  return out;
}

GnnModel make_gnn_model(const GnnConfig& config) {
  validate_config(config);
  GnnModel m;
  m.config = config;
  Rng root(config.seed);
  Rng emb_rng = root.substream("type_embeddings");
  m.type_embeddings = num::Parameter(
      "type_embeddings", num::uniform_init(graph::kNodeTypeCount, config.dim, -0.1, 0.1, emb_rng));
  for (int k = 0; k < config.layers; ++k) {
    std::string name = "layer" + std::to_string(k) + ".weight";
    Rng layer_rng = root.substream(name);
    m.layer_weights.emplace_back(name,
                                 num::uniform_init(config.dim, config.dim, -0.1, 0.1, layer_rng));
  }
  if (config.supervised_head) {
    Rng head_rng = root.substream("head.weight");
    m.head_weight = num::Parameter("head.weight",
                                   num::uniform_init(1, config.dim, -0.1, 0.1, head_rng));
    m.head_bias = num::Parameter("head.bias", num::Tensor2(1, 1));
  }
  return m;
}

num::RowCombination gcn_coefficients(const graph::ProblemGraph& g) {
  std::vector<std::vector<int>> nbrs = graph::undirected_view(g);
  std::vector<double> dhat(nbrs.size());
  for (std::size_t i = 0; i < nbrs.size(); ++i) dhat[i] = 1.0 + static_cast<double>(nbrs[i].size());

  num::RowCombination pattern(nbrs.size());
  for (std::size_t i = 0; i < nbrs.size(); ++i) {
    pattern[i].reserve(nbrs[i].size() + 1);
    pattern[i].emplace_back(static_cast<int>(i), 1.0 / dhat[i]);
    for (int j : nbrs[i]) pattern[i].emplace_back(j, 1.0 / std::sqrt(dhat[j] * dhat[i]));
  }
  return pattern;
}

num::Tensor2 gcn_layer_forward(const num::Tensor2& x, const graph::ProblemGraph& g,
                               const num::Tensor2& w) {
  if (x.rows != g.node_count())
    throw std::invalid_argument("gcn_layer_forward: feature rows != node count");
  if (w.cols != x.cols)
    throw std::invalid_argument("gcn_layer_forward: weight input dim != feature dim");
  num::Tape t;
  int y = t.matmul(t.combine_rows(t.leaf(x), gcn_coefficients(g)), t.transpose(t.leaf(w)));
  return t.val(y);
}

TapeModel bind(num::Tape& t, const GnnModel& m) {
  TapeModel tm;
  tm.type_embeddings = t.leaf(m.type_embeddings);
  for (const num::Parameter& w : m.layer_weights) tm.layer_weights.push_back(t.leaf(w));
  if (m.config.supervised_head) {
    tm.head_weight = t.leaf(m.head_weight);
    tm.head_bias = t.leaf(m.head_bias);
  }
  return tm;
}

int forward_nodes(num::Tape& t, const GnnModel& m, const TapeModel& tm,
                  const graph::ProblemGraph& g) {
  if (g.node_count() == 0) throw std::invalid_argument("forward_nodes: empty graph");
  std::vector<int> codes;
  codes.reserve(g.node_types.size());
  for (graph::NodeType ty : g.node_types) codes.push_back(static_cast<int>(ty));

  num::RowCombination pattern = gcn_coefficients(g);
  int x = t.gather_rows(tm.type_embeddings, codes);
  for (std::size_t k = 0; k < tm.layer_weights.size(); ++k) {
    x = t.matmul(t.combine_rows(x, pattern), t.transpose(tm.layer_weights[k]));
    if (k + 1 < tm.layer_weights.size()) x = t.tanh_of(x);
  }
  return x;
}

int pool_rows(num::Tape& t, int node_matrix, const graph::ProblemGraph& g, Pooling mode) {
  return t.mean_rows(node_matrix, pooling_rows(g, mode));
}

std::vector<double> pool(const num::Tensor2& x, const graph::ProblemGraph& g, Pooling mode) {
  if (x.rows != g.node_count())
    throw std::invalid_argument("pool: feature rows != node count");
  std::vector<int> rows = pooling_rows(g, mode);
  std::vector<double> out(static_cast<std::size_t>(x.cols), 0.0);
  for (int r : rows)
    for (int c = 0; c < x.cols; ++c) out[static_cast<std::size_t>(c)] += x.at(r, c);
  for (double& v : out) v /= static_cast<double>(rows.size());
  return out;
}

ProblemEmbedding embed_problem(const GnnModel& m, const graph::ProblemGraph& g,
                               AttendScope scope) {
  num::Tape t;
  TapeModel tm = bind(t, m);
  int nodes = forward_nodes(t, m, tm, g);
  int pooled = pool_rows(t, nodes, g, m.config.pooling);

  ProblemEmbedding e;
  e.problem_id = g.problem_id;
  e.pooled = t.val(pooled).data;
  if (scope == AttendScope::AllNodes) {
    e.attended_nodes = all_node_ids(g);
  } else {
    e.attended_nodes.push_back(g.conjecture_node);
    e.attended_nodes.insert(e.attended_nodes.end(), g.axiom_nodes.begin(), g.axiom_nodes.end());
  }
  e.node_matrix = t.val(t.gather_rows(nodes, e.attended_nodes));
  return e;
}

int supervised_loss(num::Tape& t, const GnnModel& m, const TapeModel& tm,
                    const SupervisedExample& ex) {
  if (!m.config.supervised_head)
    throw std::invalid_argument("supervised_loss: model has no supervised head");
  if (ex.graph.axiom_nodes.empty())
    throw std::invalid_argument("supervised_loss: graph without axioms: " + ex.graph.problem_id);
  if (ex.labels.size() != ex.graph.axiom_nodes.size())
    throw std::invalid_argument("supervised_loss: labels misaligned with axioms: " +
                                ex.graph.problem_id);
  int nodes = forward_nodes(t, m, tm, ex.graph);
  int axioms = t.gather_rows(nodes, ex.graph.axiom_nodes);
  int logits = t.add(t.matmul(axioms, t.transpose(tm.head_weight)), tm.head_bias);
  num::Tensor2 targets(static_cast<int>(ex.labels.size()), 1);
  targets.data = ex.labels;
  return t.sigmoid_bce(logits, targets);
}

int siamese_loss(num::Tape& t, const GnnModel& m, const TapeModel& tm,
                 const graph::ProblemGraph& left, const graph::ProblemGraph& right,
                 double distance) {
  int el = pool_rows(t, forward_nodes(t, m, tm, left), left, m.config.pooling);
  int er = pool_rows(t, forward_nodes(t, m, tm, right), right, m.config.pooling);
  int gap = t.add_const(t.l2_norm(t.sub(el, er)), -distance);
  return t.square(gap);
}

TrainHistory train_supervised(GnnModel& m, const std::vector<SupervisedExample>& train,
                              const std::vector<SupervisedExample>& val,
                              const TrainConfig& cfg) {
  if (!m.config.supervised_head)
    throw std::invalid_argument("train_supervised: model has no supervised head");
  for (const std::vector<SupervisedExample>* set : {&train, &val})
    for (const SupervisedExample& ex : *set) {
      if (ex.graph.axiom_nodes.empty())
        throw std::invalid_argument("train_supervised: example without axioms: " +
                                    ex.graph.problem_id);
      if (ex.labels.size() != ex.graph.axiom_nodes.size())
        throw std::invalid_argument("train_supervised: labels misaligned with axioms: " +
                                    ex.graph.problem_id);
    }

  std::vector<num::Parameter*> params = m.parameters();
  auto example_loss = [&](const SupervisedExample& ex, bool with_grad) {
    num::Tape t;
    TapeModel tm = bind(t, m);
    int loss = supervised_loss(t, m, tm, ex);
    if (with_grad) {
      t.backward(loss);
      m.type_embeddings.grad = t.grad(tm.type_embeddings);
      for (std::size_t k = 0; k < m.layer_weights.size(); ++k)
        m.layer_weights[k].grad = t.grad(tm.layer_weights[k]);
      m.head_weight.grad = t.grad(tm.head_weight);
      m.head_bias.grad = t.grad(tm.head_bias);
    }
    return t.val(loss).at(0, 0);
  };

  return run_epochs(
      m, train.size(), !val.empty(), cfg,
      [&](std::size_t i) {
        double loss = example_loss(train[i], true);
        num::adam_step(params, cfg.learning_rate);
        return loss;
      },
      [&] {
        double total = 0.0;
        for (const SupervisedExample& ex : val) total += example_loss(ex, false);
        return total / static_cast<double>(val.size());
      });
}

TrainHistory train_unsupervised(GnnModel& m, const std::vector<graph::ProblemGraph>& graphs,
                                const std::vector<spectral::GraphPair>& train,
                                const std::vector<spectral::GraphPair>& val,
                                const TrainConfig& cfg) {
  int n = static_cast<int>(graphs.size());
  for (const std::vector<spectral::GraphPair>* set : {&train, &val})
    for (const spectral::GraphPair& p : *set)
      if (p.left < 0 || p.left >= n || p.right < 0 || p.right >= n)
        throw std::invalid_argument("train_unsupervised: pair index out of range");

  std::vector<num::Parameter*> params = m.parameters();
  auto pair_loss = [&](const spectral::GraphPair& p, bool with_grad) {
    num::Tape t;
    TapeModel tm = bind(t, m);
    int loss = siamese_loss(t, m, tm, graphs[p.left], graphs[p.right], p.distance);
    if (with_grad) {
      t.backward(loss);
      m.type_embeddings.grad = t.grad(tm.type_embeddings);
      for (std::size_t k = 0; k < m.layer_weights.size(); ++k)
        m.layer_weights[k].grad = t.grad(tm.layer_weights[k]);
    }
    return t.val(loss).at(0, 0);
  };

  return run_epochs(
      m, train.size(), !val.empty(), cfg,
      [&](std::size_t i) {
        double loss = pair_loss(train[i], true);
        num::adam_step(params, cfg.learning_rate);
        return loss;
      },
      [&] {
        double total = 0.0;
        for (const spectral::GraphPair& p : val) total += pair_loss(p, false);
        return total / static_cast<double>(val.size());
      });
}

void save_embedding_store(std::ostream& out, const std::vector<ProblemEmbedding>& embeddings,
                          const std::vector<std::string>& header_comments) {
  for (const std::string& c : header_comments) out << "# " << c << "\n";
  for (const ProblemEmbedding& e : embeddings) {
    if (!plain_id(e.problem_id))
      throw std::invalid_argument("embedding store: id empty or contains whitespace: \"" +
                                  e.problem_id + "\"");
    out << e.problem_id << ' ' << e.pooled.size();
    for (double v : e.pooled) out << ' ' << num::format_double(v);
    out << '\n';
  }
  if (!out) throw std::runtime_error("embedding store: write failed");
}

std::vector<ProblemEmbedding> load_embedding_store(std::istream& in) {
  std::vector<ProblemEmbedding> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    ProblemEmbedding e;
    std::size_t n = 0;
    if (!(row >> e.problem_id >> n))
      throw std::runtime_error("embedding store: bad record at line " + std::to_string(lineno));
    e.pooled.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      if (!(row >> e.pooled[i]))
        throw std::runtime_error("embedding store: truncated record at line " +
                                 std::to_string(lineno));
    std::string extra;
    if (row >> extra)
      throw std::runtime_error("embedding store: trailing data at line " + std::to_string(lineno));
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace axcap::gnn
