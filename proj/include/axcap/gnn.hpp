#pragma once

// Graph convolutional encoder over problem graphs. Node features start as
// type embeddings (one learned row per node type), pass through a stack of
// normalized-adjacency convolutions with tanh between layers, and collapse
// into a single problem vector by mean pooling. Two pre-training routes
// share the encoder: a supervised one that classifies axiom nodes as
// proof-relevant, and an unsupervised Siamese one that regresses the
// Laplacian spectral distance between graph pairs.
//
// Forward passes over distinct graphs are safe to run concurrently on a
// const model; training mutates parameters and is single-threaded.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "axcap/graph.hpp"
#include "axcap/num.hpp"
#include "axcap/spectral.hpp"

namespace axcap::gnn {

enum class Pooling { AllNodes, AxiomNodes, ConjectureNode };

// Which rows of the final node matrix an embedding keeps for attention:
// every node, or just the conjecture and axiom roots.
enum class AttendScope { AllNodes, FormulaRoots };

struct GnnConfig {
  int dim = 64;
  int layers = 2;
  Pooling pooling = Pooling::AllNodes;
  bool supervised_head = false;
  std::uint64_t seed = 0;
};

struct GnnModel {
  GnnConfig config;
  num::Parameter type_embeddings;             // kNodeTypeCount x dim
  std::vector<num::Parameter> layer_weights;  // each dim x dim, applied as W * x
  num::Parameter head_weight;                 // 1 x dim, supervised head only
  num::Parameter head_bias;                   // 1 x 1

  std::vector<num::Parameter*> parameters();
  std::vector<const num::Parameter*> parameters() const;
};

GnnModel make_gnn_model(const GnnConfig& config);

// Message-passing pattern for one convolution over the undirected view:
// row i mixes neighbor j with weight 1/sqrt(dj*di) and itself with 1/di,
// where the degrees count the self-loop (di = 1 + |N(i)|).
num::RowCombination gcn_coefficients(const graph::ProblemGraph& g);

// One convolution without the nonlinearity: X' = (normalized adjacency) X W^T
// for weight w of shape (out x in). x must have one row per graph node.
num::Tensor2 gcn_layer_forward(const num::Tensor2& x, const graph::ProblemGraph& g,
                               const num::Tensor2& w);

// Tape handles for one bound copy of the model parameters.
struct TapeModel {
  int type_embeddings = -1;
  std::vector<int> layer_weights;
  int head_weight = -1;
  int head_bias = -1;
};

TapeModel bind(num::Tape& t, const GnnModel& m);

// Full encoder stack: gathers type embeddings by node type, then runs every
// layer with tanh between layers and none after the last. Returns the tape
// id of the (#nodes x dim) matrix.
int forward_nodes(num::Tape& t, const GnnModel& m, const TapeModel& tm,
                  const graph::ProblemGraph& g);

// Mean over the pooling-mode rows (the conjecture row alone for
// ConjectureNode). AxiomNodes requires at least one axiom.
int pool_rows(num::Tape& t, int node_matrix, const graph::ProblemGraph& g, Pooling mode);
std::vector<double> pool(const num::Tensor2& x, const graph::ProblemGraph& g, Pooling mode);

struct ProblemEmbedding {
  std::string problem_id;
  std::vector<double> pooled;
  // Post-encoder rows kept for attention, one per attended node; absent on
  // records read back from an embedding store.
  std::optional<num::Tensor2> node_matrix;
  std::vector<int> attended_nodes;  // graph node ids behind node_matrix rows
};

ProblemEmbedding embed_problem(const GnnModel& m, const graph::ProblemGraph& g,
                               AttendScope scope = AttendScope::FormulaRoots);

struct TrainConfig {
  double learning_rate = 0.001;
  int max_epochs = 50;
  // Epochs allowed without improvement of the monitored loss (validation
  // when present, else training) before stopping; best weights win.
  int patience = 5;
  std::uint64_t seed = 0;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;  // empty when no validation set was given
  int best_epoch = -1;
};

struct SupervisedExample {
  graph::ProblemGraph graph;
  // One label in {0,1} per axiom, aligned with graph.axiom_nodes; 1 means
  // the axiom occurs in the proof.
  std::vector<double> labels;
};

// Tape-level objectives, exposed so gradient checks exercise exactly what
// the trainers optimize. supervised_loss is the mean sigmoid cross entropy
// of the head applied to every axiom row; siamese_loss is the squared gap
// between the pooled-embedding distance and the target distance.
int supervised_loss(num::Tape& t, const GnnModel& m, const TapeModel& tm,
                    const SupervisedExample& ex);
int siamese_loss(num::Tape& t, const GnnModel& m, const TapeModel& tm,
                 const graph::ProblemGraph& left, const graph::ProblemGraph& right,
                 double distance);

// Binary cross entropy of sigmoid(head(x'_axiom)) over every axiom node,
// one Adam step per example in shuffled order. Requires the model to carry
// a supervised head.
TrainHistory train_supervised(GnnModel& m, const std::vector<SupervisedExample>& train,
                              const std::vector<SupervisedExample>& val,
                              const TrainConfig& cfg);

// Siamese spectral regression: mean ((||e_left - e_right|| - distance)^2)
// with the encoder shared across both branches. Pairs index into `graphs`.
TrainHistory train_unsupervised(GnnModel& m, const std::vector<graph::ProblemGraph>& graphs,
                                const std::vector<spectral::GraphPair>& train,
                                const std::vector<spectral::GraphPair>& val,
                                const TrainConfig& cfg);

// Textual embedding store, one record per line: "<id> <n> <v1> ... <vn>".
// Lines starting with '#' are comments. Ids must be nonempty and free of
// whitespace. Node matrices are not stored.
void save_embedding_store(std::ostream& out, const std::vector<ProblemEmbedding>& embeddings,
                          const std::vector<std::string>& header_comments = {});
std::vector<ProblemEmbedding> load_embedding_store(std::istream& in);

}  // namespace axcap::gnn
