#pragma once

// LSTM caption decoder over axiom tokens. The problem embedding is injected
// at every step (par-inject): the LSTM input is the token embedding
// concatenated with the pooled problem vector, optionally extended with an
// attention context. Attention comes in three flavors over the retained
// per-node rows:
//
//   Bahdanau     score_i = V^T tanh(W1 I_i + W2 h_{t-1});  the context joins
//                the LSTM *input* of the current step
//   LuongDot     score_i = h_t^T (P I_i), P learned only when the problem
//                dimension differs from the hidden size
//   LuongConcat  score_i = V^T tanh(W [I_i; h_t])
//
// Luong-style contexts are computed from the LSTM *output* and [h_t; c_t]
// feeds the dense stack. Weights are softmax(scores); the context is their
// weighted row sum.
//
// Inference on a frozen model is thread-safe; training is single-threaded.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "axcap/gnn.hpp"
#include "axcap/num.hpp"
#include "axcap/rng.hpp"

namespace axcap::cap {

// Hard cap on axioms per caption; sequences carry two extra slots for the
// start and end markers.
inline constexpr int kMaxAxioms = 20;
inline constexpr int kMaxSequence = kMaxAxioms + 2;

// Token ids 0..3 are reserved; real axioms start at 4.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kStart = 1;
  static constexpr int kEnd = 2;
  static constexpr int kUnknown = 3;
  static constexpr int kReservedCount = 4;

  Vocabulary() = default;
  // Axiom names in id order; ids kReservedCount.. are assigned as given.
  explicit Vocabulary(const std::vector<std::string>& names);

  int size() const { return kReservedCount + static_cast<int>(names_.size()); }
  int id_of(std::string_view name) const;  // kUnknown when absent
  const std::string& name_of(int id) const;
  static bool is_reserved(int id) { return id >= 0 && id < kReservedCount; }

 private:
  std::vector<std::string> names_;
  std::map<std::string, int, std::less<>> ids_;
};

// One line per token: "id<TAB>name", ids dense from 0, reserved names
// <pad> <start> <end> <unk> at their fixed ids.
void save_vocabulary(std::ostream& out, const Vocabulary& v);
Vocabulary load_vocabulary(std::istream& in);

struct AxiomSequence {
  std::string problem_id;
  std::vector<int> tokens;  // <start, s_1..s_m, end>, m <= kMaxAxioms
};

// Throws invalid_argument unless tokens start with kStart, end with kEnd,
// keep every interior token an axiom id or kUnknown, and fit kMaxSequence.
void validate_sequence(const AxiomSequence& s, int vocab_size);

// Builds the wrapped token sequence for a list of positive axiom names,
// mapping out-of-vocabulary names to kUnknown.
AxiomSequence make_sequence(const std::string& problem_id,
                            const std::vector<std::string>& axiom_names,
                            const Vocabulary& vocab);

enum class AttentionStyle { None, Bahdanau, LuongDot, LuongConcat };

struct CaptionConfig {
  int vocab_size = 0;       // |Omega|, including the reserved tokens
  int problem_dim = 64;     // n, width of the injected problem vector
  int embedding_dim = 50;
  int lstm_units = 32;
  int dense_units = 512;
  AttentionStyle attention = AttentionStyle::None;
  bool feature_normalization = true;  // L2-normalize the pooled vector
  double dropout = 0.1;               // at the dense-stack input, train only
  std::uint64_t seed = 0;
};

struct CaptionModel {
  CaptionConfig config;
  num::Parameter token_embedding;  // vocab_size x embedding_dim

  struct Gate {
    num::Parameter w;  // lstm_units x lstm_input
    num::Parameter u;  // lstm_units x lstm_units
    num::Parameter b;  // 1 x lstm_units
  };
  Gate input, forget, cell, output;

  num::Parameter dense_w;  // dense_units x dense_input
  num::Parameter dense_b;  // 1 x dense_units
  num::Parameter out_w;    // vocab_size x dense_units
  num::Parameter out_b;    // 1 x vocab_size

  num::Parameter att_w1;  // Bahdanau: lstm_units x problem_dim
  num::Parameter att_w2;  // Bahdanau: lstm_units x lstm_units
  num::Parameter att_w;   // LuongConcat: lstm_units x (problem_dim + lstm_units)
  num::Parameter att_v;   // Bahdanau / LuongConcat: lstm_units x 1
  num::Parameter att_p;   // LuongDot: lstm_units x problem_dim, only if dims differ

  int lstm_input_size() const;
  int dense_input_size() const;
  bool has_dot_projection() const;

  std::vector<num::Parameter*> parameters();
  std::vector<const num::Parameter*> parameters() const;
};

// Forget-gate biases start at 1, every other weight uniform in [-0.1, 0.1].
CaptionModel make_caption_model(const CaptionConfig& config);

// The injected vector: the pooled embedding, L2-normalized when the config
// asks for it (zero vectors pass through unchanged).
num::Tensor2 injected_problem_vector(const CaptionModel& m, const gnn::ProblemEmbedding& e);

// Tape handles for one bound copy of the parameters; weight transposes are
// hoisted here so repeated steps on one tape share them. param_leaves holds
// the raw leaf ids in CaptionModel::parameters() order, for gradient
// extraction after backward().
struct TapeCaption {
  int token_embedding = -1;
  struct GateIds {
    int w_t = -1, u_t = -1, b = -1;
  };
  GateIds input, forget, cell, output;
  int dense_w_t = -1, dense_b = -1;
  int out_w_t = -1, out_b = -1;
  int att_w1_t = -1, att_w2_t = -1, att_w_t = -1, att_v = -1, att_p_t = -1;
  std::vector<int> param_leaves;
};

TapeCaption bind_captioner(num::Tape& t, const CaptionModel& m);

// Attention over element rows given an hidden-state row; returns the context
// (1 x problem_dim) and the weights (1 x #elements). Style comes from the
// model config and must not be None.
struct AttentionOut {
  int context = -1;
  int alpha = -1;
};
AttentionOut attention_context(num::Tape& t, const CaptionModel& m, const TapeCaption& tc,
                               int elements, int h);
// Value-level wrapper: (context, weights).
std::pair<std::vector<double>, std::vector<double>> attention_context(
    const CaptionModel& m, const num::Tensor2& elements, const std::vector<double>& h);

struct TapeState {
  int h = -1;     // 1 x lstm_units
  int cell = -1;  // 1 x lstm_units
};

struct TapeStep {
  int probs = -1;   // 1 x vocab_size, softmax output
  int logits = -1;  // 1 x vocab_size, pre-softmax
  int alpha = -1;   // attention weights, -1 when attention is None
  TapeState state;
};

// One decoder step on the tape. problem_vec is the injected vector's node;
// node_matrix is the attended-rows node or -1 (required iff attention is on).
// rng is only consulted when train is true and dropout > 0.
TapeStep caption_step(num::Tape& t, const CaptionModel& m, const TapeCaption& tc, int token,
                      TapeState state, int problem_vec, int node_matrix, bool train, Rng* rng);

TapeState initial_state(num::Tape& t, const CaptionModel& m);

// Teacher-forced sum of -log p(target) over the sequence (scored steps:
// every token after <start>).
int caption_loss(num::Tape& t, const CaptionModel& m, const TapeCaption& tc,
                 const gnn::ProblemEmbedding& e, const AxiomSequence& s, bool train, Rng* rng);

struct DecoderState {
  std::vector<double> h;
  std::vector<double> cell;
  int t = 0;
};

DecoderState initial_state(const CaptionModel& m);

// Value-level step: next-token distribution and the advanced state.
std::pair<std::vector<double>, DecoderState> forward_step(const CaptionModel& m, int token,
                                                          const DecoderState& state,
                                                          const gnn::ProblemEmbedding& e,
                                                          bool train = false, Rng* rng = nullptr);

// Dropout-free loss of one sequence, as summed by caption_loss.
double teacher_forced_loss(const CaptionModel& m, const gnn::ProblemEmbedding& e,
                           const AxiomSequence& s);

struct CaptionExample {
  gnn::ProblemEmbedding embedding;
  AxiomSequence sequence;
};

struct CaptionTrainConfig {
  double learning_rate = 0.001;
  int batch_size = 64;
  int max_epochs = 80;
  int patience = 5;  // non-improving validation epochs tolerated
  int decode_n = 2;  // greedy width for the per-epoch metrics
  std::uint64_t seed = 0;
};

struct CaptionHistory {
  std::vector<double> train_loss;  // mean per-step cross entropy
  std::vector<double> val_loss;
  // Greedy-decode metrics per epoch; coverage averages only problems with a
  // nonempty ground-truth set.
  std::vector<double> train_jaccard, train_coverage;
  std::vector<double> val_jaccard, val_coverage;
  int best_epoch = -1;
};

// Minibatch Adam with teacher forcing; batch loss is the summed step loss
// divided by the number of scored steps. Early stopping watches validation
// loss and restores the best weights; both splits must be nonempty.
// Deterministic for a fixed config seed.
CaptionHistory train_captioner(CaptionModel& m, const std::vector<CaptionExample>& train,
                               const std::vector<CaptionExample>& val,
                               const CaptionTrainConfig& cfg);

}  // namespace axcap::cap
