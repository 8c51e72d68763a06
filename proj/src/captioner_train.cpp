#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include "axcap/captioner.hpp"
#include "axcap/decoder.hpp"
#include "axcap/metrics.hpp"

namespace axcap::cap {

namespace {

int scored_steps(const AxiomSequence& s) { return static_cast<int>(s.tokens.size()) - 1; }

// Ground truth for the decode metrics: interior axiom ids. <unk> stands for
// axioms outside the vocabulary and never counts as matchable truth.
std::set<int> truth_set(const AxiomSequence& s) {
  std::set<int> out;
  for (std::size_t i = 1; i + 1 < s.tokens.size(); ++i)
    if (!Vocabulary::is_reserved(s.tokens[i])) out.insert(s.tokens[i]);
  return out;
}

struct SetScores {
  double jaccard = 0.0;
  double coverage = 0.0;
};

SetScores decode_scores(const CaptionModel& m, const std::vector<CaptionExample>& set, int n) {
  double jac = 0.0, cov = 0.0;
  int covered = 0;
  Rng scratch(0);  // greedy decoding consumes no randomness
  for (const CaptionExample& ex : set) {
    dec::DecodeResult r = dec::decode(m, ex.embedding, dec::Greedy{n}, scratch);
    std::set<int> predicted(r.selection.begin(), r.selection.end());
    std::set<int> truth = truth_set(ex.sequence);
    jac += metrics::jaccard(predicted, truth);
    if (std::optional<double> c = metrics::coverage(predicted, truth)) {
      cov += *c;
      ++covered;
    }
  }
  SetScores s;
  s.jaccard = jac / static_cast<double>(set.size());
  s.coverage = covered > 0 ? cov / covered : 0.0;
  return s;
}

double mean_step_loss(const CaptionModel& m, const std::vector<CaptionExample>& set) {
  double total = 0.0;
  int steps = 0;
  for (const CaptionExample& ex : set) {
    total += teacher_forced_loss(m, ex.embedding, ex.sequence);
    steps += scored_steps(ex.sequence);
  }
  return total / steps;
}

}  // namespace

CaptionHistory train_captioner(CaptionModel& m, const std::vector<CaptionExample>& train,
                               const std::vector<CaptionExample>& val,
                               const CaptionTrainConfig& cfg) {
  if (train.empty() || val.empty())
    throw std::invalid_argument("train_captioner: empty train or validation split");
  if (cfg.batch_size < 1 || cfg.max_epochs < 1 || cfg.patience < 0 || cfg.decode_n < 1)
    throw std::invalid_argument("train_captioner: bad training configuration");
  for (const std::vector<CaptionExample>* set : {&train, &val})
    for (const CaptionExample& ex : *set) {
      validate_sequence(ex.sequence, m.config.vocab_size);
      injected_problem_vector(m, ex.embedding);  // width check
      if (m.config.attention != AttentionStyle::None && !ex.embedding.node_matrix.has_value())
        throw std::invalid_argument("train_captioner: attention needs node rows for " +
                                    ex.embedding.problem_id);
    }

  std::vector<num::Parameter*> params = m.parameters();
  Rng order_rng = Rng(cfg.seed).substream("order");
  Rng drop_rng = Rng(cfg.seed).substream("dropout");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  CaptionHistory history;
  double best = 0.0;
  std::vector<num::Tensor2> best_values;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_sum = 0.0;
    int epoch_steps = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      num::Tape t;
      TapeCaption tc = bind_captioner(t, m);
      int batch_sum = -1;
      int batch_steps = 0;
      for (std::size_t i = begin; i < end; ++i) {
        const CaptionExample& ex = train[order[i]];
        int loss = caption_loss(t, m, tc, ex.embedding, ex.sequence, true, &drop_rng);
        batch_sum = batch_sum < 0 ? loss : t.add(batch_sum, loss);
        batch_steps += scored_steps(ex.sequence);
      }
      t.backward(t.scale(batch_sum, 1.0 / batch_steps));
      for (std::size_t k = 0; k < params.size(); ++k)
        params[k]->grad = t.grad(tc.param_leaves[k]);
      num::adam_step(params, cfg.learning_rate);
      epoch_sum += t.val(batch_sum).at(0, 0);
      epoch_steps += batch_steps;
    }
    history.train_loss.push_back(epoch_sum / epoch_steps);
    history.val_loss.push_back(mean_step_loss(m, val));
    SetScores ts = decode_scores(m, train, cfg.decode_n);
    SetScores vs = decode_scores(m, val, cfg.decode_n);
    history.train_jaccard.push_back(ts.jaccard);
    history.train_coverage.push_back(ts.coverage);
    history.val_jaccard.push_back(vs.jaccard);
    history.val_coverage.push_back(vs.coverage);

    if (history.best_epoch < 0 || history.val_loss.back() < best) {
      best = history.val_loss.back();
      history.best_epoch = epoch;
      best_values.clear();
      for (const num::Parameter* p : params) best_values.push_back(p->value);
    } else if (epoch - history.best_epoch >= cfg.patience) {
      break;
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = best_values[k];
  return history;
}

}  // namespace axcap::cap
