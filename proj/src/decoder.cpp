#include "axcap/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace axcap::dec {

namespace {

void validate_distribution(const std::vector<double>& p) {
  if (p.empty()) throw std::invalid_argument("sample: empty distribution");
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("sample: probabilities must be finite and nonnegative");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-6)
    throw std::invalid_argument("sample: probabilities do not sum to 1");
}

// Ids ordered by probability descending, lower id first among equals.
std::vector<int> by_probability(const std::vector<double>& p) {
  std::vector<int> ids(p.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    return p[static_cast<std::size_t>(a)] > p[static_cast<std::size_t>(b)];
  });
  return ids;
}

void require_support(const std::vector<double>& weights, int n, const char* what) {
  int nonzero = 0;
  for (double w : weights)
    if (w > 0.0) ++nonzero;
  if (nonzero < n)
    throw std::invalid_argument(std::string(what) + ": fewer than " + std::to_string(n) +
                                " ids with nonzero probability");
}

// n draws without replacement, renormalizing the remaining mass after each.
std::vector<int> draw_without_replacement(std::vector<double> weights, int n, Rng& rng) {
  std::vector<int> picks;
  picks.reserve(static_cast<std::size_t>(n));
  for (int round = 0; round < n; ++round) {
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double u = rng.uniform() * total;
    double cum = 0.0;
    int pick = -1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      cum += weights[i];
      pick = static_cast<int>(i);
      if (u < cum) break;  // the final positive entry absorbs rounding
    }
    picks.push_back(pick);
    weights[static_cast<std::size_t>(pick)] = 0.0;
  }
  return picks;
}

int pick_feedback(const std::vector<int>& selected, const std::vector<double>& probs) {
  int best = selected.front();
  for (int id : selected) {
    double p = probs[static_cast<std::size_t>(id)];
    double bp = probs[static_cast<std::size_t>(best)];
    if (p > bp || (p == bp && id < best)) best = id;
  }
  return best;
}

}  // namespace

std::vector<double> tempered_distribution(const std::vector<double>& probs, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (t == 1.0) return probs;
  double max_logit = -std::numeric_limits<double>::infinity();
  std::vector<double> logits(probs.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (probs[i] > 0.0) {
      logits[i] = std::log(probs[i]) / t;
      max_logit = std::max(max_logit, logits[i]);
    }
  if (max_logit == -std::numeric_limits<double>::infinity())
    throw std::invalid_argument("temperature: distribution has no mass");
  std::vector<double> out(probs.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (probs[i] > 0.0) {
      out[i] = std::exp(logits[i] - max_logit);
      sum += out[i];
    }
  for (double& v : out) v /= sum;
  return out;
}

StepSample sample_step(const std::vector<double>& probs, const SampleMethod& method, Rng& rng) {
  validate_distribution(probs);
  StepSample out;
  if (const Greedy* g = std::get_if<Greedy>(&method)) {
    if (g->n < 1) throw std::invalid_argument("greedy: n must be at least 1");
    require_support(probs, g->n, "greedy");
    std::vector<int> order = by_probability(probs);
    out.selected.assign(order.begin(), order.begin() + g->n);
  } else if (const TopK* tk = std::get_if<TopK>(&method)) {
    if (tk->n < 1) throw std::invalid_argument("top-k: n must be at least 1");
    if (tk->k < tk->n) throw std::invalid_argument("top-k: k must be at least n");
    std::vector<int> order = by_probability(probs);
    int k = std::min<int>(tk->k, static_cast<int>(order.size()));
    std::vector<double> weights(probs.size(), 0.0);
    for (int i = 0; i < k; ++i) {
      int id = order[static_cast<std::size_t>(i)];
      weights[static_cast<std::size_t>(id)] = probs[static_cast<std::size_t>(id)];
    }
    require_support(weights, tk->n, "top-k");
    out.selected = draw_without_replacement(std::move(weights), tk->n, rng);
  } else {
    const Temperature& temp = std::get<Temperature>(method);
    if (temp.n < 1) throw std::invalid_argument("temperature: n must be at least 1");
    std::vector<double> tempered = tempered_distribution(probs, temp.t);
    require_support(tempered, temp.n, "temperature");
    out.selected = draw_without_replacement(std::move(tempered), temp.n, rng);
  }
  out.feedback = pick_feedback(out.selected, probs);
  return out;
}

DecodeResult decode(const cap::CaptionModel& model, const gnn::ProblemEmbedding& embedding,
                    const SampleMethod& method, Rng& rng, int max_steps) {
  if (max_steps < 1) throw std::invalid_argument("decode: max_steps must be positive");
  DecodeResult result;
  std::vector<bool> chosen(static_cast<std::size_t>(model.config.vocab_size), false);
  cap::DecoderState state = cap::initial_state(model);
  int token = cap::Vocabulary::kStart;
  for (int step = 0; step < max_steps; ++step) {
    auto [probs, next] = cap::forward_step(model, token, state, embedding);
    StepSample sample = sample_step(probs, method, rng);
    for (int id : sample.selected) {
      if (cap::Vocabulary::is_reserved(id) || chosen[static_cast<std::size_t>(id)]) continue;
      chosen[static_cast<std::size_t>(id)] = true;
      result.selection.push_back(id);
    }
    result.trace.push_back({sample.selected, sample.feedback});
    state = next;
    token = sample.feedback;
    if (token == cap::Vocabulary::kEnd) break;
  }
  return result;
}

}  // namespace axcap::dec
