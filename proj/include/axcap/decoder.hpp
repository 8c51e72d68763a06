#pragma once

// Decoding strategies that turn the captioner's step distributions into an
// axiom selection. Each step samples n ids; only the most probable selected
// id is fed back into the decoder. Reserved tokens never enter the
// selection, though <unk> or <end> may be the feedback token.

#include <variant>
#include <vector>

#include "axcap/captioner.hpp"
#include "axcap/gnn.hpp"
#include "axcap/rng.hpp"

namespace axcap::dec {

struct Greedy {
  int n = 2;
};
struct TopK {
  int k = 16;
  int n = 2;
};
struct Temperature {
  double t = 0.7;
  int n = 2;
};
using SampleMethod = std::variant<Greedy, TopK, Temperature>;

struct StepSample {
  std::vector<int> selected;  // n ids in pick order
  int feedback = -1;          // most probable selected id (ties: lower id)
};

// One sampling decision over a step distribution. Greedy takes the n most
// probable ids (ties broken toward lower ids) and consumes no randomness;
// TopK renormalizes the top-k mass and draws n without replacement;
// Temperature draws n without replacement from the tempered distribution.
// Throws when fewer than n ids have nonzero probability (nonzero top-k mass
// entries for TopK).
StepSample sample_step(const std::vector<double>& probs, const SampleMethod& method, Rng& rng);

// softmax(log p / t) over the nonzero entries; zeros stay zero. t = 1
// returns the input unchanged.
std::vector<double> tempered_distribution(const std::vector<double>& probs, double t);

struct DecodeResult {
  std::vector<int> selection;  // unique axiom ids in first-selection order
  struct Step {
    std::vector<int> selected;
    int feedback = -1;
  };
  std::vector<Step> trace;
};

// Runs the decoder from <start>, accumulating sampled axiom ids until the
// feedback token is <end> or max_steps steps have run.
DecodeResult decode(const cap::CaptionModel& model, const gnn::ProblemEmbedding& embedding,
                    const SampleMethod& method, Rng& rng, int max_steps = cap::kMaxSequence);

}  // namespace axcap::dec
