#pragma once

// Experiment plumbing: corpus ingestion against a proof manifest, dataset
// splits, vocabulary construction, axiom ordering schemes, rare-axiom
// rescue, combined selection, and the staged CLI
// (ingest / build-graphs / gen-pairs / pretrain / embed / train-captioner /
// predict / evaluate / select). Every stage reads one flat key=value config
// file, derives all randomness from the seed, and stamps its outputs with a
// reproducibility header, so a rerun with the same config and seed is
// byte-identical.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "axcap/captioner.hpp"
#include "axcap/decoder.hpp"
#include "axcap/fof.hpp"
#include "axcap/gnn.hpp"
#include "axcap/rng.hpp"
#include "axcap/sine.hpp"

namespace axcap::pipe {

inline constexpr const char* kVersion = "axcap 0.1.0";

// problem id -> axiom names positive in its proof, proof order.
// File format: one line per problem, "id<TAB>name;name;...".
struct ProofManifest {
  std::map<std::string, std::vector<std::string>> positives;
};

ProofManifest load_manifest(std::istream& in);

struct SplitFractions {
  double train = 0.72;
  double val = 0.08;  // the remainder is the test split
};

struct DatasetSplit {
  std::vector<std::string> train, val, test;  // each sorted by id

  std::vector<std::string> all_ids() const;  // sorted union
  // "train", "val" or "test"; throws when the id is in no list.
  const std::string& role_of(const std::string& id) const;
};

// Seeded shuffle of the sorted ids, then floor(train*N) / floor(val*N) /
// remainder. Same seed, same split.
DatasetSplit split_corpus(std::vector<std::string> ids, const SplitFractions& fractions,
                          std::uint64_t seed);

// Problems that survived filtering, sorted by id, plus their manifest rows.
struct Corpus {
  std::vector<fof::Problem> problems;
  ProofManifest manifest;

  const fof::Problem& problem(const std::string& id) const;
};

// Parses every .p file under problems_dir, checks each against the
// manifest (every problem listed, every positive axiom name resolving), and
// drops problems whose proof uses more than max_axioms axioms. Throws on
// unresolved names, problems missing from the manifest, manifest rows
// without a problem file, or an empty filtered corpus.
Corpus ingest(const std::string& problems_dir, const std::string& manifest_path, int max_axioms);

// Axiom name -> number of training proofs it appears in.
std::map<std::string, long> training_frequency(const std::vector<std::string>& train_ids,
                                               const ProofManifest& manifest);

// The size most common training-proof axioms (ties broken by name) become
// tokens, in rank order; everything else maps to the unknown token.
cap::Vocabulary build_vocabulary(const std::vector<std::string>& train_ids,
                                 const ProofManifest& manifest, int size);

enum class OrderScheme { Original, Length, Frequency, Random, GlobalRandom };

// Reorders a problem's axiom names per the scheme. Original follows the
// problem file; Length sorts by serialized formula length ascending (ties
// by name); Frequency by training frequency descending (ties by name);
// Random shuffles per problem (seed mixed with the problem id);
// GlobalRandom applies one seeded hash total order shared by all problems.
std::vector<std::string> order_axioms(const std::vector<std::string>& names, OrderScheme scheme,
                                      const fof::Problem& problem,
                                      const std::map<std::string, long>& frequency,
                                      std::uint64_t seed);

// The problem's axioms that were ever positive in training yet fell outside
// the vocabulary, in problem order.
std::vector<std::string> rare_axiom_select(const fof::Problem& problem,
                                           const std::set<std::string>& positive_history,
                                           const cap::Vocabulary& vocab);

struct SelectionSources {
  bool captioning = true;
  bool sine = false;
  bool rare = false;
};

// Everything select_axioms may need; enable a source only when its inputs
// are set. rng may be null for greedy decoding.
struct SelectionInputs {
  const cap::CaptionModel* captioner = nullptr;
  const cap::Vocabulary* vocab = nullptr;
  const gnn::ProblemEmbedding* embedding = nullptr;
  dec::SampleMethod method = dec::Greedy{};
  Rng* rng = nullptr;
  const sine::SineParams* sine_params = nullptr;
  const std::set<std::string>* positive_history = nullptr;
};

struct SelectionRecord {
  std::string problem_id;
  int n_captioning = 0;
  int n_sine = 0;
  int n_rare = 0;
  std::vector<std::string> selection;  // union, in original problem order
};

// Union of the enabled sources. Throws when a source is enabled but its
// inputs are missing.
SelectionRecord select_axioms(const fof::Problem& problem, const SelectionSources& sources,
                              const SelectionInputs& inputs);

// Conjecture plus the selected axioms, original order, as problem text.
std::string emit_reduced_problem(const fof::Problem& problem,
                                 const std::vector<std::string>& selection);

struct ExperimentConfig {
  std::string problems_dir;
  std::string manifest;
  std::string out_dir;

  std::uint64_t seed = 0;
  int max_axioms = 20;
  SplitFractions fractions;

  int vocab_size = 6000;
  OrderScheme order = OrderScheme::Original;

  int gnn_dim = 64;
  int gnn_layers = 2;
  gnn::Pooling pooling = gnn::Pooling::AllNodes;
  bool pretrain_supervised = true;
  double gnn_learning_rate = 0.001;
  int gnn_epochs = 50;
  int gnn_patience = 5;

  int pair_count = 200;
  bool pair_normalize = false;

  cap::AttentionStyle attention = cap::AttentionStyle::None;
  int embedding_dim = 50;
  int lstm_units = 32;
  int dense_units = 512;
  double dropout = 0.1;
  bool feature_normalization = true;
  double learning_rate = 0.001;
  int batch_size = 64;
  int max_epochs = 80;
  int patience = 5;

  std::string decode = "greedy";  // greedy | top_k | temperature
  int decode_n = 2;
  int decode_k = 16;
  double decode_t = 0.7;

  bool use_captioning = true;
  bool use_sine = false;
  bool use_rare = false;
  double sine_tolerance = 1.0;
  int sine_depth = 1;

  dec::SampleMethod decode_method() const;
};

// Flat key=value text; '#' comments; unknown or duplicate keys and invalid
// values are errors. Every field is validated here, before any stage runs.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// Entry point behind the axcap binary: args exclude argv[0]. Writes normal
// output to out and diagnostics to err; returns the process exit status.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace axcap::pipe
