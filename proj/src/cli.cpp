// Stage drivers behind the axcap CLI. Each stage loads the config, re-reads
// the artifacts of earlier stages from out_dir, and writes its own outputs
// with a reproducibility header, so stages can run in separate processes
// and a rerun with the same config and seed is byte-identical.

#include <algorithm>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "axcap/graph.hpp"
#include "axcap/metrics.hpp"
#include "axcap/num.hpp"
#include "axcap/pipeline.hpp"
#include "axcap/spectral.hpp"

namespace axcap::pipe {

namespace {

namespace fs = std::filesystem;

struct RunContext {
  ExperimentConfig cfg;
  std::string config_hash;  // of the config file bytes
  std::ostream* out = nullptr;
};

std::uint64_t subseed(std::uint64_t seed, std::string_view label) {
  return seed ^ (fnv1a64(label) * 0x9e3779b97f4a7c15ull);
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

std::string header(const RunContext& ctx, char mark = '#') {
  std::ostringstream h;
  h << mark << ' ' << kVersion << "\n"
    << mark << " config " << ctx.config_hash << "\n"
    << mark << " seed " << ctx.cfg.seed << "\n";
  return h.str();
}

std::vector<std::string> header_comment_lines(const RunContext& ctx) {
  return {std::string(kVersion), "config " + ctx.config_hash,
          "seed " + std::to_string(ctx.cfg.seed)};
}

std::string artifact(const RunContext& ctx, const std::string& name) {
  return (fs::path(ctx.cfg.out_dir) / name).string();
}

std::ofstream open_artifact(const RunContext& ctx, const std::string& name) {
  fs::create_directories(ctx.cfg.out_dir);
  std::string path = artifact(ctx, name);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::ifstream open_existing(const RunContext& ctx, const std::string& name,
                            const std::string& producer) {
  std::ifstream in(artifact(ctx, name));
  if (!in)
    throw std::runtime_error("missing " + artifact(ctx, name) + "; run the " + producer +
                             " stage first");
  return in;
}

std::string trimmed(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> tsv_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == '\t') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

// Data rows of a headed TSV artifact: comments and the column header line
// are skipped, each remaining line is split on tabs.
std::vector<std::vector<std::string>> read_tsv_rows(std::istream& in, std::size_t columns,
                                                    const std::string& what) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      saw_header = true;  // column names
      continue;
    }
    std::vector<std::string> f = tsv_fields(line);
    if (f.size() != columns)
      throw std::runtime_error(what + ": expected " + std::to_string(columns) +
                               " columns, got " + std::to_string(f.size()));
    rows.push_back(std::move(f));
  }
  return rows;
}

DatasetSplit load_split(const RunContext& ctx) {
  std::ifstream in = open_existing(ctx, "split.tsv", "ingest");
  DatasetSplit s;
  for (const auto& row : read_tsv_rows(in, 2, "split.tsv")) {
    const std::string& id = row[0];
    const std::string& role = row[1];
    if (role == "train") s.train.push_back(id);
    else if (role == "val") s.val.push_back(id);
    else if (role == "test") s.test.push_back(id);
    else throw std::runtime_error("split.tsv: unknown role " + role);
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

Corpus load_corpus(const RunContext& ctx) {
  return ingest(ctx.cfg.problems_dir, ctx.cfg.manifest, ctx.cfg.max_axioms);
}

// Corpus and split together, cross-checked: a stale split.tsv (edited
// config, changed problem set) fails here instead of corrupting a stage.
std::pair<Corpus, DatasetSplit> load_corpus_and_split(const RunContext& ctx) {
  Corpus corpus = load_corpus(ctx);
  DatasetSplit split = load_split(ctx);
  std::vector<std::string> corpus_ids;
  for (const fof::Problem& p : corpus.problems) corpus_ids.push_back(p.id);
  if (split.all_ids() != corpus_ids)
    throw std::runtime_error("split.tsv does not match the corpus; rerun ingest");
  return {std::move(corpus), std::move(split)};
}

graph::ProblemGraph graph_of(const Corpus& corpus, const std::string& id) {
  return graph::build_problem_graph(corpus.problem(id));
}

gnn::GnnModel load_gnn(const RunContext& ctx) {
  gnn::GnnConfig gc;
  gc.dim = ctx.cfg.gnn_dim;
  gc.layers = ctx.cfg.gnn_layers;
  gc.pooling = ctx.cfg.pooling;
  gc.supervised_head = ctx.cfg.pretrain_supervised;
  gc.seed = subseed(ctx.cfg.seed, "gnn-init");
  gnn::GnnModel m = gnn::make_gnn_model(gc);
  std::ifstream in = open_existing(ctx, "gnn.ckpt", "pretrain");
  num::load_checkpoint(in, m.parameters());
  return m;
}

cap::CaptionConfig caption_config(const RunContext& ctx, int vocab_size) {
  cap::CaptionConfig cc;
  cc.vocab_size = vocab_size;
  cc.problem_dim = ctx.cfg.gnn_dim;
  cc.embedding_dim = ctx.cfg.embedding_dim;
  cc.lstm_units = ctx.cfg.lstm_units;
  cc.dense_units = ctx.cfg.dense_units;
  cc.attention = ctx.cfg.attention;
  cc.feature_normalization = ctx.cfg.feature_normalization;
  cc.dropout = ctx.cfg.dropout;
  cc.seed = subseed(ctx.cfg.seed, "captioner-init");
  return cc;
}

cap::Vocabulary load_vocab(const RunContext& ctx) {
  std::ifstream in = open_existing(ctx, "vocab.tsv", "train-captioner");
  return cap::load_vocabulary(in);
}

cap::CaptionModel load_captioner(const RunContext& ctx, const cap::Vocabulary& vocab) {
  cap::CaptionModel m = cap::make_caption_model(caption_config(ctx, vocab.size()));
  std::ifstream in = open_existing(ctx, "cap.ckpt", "train-captioner");
  num::load_checkpoint(in, m.parameters());
  return m;
}

std::vector<const num::Parameter*> const_params(std::vector<num::Parameter*> params) {
  return {params.begin(), params.end()};
}

void write_history(const RunContext& ctx, const std::string& name,
                   const std::vector<std::pair<std::string, const std::vector<double>*>>& series,
                   int best_epoch) {
  std::ofstream out = open_artifact(ctx, name);
  out << header(ctx);
  out << "epoch";
  for (const auto& [label, values] : series) out << '\t' << label;
  out << '\n';
  // A series can be shorter than the others (no validation data, say); pad
  // the missing cells instead of reading past its end.
  std::size_t epochs = 0;
  for (const auto& [label, values] : series) epochs = std::max(epochs, values->size());
  for (std::size_t e = 0; e < epochs; ++e) {
    out << e;
    for (const auto& [label, values] : series) {
      out << '\t';
      if (e < values->size()) out << num::format_double((*values)[e]);
      else out << '-';
    }
    out << '\n';
  }
  out << "# best_epoch " << best_epoch << '\n';
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

void stage_ingest(const RunContext& ctx) {
  Corpus corpus = load_corpus(ctx);
  std::vector<std::string> ids;
  for (const fof::Problem& p : corpus.problems) ids.push_back(p.id);
  DatasetSplit split = split_corpus(ids, ctx.cfg.fractions, ctx.cfg.seed);

  std::ofstream out = open_artifact(ctx, "split.tsv");
  out << header(ctx) << "problem_id\tsplit\n";
  for (const std::string& id : ids) out << id << '\t' << split.role_of(id) << '\n';
  *ctx.out << "ingest: " << ids.size() << " problems (train " << split.train.size() << ", val "
           << split.val.size() << ", test " << split.test.size() << ")\n";
}

void stage_build_graphs(const RunContext& ctx) {
  auto [corpus, split] = load_corpus_and_split(ctx);
  std::ofstream out = open_artifact(ctx, "graphs.txt");
  out << header(ctx);
  long nodes = 0;
  for (const fof::Problem& p : corpus.problems) {
    graph::ProblemGraph g = graph::build_problem_graph(p);
    nodes += g.node_count();
    out << "graph " << p.id << ' ' << g.node_count() << ' ' << g.edges.size() << '\n'
        << graph::to_text(g) << '\n';
  }
  *ctx.out << "build-graphs: " << corpus.problems.size() << " graphs, " << nodes << " nodes\n";
}

void stage_gen_pairs(const RunContext& ctx) {
  auto [corpus, split] = load_corpus_and_split(ctx);
  auto graphs_of = [&](const std::vector<std::string>& part) {
    std::vector<graph::ProblemGraph> graphs;
    for (const std::string& id : part) graphs.push_back(graph_of(corpus, id));
    return graphs;
  };
  std::vector<graph::ProblemGraph> train_graphs = graphs_of(split.train);
  std::vector<graph::ProblemGraph> val_graphs = graphs_of(split.val);

  std::vector<spectral::GraphPair> train_pairs =
      train_graphs.size() >= 2
          ? spectral::make_pair_dataset(train_graphs, ctx.cfg.pair_count,
                                        subseed(ctx.cfg.seed, "pairs:train"),
                                        ctx.cfg.pair_normalize)
          : std::vector<spectral::GraphPair>{};
  int val_count = std::max(1, ctx.cfg.pair_count / 10);
  std::vector<spectral::GraphPair> val_pairs =
      val_graphs.size() >= 2
          ? spectral::make_pair_dataset(val_graphs, val_count,
                                        subseed(ctx.cfg.seed, "pairs:val"),
                                        ctx.cfg.pair_normalize)
          : std::vector<spectral::GraphPair>{};

  std::ofstream out = open_artifact(ctx, "pairs.tsv");
  out << header(ctx) << "split\tleft\tright\tdistance\n";
  auto write_pairs = [&](const char* role, const std::vector<spectral::GraphPair>& pairs,
                         const std::vector<std::string>& ids) {
    for (const spectral::GraphPair& p : pairs)
      out << role << '\t' << ids[static_cast<std::size_t>(p.left)] << '\t'
          << ids[static_cast<std::size_t>(p.right)] << '\t' << num::format_double(p.distance)
          << '\n';
  };
  write_pairs("train", train_pairs, split.train);
  write_pairs("val", val_pairs, split.val);
  *ctx.out << "gen-pairs: " << train_pairs.size() << " train pairs, " << val_pairs.size()
           << " val pairs\n";
}

void stage_pretrain(const RunContext& ctx, bool supervised) {
  auto [corpus, split] = load_corpus_and_split(ctx);
  gnn::GnnConfig gc;
  gc.dim = ctx.cfg.gnn_dim;
  gc.layers = ctx.cfg.gnn_layers;
  gc.pooling = ctx.cfg.pooling;
  gc.supervised_head = supervised;
  gc.seed = subseed(ctx.cfg.seed, "gnn-init");
  gnn::GnnModel model = gnn::make_gnn_model(gc);

  gnn::TrainConfig tc;
  tc.learning_rate = ctx.cfg.gnn_learning_rate;
  tc.max_epochs = ctx.cfg.gnn_epochs;
  tc.patience = ctx.cfg.gnn_patience;
  tc.seed = subseed(ctx.cfg.seed, "gnn-train");

  gnn::TrainHistory history;
  if (supervised) {
    auto examples_of = [&](const std::vector<std::string>& part) {
      std::vector<gnn::SupervisedExample> exs;
      for (const std::string& id : part) {
        gnn::SupervisedExample ex;
        ex.graph = graph_of(corpus, id);
        const std::vector<std::string>& positives = corpus.manifest.positives.at(id);
        const fof::Problem& problem = corpus.problem(id);
        for (const fof::AnnotatedFormula& axiom : problem.axioms)
          ex.labels.push_back(std::find(positives.begin(), positives.end(), axiom.name) !=
                                      positives.end()
                                  ? 1.0
                                  : 0.0);
        exs.push_back(std::move(ex));
      }
      return exs;
    };
    history = gnn::train_supervised(model, examples_of(split.train), examples_of(split.val), tc);
  } else {
    std::ifstream pf = open_existing(ctx, "pairs.tsv", "gen-pairs");
    std::vector<graph::ProblemGraph> graphs;
    std::map<std::string, int> index;
    for (const std::string& id : split.train) {
      index[id] = static_cast<int>(graphs.size());
      graphs.push_back(graph_of(corpus, id));
    }
    for (const std::string& id : split.val) {
      index[id] = static_cast<int>(graphs.size());
      graphs.push_back(graph_of(corpus, id));
    }
    std::vector<spectral::GraphPair> train_pairs, val_pairs;
    for (const auto& row : read_tsv_rows(pf, 4, "pairs.tsv")) {
      auto left = index.find(row[1]);
      auto right = index.find(row[2]);
      if (left == index.end() || right == index.end())
        throw std::runtime_error("pairs.tsv: unknown problem " +
                                 (left == index.end() ? row[1] : row[2]));
      spectral::GraphPair p{left->second, right->second, std::stod(row[3])};
      if (row[0] == "train") train_pairs.push_back(p);
      else if (row[0] == "val") val_pairs.push_back(p);
      else throw std::runtime_error("pairs.tsv: unknown split " + row[0]);
    }
    history = gnn::train_unsupervised(model, graphs, train_pairs, val_pairs, tc);
  }

  std::vector<std::string> comments = header_comment_lines(ctx);
  comments.push_back(std::string("mode ") + (supervised ? "supervised" : "unsupervised"));
  std::ofstream out = open_artifact(ctx, "gnn.ckpt");
  num::save_checkpoint(out, const_params(model.parameters()), comments);
  write_history(ctx, "gnn_history.tsv",
                {{"train_loss", &history.train_loss}, {"val_loss", &history.val_loss}},
                history.best_epoch);
  *ctx.out << "pretrain (" << (supervised ? "supervised" : "unsupervised") << "): "
           << history.train_loss.size() << " epochs, best " << history.best_epoch << "\n";
}

void stage_embed(const RunContext& ctx) {
  auto [corpus, split] = load_corpus_and_split(ctx);
  gnn::GnnModel model = load_gnn(ctx);
  std::vector<gnn::ProblemEmbedding> embeddings;
  for (const fof::Problem& p : corpus.problems)
    embeddings.push_back(gnn::embed_problem(model, graph::build_problem_graph(p)));
  std::ofstream out = open_artifact(ctx, "embeddings.txt");
  gnn::save_embedding_store(out, embeddings, header_comment_lines(ctx));
  *ctx.out << "embed: " << embeddings.size() << " embeddings of dim " << ctx.cfg.gnn_dim << "\n";
}

void stage_train_captioner(const RunContext& ctx) {
  auto [corpus, split] = load_corpus_and_split(ctx);
  cap::Vocabulary vocab = build_vocabulary(split.train, corpus.manifest, ctx.cfg.vocab_size);
  {
    std::ofstream vout = open_artifact(ctx, "vocab.tsv");
    vout << header(ctx);
    cap::save_vocabulary(vout, vocab);
  }
  std::map<std::string, long> frequency = training_frequency(split.train, corpus.manifest);
  gnn::GnnModel encoder = load_gnn(ctx);

  auto examples_of = [&](const std::vector<std::string>& part) {
    std::vector<cap::CaptionExample> exs;
    for (const std::string& id : part) {
      const fof::Problem& problem = corpus.problem(id);
      std::vector<std::string> ordered = order_axioms(corpus.manifest.positives.at(id),
                                                      ctx.cfg.order, problem, frequency,
                                                      ctx.cfg.seed);
      cap::CaptionExample ex;
      ex.embedding = gnn::embed_problem(encoder, graph::build_problem_graph(problem));
      ex.sequence = cap::make_sequence(id, ordered, vocab);
      exs.push_back(std::move(ex));
    }
    return exs;
  };

  cap::CaptionModel model = cap::make_caption_model(caption_config(ctx, vocab.size()));
  cap::CaptionTrainConfig tc;
  tc.learning_rate = ctx.cfg.learning_rate;
  tc.batch_size = ctx.cfg.batch_size;
  tc.max_epochs = ctx.cfg.max_epochs;
  tc.patience = ctx.cfg.patience;
  tc.decode_n = ctx.cfg.decode_n;
  tc.seed = subseed(ctx.cfg.seed, "captioner-train");
  cap::CaptionHistory history =
      cap::train_captioner(model, examples_of(split.train), examples_of(split.val), tc);

  std::ofstream out = open_artifact(ctx, "cap.ckpt");
  num::save_checkpoint(out, const_params(model.parameters()), header_comment_lines(ctx));
  write_history(ctx, "cap_history.tsv",
                {{"train_loss", &history.train_loss},
                 {"val_loss", &history.val_loss},
                 {"train_jaccard", &history.train_jaccard},
                 {"train_coverage", &history.train_coverage},
                 {"val_jaccard", &history.val_jaccard},
                 {"val_coverage", &history.val_coverage}},
                history.best_epoch);
  std::size_t best = static_cast<std::size_t>(history.best_epoch);
  *ctx.out << "train-captioner: vocab " << vocab.size() << ", best epoch " << history.best_epoch
           << ", val jaccard " << history.val_jaccard[best] << ", val coverage "
           << history.val_coverage[best] << "\n";
}

void stage_predict(const RunContext& ctx) {
  auto [corpus, split] = load_corpus_and_split(ctx);
  cap::Vocabulary vocab = load_vocab(ctx);
  gnn::GnnModel encoder = load_gnn(ctx);
  cap::CaptionModel model = load_captioner(ctx, vocab);
  dec::SampleMethod method = ctx.cfg.decode_method();

  std::ofstream out = open_artifact(ctx, "predictions.tsv");
  out << header(ctx) << "problem_id\tsplit\taxioms\n";
  for (const fof::Problem& p : corpus.problems) {
    gnn::ProblemEmbedding e = gnn::embed_problem(encoder, graph::build_problem_graph(p));
    Rng rng = Rng(ctx.cfg.seed).substream("predict:" + p.id);
    dec::DecodeResult r = dec::decode(model, e, method, rng);
    std::vector<std::string> names;
    for (int id : r.selection) names.push_back(vocab.name_of(id));
    out << p.id << '\t' << split.role_of(p.id) << '\t' << join(names, ",") << '\n';
  }
  *ctx.out << "predict: " << corpus.problems.size() << " problems (" << ctx.cfg.decode << ")\n";
}

struct MeanAccumulator {
  double jaccard_sum = 0.0;
  long jaccard_n = 0;
  double coverage_sum = 0.0;
  long coverage_n = 0;

  void add(double j, std::optional<double> c) {
    jaccard_sum += j;
    ++jaccard_n;
    if (c) {
      coverage_sum += *c;
      ++coverage_n;
    }
  }
};

void stage_evaluate(const RunContext& ctx) {
  auto [corpus, split] = load_corpus_and_split(ctx);
  std::ifstream pin = open_existing(ctx, "predictions.tsv", "predict");
  std::ofstream out = open_artifact(ctx, "evaluation.tsv");
  out << header(ctx) << "scope\tid\tjaccard\tcoverage\n";

  std::map<std::string, MeanAccumulator> by_split;
  MeanAccumulator overall;
  std::size_t rows = 0;
  for (const auto& row : read_tsv_rows(pin, 3, "predictions.tsv")) {
    const std::string& id = row[0];
    std::set<std::string> predicted;
    if (!row[2].empty()) {
      std::istringstream names(row[2]);
      std::string name;
      while (std::getline(names, name, ',')) predicted.insert(name);
    }
    auto truth_it = corpus.manifest.positives.find(id);
    if (truth_it == corpus.manifest.positives.end())
      throw std::runtime_error("evaluate: prediction for unknown problem " + id);
    std::set<std::string> truth(truth_it->second.begin(), truth_it->second.end());
    double j = metrics::jaccard(predicted, truth);
    std::optional<double> c = metrics::coverage(predicted, truth);
    out << "problem\t" << id << '\t' << num::format_double(j) << '\t'
        << (c ? num::format_double(*c) : "-") << '\n';
    by_split[split.role_of(id)].add(j, c);
    overall.add(j, c);
    ++rows;
  }
  if (rows == 0) throw std::runtime_error("evaluate: predictions.tsv has no rows");

  auto write_mean = [&](const std::string& scope, const std::string& id,
                        const MeanAccumulator& acc) {
    out << scope << '\t' << id << '\t'
        << (acc.jaccard_n ? num::format_double(acc.jaccard_sum / acc.jaccard_n) : "-") << '\t'
        << (acc.coverage_n ? num::format_double(acc.coverage_sum / acc.coverage_n) : "-") << '\n';
    if (acc.jaccard_n)
      *ctx.out << "evaluate " << id << ": jaccard " << acc.jaccard_sum / acc.jaccard_n
               << ", coverage "
               << (acc.coverage_n ? std::to_string(acc.coverage_sum / acc.coverage_n) : "-")
               << " (" << acc.jaccard_n << " problems)\n";
  };
  for (const char* role : {"train", "val", "test"})
    write_mean("split", role, by_split[role]);
  write_mean("overall", "all", overall);
}

void stage_select(const RunContext& ctx) {
  auto [corpus, split] = load_corpus_and_split(ctx);
  const ExperimentConfig& cfg = ctx.cfg;

  SelectionSources sources{cfg.use_captioning, cfg.use_sine, cfg.use_rare};
  std::optional<cap::Vocabulary> vocab;
  std::optional<gnn::GnnModel> encoder;
  std::optional<cap::CaptionModel> model;
  if (sources.captioning || sources.rare) vocab.emplace(load_vocab(ctx));
  if (sources.captioning) {
    encoder.emplace(load_gnn(ctx));
    model.emplace(load_captioner(ctx, *vocab));
  }
  sine::SineParams sine_params{cfg.sine_tolerance, cfg.sine_depth};
  std::set<std::string> history;
  if (sources.rare)
    for (const auto& [name, count] : training_frequency(split.train, corpus.manifest))
      history.insert(name);

  fs::create_directories(fs::path(cfg.out_dir) / "reduced");
  std::ofstream report = open_artifact(ctx, "select_report.tsv");
  report << header(ctx)
         << "problem_id\tsplit\tn_captioning\tn_sine\tn_rare\tn_selected\tjaccard\tcoverage\n";
  for (const fof::Problem& p : corpus.problems) {
    SelectionInputs inputs;
    gnn::ProblemEmbedding embedding;
    Rng rng = Rng(cfg.seed).substream("select:" + p.id);
    if (sources.captioning) {
      embedding = gnn::embed_problem(*encoder, graph::build_problem_graph(p));
      inputs.captioner = &*model;
      inputs.embedding = &embedding;
      inputs.method = cfg.decode_method();
      inputs.rng = &rng;
    }
    if (sources.captioning || sources.rare) inputs.vocab = &*vocab;
    if (sources.sine) inputs.sine_params = &sine_params;
    if (sources.rare) inputs.positive_history = &history;

    SelectionRecord rec = select_axioms(p, sources, inputs);
    std::ofstream reduced((fs::path(cfg.out_dir) / "reduced" / (p.id + ".p")).string());
    if (!reduced) throw std::runtime_error("cannot write reduced problem for " + p.id);
    reduced << header(ctx, '%') << emit_reduced_problem(p, rec.selection);

    std::set<std::string> selected(rec.selection.begin(), rec.selection.end());
    const std::vector<std::string>& positives = corpus.manifest.positives.at(p.id);
    std::set<std::string> truth(positives.begin(), positives.end());
    std::optional<double> c = metrics::coverage(selected, truth);
    report << p.id << '\t' << split.role_of(p.id) << '\t' << rec.n_captioning << '\t'
           << rec.n_sine << '\t' << rec.n_rare << '\t' << rec.selection.size() << '\t'
           << num::format_double(metrics::jaccard(selected, truth)) << '\t'
           << (c ? num::format_double(*c) : "-") << '\n';
  }
  *ctx.out << "select: " << corpus.problems.size() << " reduced problems\n";
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"premise-selection toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  struct Common {
    std::string config_path;
    std::string seed_str;
    CLI::App* sub = nullptr;
  };
  // deque: growth must not move elements, the Common& bindings below persist
  std::deque<Common> commands;
  auto add_command = [&](const std::string& name, const std::string& info) -> Common& {
    commands.push_back({});
    Common& c = commands.back();
    c.sub = app.add_subcommand(name, info);
    c.sub->add_option("--config", c.config_path, "experiment config file")
        ->envname("AXCAP_CONFIG")
        ->required();
    c.sub->add_option("--seed", c.seed_str, "override the config seed");
    return c;
  };

  Common& c_ingest = add_command("ingest", "filter the corpus and write the dataset split");
  Common& c_graphs = add_command("build-graphs", "write the problem graphs");
  Common& c_pairs = add_command("gen-pairs", "sample spectral-distance graph pairs");
  Common& c_pretrain = add_command("pretrain", "train the graph encoder");
  std::string mode;
  c_pretrain.sub->add_option("--mode", mode, "supervised|unsupervised (default: config)")
      ->check(CLI::IsMember({"supervised", "unsupervised"}));
  Common& c_embed = add_command("embed", "export problem embeddings");
  Common& c_train = add_command("train-captioner", "train the axiom captioner");
  Common& c_predict = add_command("predict", "decode axiom selections");
  Common& c_evaluate = add_command("evaluate", "score predictions against the manifest");
  Common& c_select = add_command("select", "emit reduced problems from the enabled sources");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    const Common* active = nullptr;
    for (const Common& c : commands)
      if (c.sub->parsed()) active = &c;
    if (!active) throw std::runtime_error("no subcommand parsed");

    std::ifstream cf(active->config_path);
    if (!cf) throw std::runtime_error("config: cannot open " + active->config_path);
    std::ostringstream raw;
    raw << cf.rdbuf();

    RunContext ctx;
    ctx.cfg = parse_config(raw.str());
    ctx.config_hash = hex64(fnv1a64(raw.str()));
    ctx.out = &out;
    if (active->sub->count("--seed")) {
      const std::string& s = active->seed_str;
      if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw std::runtime_error("--seed: expected a non-negative integer");
      ctx.cfg.seed = std::stoull(s);
    }

    if (active == &c_ingest) stage_ingest(ctx);
    else if (active == &c_graphs) stage_build_graphs(ctx);
    else if (active == &c_pairs) stage_gen_pairs(ctx);
    else if (active == &c_pretrain)
      stage_pretrain(ctx, mode.empty() ? ctx.cfg.pretrain_supervised : mode == "supervised");
    else if (active == &c_embed) stage_embed(ctx);
    else if (active == &c_train) stage_train_captioner(ctx);
    else if (active == &c_predict) stage_predict(ctx);
    else if (active == &c_evaluate) stage_evaluate(ctx);
    else if (active == &c_select) stage_select(ctx);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace axcap::pipe
