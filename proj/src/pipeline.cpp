#include "axcap/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace axcap::pipe {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

}  // namespace

ProofManifest load_manifest(std::istream& in) {
  ProofManifest m;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string flat = trim(line);
    if (flat.empty() || flat[0] == '#') continue;
    // Split the raw line: a row with no positives ends in its tab, which a
    // whole-line trim would swallow.
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("manifest line " + std::to_string(line_no) + ": missing tab");
    std::string id = trim(line.substr(0, tab));
    std::string rest = trim(line.substr(tab + 1));
    if (id.empty())
      throw std::runtime_error("manifest line " + std::to_string(line_no) + ": empty problem id");
    if (m.positives.count(id))
      throw std::runtime_error("manifest: duplicate problem " + id);
    std::vector<std::string> names;
    if (!rest.empty()) {
      for (const std::string& part : split_on(rest, ';')) {
        std::string name = trim(part);
        if (name.empty())
          throw std::runtime_error("manifest: empty axiom name for problem " + id);
        if (std::find(names.begin(), names.end(), name) != names.end())
          throw std::runtime_error("manifest: duplicate axiom " + name + " for problem " + id);
        names.push_back(name);
      }
    }
    m.positives.emplace(std::move(id), std::move(names));
  }
  return m;
}

std::vector<std::string> DatasetSplit::all_ids() const {
  std::vector<std::string> ids;
  ids.reserve(train.size() + val.size() + test.size());
  for (const auto* part : {&train, &val, &test}) ids.insert(ids.end(), part->begin(), part->end());
  std::sort(ids.begin(), ids.end());
  return ids;
}

const std::string& DatasetSplit::role_of(const std::string& id) const {
  static const std::string kTrain = "train", kVal = "val", kTest = "test";
  auto has = [&](const std::vector<std::string>& part) {
    return std::binary_search(part.begin(), part.end(), id);
  };
  if (has(train)) return kTrain;
  if (has(val)) return kVal;
  if (has(test)) return kTest;
  throw std::invalid_argument("split: unknown problem " + id);
}

DatasetSplit split_corpus(std::vector<std::string> ids, const SplitFractions& fractions,
                          std::uint64_t seed) {
  if (!(fractions.train > 0.0 && fractions.train <= 1.0) || fractions.val < 0.0 ||
      fractions.train + fractions.val > 1.0)
    throw std::invalid_argument("split: fractions must satisfy 0 < train, 0 <= val, sum <= 1");
  std::sort(ids.begin(), ids.end());
  Rng rng = Rng(seed).substream("split");
  rng.shuffle(ids);
  std::size_t n = ids.size();
  auto take = [](double f, std::size_t total) {
    return static_cast<std::size_t>(f * static_cast<double>(total));
  };
  std::size_t n_train = take(fractions.train, n);
  std::size_t n_val = take(fractions.val, n);
  DatasetSplit s;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
               ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

const fof::Problem& Corpus::problem(const std::string& id) const {
  auto it = std::lower_bound(problems.begin(), problems.end(), id,
                             [](const fof::Problem& p, const std::string& key) {
                               return p.id < key;
                             });
  if (it == problems.end() || it->id != id)
    throw std::invalid_argument("corpus: unknown problem " + id);
  return *it;
}

Corpus ingest(const std::string& problems_dir, const std::string& manifest_path, int max_axioms) {
  if (max_axioms < 1) throw std::invalid_argument("ingest: max_axioms must be positive");
  std::ifstream mf(manifest_path);
  if (!mf) throw std::runtime_error("ingest: cannot open manifest " + manifest_path);
  ProofManifest manifest = load_manifest(mf);

  namespace fs = std::filesystem;
  if (!fs::is_directory(problems_dir))
    throw std::runtime_error("ingest: problem directory " + problems_dir + " does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(problems_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".p")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  Corpus corpus;
  std::set<std::string> file_ids;
  for (const fs::path& path : files) {
    std::string id = path.stem().string();
    file_ids.insert(id);
    auto row = manifest.positives.find(id);
    if (row == manifest.positives.end())
      throw std::runtime_error("ingest: problem " + id + " is missing from the manifest");

    std::ifstream f(path);
    std::ostringstream text;
    text << f.rdbuf();
    fof::Problem problem = fof::parse_problem(text.str(), id);
    for (const std::string& name : row->second)
      if (!problem.find_axiom(name))
        throw std::runtime_error("ingest: manifest axiom " + name + " not found in problem " +
                                 id);
    if (static_cast<int>(row->second.size()) > max_axioms) continue;
    corpus.manifest.positives[id] = row->second;
    corpus.problems.push_back(std::move(problem));
  }
  for (const auto& [id, names] : manifest.positives)
    if (!file_ids.count(id))
      throw std::runtime_error("ingest: manifest problem " + id + " has no .p file");
  if (corpus.problems.empty())
    throw std::runtime_error("ingest: no problems left after the axiom-count filter");
  return corpus;
}

std::map<std::string, long> training_frequency(const std::vector<std::string>& train_ids,
                                               const ProofManifest& manifest) {
  std::map<std::string, long> freq;
  for (const std::string& id : train_ids) {
    auto it = manifest.positives.find(id);
    if (it == manifest.positives.end())
      throw std::invalid_argument("frequency: problem " + id + " not in manifest");
    for (const std::string& name : it->second) ++freq[name];
  }
  return freq;
}

cap::Vocabulary build_vocabulary(const std::vector<std::string>& train_ids,
                                 const ProofManifest& manifest, int size) {
  if (size < 1) throw std::invalid_argument("vocabulary: size must be positive");
  std::map<std::string, long> freq = training_frequency(train_ids, manifest);
  std::vector<std::pair<std::string, long>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(ranked.size()) > size) ranked.resize(static_cast<std::size_t>(size));
  std::vector<std::string> names;
  names.reserve(ranked.size());
  for (auto& [name, count] : ranked) names.push_back(std::move(name));
  return cap::Vocabulary(names);
}

std::vector<std::string> order_axioms(const std::vector<std::string>& names, OrderScheme scheme,
                                      const fof::Problem& problem,
                                      const std::map<std::string, long>& frequency,
                                      std::uint64_t seed) {
  std::map<std::string, int> position;
  for (int i = 0; i < static_cast<int>(problem.axioms.size()); ++i)
    position[problem.axioms[static_cast<std::size_t>(i)].name] = i;
  for (const std::string& name : names)
    if (!position.count(name))
      throw std::invalid_argument("order: axiom " + name + " not in problem " + problem.id);

  std::vector<std::string> out = names;
  switch (scheme) {
    case OrderScheme::Original:
      std::sort(out.begin(), out.end(), [&](const std::string& a, const std::string& b) {
        return position.at(a) < position.at(b);
      });
      break;
    case OrderScheme::Length: {
      std::map<std::string, std::size_t> length;
      for (const std::string& name : out)
        length[name] = fof::serialize_formula(*problem.find_axiom(name)->formula).size();
      std::sort(out.begin(), out.end(), [&](const std::string& a, const std::string& b) {
        if (length.at(a) != length.at(b)) return length.at(a) < length.at(b);
        return a < b;
      });
      break;
    }
    case OrderScheme::Frequency: {
      auto freq_of = [&](const std::string& name) {
        auto it = frequency.find(name);
        return it == frequency.end() ? 0L : it->second;
      };
      std::sort(out.begin(), out.end(), [&](const std::string& a, const std::string& b) {
        if (freq_of(a) != freq_of(b)) return freq_of(a) > freq_of(b);
        return a < b;
      });
      break;
    }
    case OrderScheme::Random: {
      Rng rng = Rng(seed).substream("order:" + problem.id);
      rng.shuffle(out);
      break;
    }
    case OrderScheme::GlobalRandom: {
      // One seeded hash rank per name gives every problem the same relative
      // order of any two axioms.
      auto rank = [&](const std::string& name) {
        return fnv1a64(std::to_string(seed) + ":" + name);
      };
      std::sort(out.begin(), out.end(), [&](const std::string& a, const std::string& b) {
        if (rank(a) != rank(b)) return rank(a) < rank(b);
        return a < b;
      });
      break;
    }
  }
  return out;
}

std::vector<std::string> rare_axiom_select(const fof::Problem& problem,
                                           const std::set<std::string>& positive_history,
                                           const cap::Vocabulary& vocab) {
  std::vector<std::string> out;
  for (const fof::AnnotatedFormula& axiom : problem.axioms)
    if (positive_history.count(axiom.name) &&
        vocab.id_of(axiom.name) == cap::Vocabulary::kUnknown)
      out.push_back(axiom.name);
  return out;
}

SelectionRecord select_axioms(const fof::Problem& problem, const SelectionSources& sources,
                              const SelectionInputs& inputs) {
  std::set<std::string> in_problem;
  for (const fof::AnnotatedFormula& axiom : problem.axioms) in_problem.insert(axiom.name);

  SelectionRecord rec;
  rec.problem_id = problem.id;
  std::set<std::string> chosen;
  if (sources.captioning) {
    if (!inputs.captioner || !inputs.vocab || !inputs.embedding)
      throw std::invalid_argument("select: captioning enabled without model, vocabulary or "
                                  "embedding for " + problem.id);
    bool greedy = std::holds_alternative<dec::Greedy>(inputs.method);
    if (!greedy && !inputs.rng)
      throw std::invalid_argument("select: stochastic decoding needs an rng");
    Rng scratch(0);
    dec::DecodeResult decoded = dec::decode(*inputs.captioner, *inputs.embedding, inputs.method,
                                            inputs.rng ? *inputs.rng : scratch);
    // Only tokens naming an axiom of this problem can enter the emitted
    // problem; the raw decode is the predict stage's business.
    for (int id : decoded.selection) {
      const std::string& name = inputs.vocab->name_of(id);
      if (in_problem.count(name) && chosen.insert(name).second) ++rec.n_captioning;
    }
  }
  if (sources.sine) {
    if (!inputs.sine_params)
      throw std::invalid_argument("select: sine enabled without parameters");
    for (const std::string& name : sine::sine_select(problem, *inputs.sine_params))
      if (chosen.insert(name).second) ++rec.n_sine;
  }
  if (sources.rare) {
    if (!inputs.positive_history || !inputs.vocab)
      throw std::invalid_argument("select: rare-axiom source enabled without history or "
                                  "vocabulary");
    for (const std::string& name :
         rare_axiom_select(problem, *inputs.positive_history, *inputs.vocab))
      if (chosen.insert(name).second) ++rec.n_rare;
  }
  for (const fof::AnnotatedFormula& axiom : problem.axioms)
    if (chosen.count(axiom.name)) rec.selection.push_back(axiom.name);
  return rec;
}

std::string emit_reduced_problem(const fof::Problem& problem,
                                 const std::vector<std::string>& selection) {
  std::set<std::string> keep(selection.begin(), selection.end());
  fof::Problem reduced;
  reduced.id = problem.id;
  reduced.conjecture = problem.conjecture;
  for (const fof::AnnotatedFormula& axiom : problem.axioms)
    if (keep.count(axiom.name)) reduced.axioms.push_back(axiom);
  return fof::serialize_problem(reduced);
}

dec::SampleMethod ExperimentConfig::decode_method() const {
  if (decode == "greedy") return dec::Greedy{decode_n};
  if (decode == "top_k") return dec::TopK{decode_k, decode_n};
  if (decode == "temperature") return dec::Temperature{decode_t, decode_n};
  throw std::invalid_argument("config: unknown decode method " + decode);
}

namespace {

class ConfigReader {
 public:
  explicit ConfigReader(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      line = trim(line);
      if (line.empty() || line[0] == '#') continue;
      std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": expected key = value");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty())
        throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
      if (!values_.emplace(key, value).second)
        throw std::invalid_argument("config: duplicate key " + key);
    }
  }

  template <typename Parse>
  void take(const std::string& key, Parse parse) {
    auto it = values_.find(key);
    if (it == values_.end()) return;
    try {
      parse(it->second);
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument("config: bad value for " + key + ": " + it->second);
    } catch (const std::out_of_range&) {
      throw std::invalid_argument("config: bad value for " + key + ": " + it->second);
    }
    values_.erase(it);
  }

  void finish() const {
    if (values_.empty()) return;
    std::string keys;
    for (const auto& [k, v] : values_) keys += (keys.empty() ? "" : ", ") + k;
    throw std::invalid_argument("config: unknown keys: " + keys);
  }

 private:
  std::map<std::string, std::string> values_;
};

bool parse_bool(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw std::invalid_argument("expected true or false");
}

int parse_int(const std::string& v) {
  std::size_t used = 0;
  int x = std::stoi(v, &used);
  if (used != v.size()) throw std::invalid_argument("trailing characters");
  return x;
}

double parse_real(const std::string& v) {
  std::size_t used = 0;
  double x = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument("trailing characters");
  return x;
}

std::uint64_t parse_seed(const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    throw std::invalid_argument("expected a non-negative integer");
  return std::stoull(v);
}

OrderScheme parse_order(const std::string& v) {
  if (v == "original") return OrderScheme::Original;
  if (v == "length") return OrderScheme::Length;
  if (v == "frequency") return OrderScheme::Frequency;
  if (v == "random") return OrderScheme::Random;
  if (v == "global_random") return OrderScheme::GlobalRandom;
  throw std::invalid_argument("unknown order scheme");
}

gnn::Pooling parse_pooling(const std::string& v) {
  if (v == "all") return gnn::Pooling::AllNodes;
  if (v == "axioms") return gnn::Pooling::AxiomNodes;
  if (v == "conjecture") return gnn::Pooling::ConjectureNode;
  throw std::invalid_argument("unknown pooling mode");
}

cap::AttentionStyle parse_attention(const std::string& v) {
  if (v == "none") return cap::AttentionStyle::None;
  if (v == "bahdanau") return cap::AttentionStyle::Bahdanau;
  if (v == "luong_dot") return cap::AttentionStyle::LuongDot;
  if (v == "luong_concat") return cap::AttentionStyle::LuongConcat;
  throw std::invalid_argument("unknown attention style");
}

void check(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("config: " + what);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  ConfigReader r(text);
  r.take("problems_dir", [&](const std::string& v) { c.problems_dir = v; });
  r.take("manifest", [&](const std::string& v) { c.manifest = v; });
  r.take("out_dir", [&](const std::string& v) { c.out_dir = v; });
  r.take("seed", [&](const std::string& v) { c.seed = parse_seed(v); });
  r.take("max_axioms", [&](const std::string& v) { c.max_axioms = parse_int(v); });
  r.take("train_fraction", [&](const std::string& v) { c.fractions.train = parse_real(v); });
  r.take("val_fraction", [&](const std::string& v) { c.fractions.val = parse_real(v); });
  r.take("vocab_size", [&](const std::string& v) { c.vocab_size = parse_int(v); });
  r.take("order", [&](const std::string& v) { c.order = parse_order(v); });
  r.take("gnn_dim", [&](const std::string& v) { c.gnn_dim = parse_int(v); });
  r.take("gnn_layers", [&](const std::string& v) { c.gnn_layers = parse_int(v); });
  r.take("pooling", [&](const std::string& v) { c.pooling = parse_pooling(v); });
  r.take("pretrain", [&](const std::string& v) {
    if (v == "supervised") c.pretrain_supervised = true;
    else if (v == "unsupervised") c.pretrain_supervised = false;
    else throw std::invalid_argument("expected supervised or unsupervised");
  });
  r.take("gnn_learning_rate",
         [&](const std::string& v) { c.gnn_learning_rate = parse_real(v); });
  r.take("gnn_epochs", [&](const std::string& v) { c.gnn_epochs = parse_int(v); });
  r.take("gnn_patience", [&](const std::string& v) { c.gnn_patience = parse_int(v); });
  r.take("pair_count", [&](const std::string& v) { c.pair_count = parse_int(v); });
  r.take("pair_normalize", [&](const std::string& v) { c.pair_normalize = parse_bool(v); });
  r.take("attention", [&](const std::string& v) { c.attention = parse_attention(v); });
  r.take("embedding_dim", [&](const std::string& v) { c.embedding_dim = parse_int(v); });
  r.take("lstm_units", [&](const std::string& v) { c.lstm_units = parse_int(v); });
  r.take("dense_units", [&](const std::string& v) { c.dense_units = parse_int(v); });
  r.take("dropout", [&](const std::string& v) { c.dropout = parse_real(v); });
  r.take("feature_normalization",
         [&](const std::string& v) { c.feature_normalization = parse_bool(v); });
  r.take("learning_rate", [&](const std::string& v) { c.learning_rate = parse_real(v); });
  r.take("batch_size", [&](const std::string& v) { c.batch_size = parse_int(v); });
  r.take("max_epochs", [&](const std::string& v) { c.max_epochs = parse_int(v); });
  r.take("patience", [&](const std::string& v) { c.patience = parse_int(v); });
  r.take("decode", [&](const std::string& v) {
    if (v != "greedy" && v != "top_k" && v != "temperature")
      throw std::invalid_argument("unknown decode method");
    c.decode = v;
  });
  r.take("decode_n", [&](const std::string& v) { c.decode_n = parse_int(v); });
  r.take("decode_k", [&](const std::string& v) { c.decode_k = parse_int(v); });
  r.take("decode_t", [&](const std::string& v) { c.decode_t = parse_real(v); });
  r.take("use_captioning", [&](const std::string& v) { c.use_captioning = parse_bool(v); });
  r.take("use_sine", [&](const std::string& v) { c.use_sine = parse_bool(v); });
  r.take("use_rare", [&](const std::string& v) { c.use_rare = parse_bool(v); });
  r.take("sine_tolerance", [&](const std::string& v) { c.sine_tolerance = parse_real(v); });
  r.take("sine_depth", [&](const std::string& v) { c.sine_depth = parse_int(v); });
  r.finish();

  check(!c.problems_dir.empty(), "problems_dir is required");
  check(!c.manifest.empty(), "manifest is required");
  check(!c.out_dir.empty(), "out_dir is required");
  check(c.max_axioms >= 1 && c.max_axioms <= cap::kMaxAxioms,
        "max_axioms must be in [1, " + std::to_string(cap::kMaxAxioms) + "]");
  check(c.fractions.train > 0.0 && c.fractions.train <= 1.0, "train_fraction must be in (0, 1]");
  check(c.fractions.val >= 0.0 && c.fractions.val < 1.0, "val_fraction must be in [0, 1)");
  check(c.fractions.train + c.fractions.val <= 1.0, "train and val fractions exceed 1");
  check(c.vocab_size >= 1, "vocab_size must be positive");
  check(c.gnn_dim >= 1 && c.gnn_layers >= 1, "gnn_dim and gnn_layers must be positive");
  check(c.gnn_learning_rate > 0.0 && c.learning_rate > 0.0, "learning rates must be positive");
  check(c.gnn_epochs >= 1 && c.max_epochs >= 1, "epoch counts must be positive");
  check(c.gnn_patience >= 0 && c.patience >= 0, "patience must be non-negative");
  check(c.pair_count >= 1, "pair_count must be positive");
  check(c.embedding_dim >= 1 && c.lstm_units >= 1 && c.dense_units >= 1,
        "captioner dimensions must be positive");
  check(c.dropout >= 0.0 && c.dropout < 1.0, "dropout must be in [0, 1)");
  check(c.batch_size >= 1, "batch_size must be positive");
  check(c.decode_n >= 1, "decode_n must be positive");
  check(c.decode_k >= c.decode_n, "decode_k must be at least decode_n");
  check(c.decode_t > 0.0, "decode_t must be positive");
  check(c.use_captioning || c.use_sine || c.use_rare, "no selection source enabled");
  check(c.sine_tolerance >= 1.0, "sine_tolerance must be at least 1");
  check(c.sine_depth >= 0, "sine_depth must be non-negative");
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

}  // namespace axcap::pipe
