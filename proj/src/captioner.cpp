#include "axcap/captioner.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace axcap::cap {

namespace {

const char* kReservedNames[Vocabulary::kReservedCount] = {"<pad>", "<start>", "<end>", "<unk>"};

bool clean_name(const std::string& name) {
  if (name.empty()) return false;
  for (char c : name)
    if (c == '\t' || c == '\n' || c == '\r' || c == ' ') return false;
  return true;
}

void validate_caption_config(const CaptionConfig& c) {
  if (c.vocab_size < Vocabulary::kReservedCount)
    throw std::invalid_argument("caption config: vocab smaller than the reserved tokens");
  if (c.problem_dim < 1 || c.embedding_dim < 1 || c.lstm_units < 1 || c.dense_units < 1)
    throw std::invalid_argument("caption config: dimensions must be positive");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0))
    throw std::invalid_argument("caption config: dropout must lie in [0, 1)");
}

num::Parameter init_uniform(const Rng& root, const std::string& name, int r, int c) {
  Rng rng = root.substream(name);
  return num::Parameter(name, num::uniform_init(r, c, -0.1, 0.1, rng));
}

// Gate preactivation: x W^T + h U^T + b.
int gate_pre(num::Tape& t, int x, int h, const TapeCaption::GateIds& g) {
  return t.add(t.add(t.matmul(x, g.w_t), t.matmul(h, g.u_t)), g.b);
}

}  // namespace

Vocabulary::Vocabulary(const std::vector<std::string>& names) : names_(names) {
  for (int i = 0; i < static_cast<int>(names_.size()); ++i) {
    const std::string& name = names_[static_cast<std::size_t>(i)];
    if (!clean_name(name))
      throw std::invalid_argument("vocabulary: empty or whitespace-bearing name: \"" + name + "\"");
    for (const char* r : kReservedNames)
      if (name == r) throw std::invalid_argument("vocabulary: name collides with " + name);
    if (!ids_.emplace(name, kReservedCount + i).second)
      throw std::invalid_argument("vocabulary: duplicate name: " + name);
  }
}

int Vocabulary::id_of(std::string_view name) const {
  auto it = ids_.find(name);
  return it == ids_.end() ? kUnknown : it->second;
}

const std::string& Vocabulary::name_of(int id) const {
  static const std::string reserved[kReservedCount] = {kReservedNames[0], kReservedNames[1],
                                                       kReservedNames[2], kReservedNames[3]};
  if (id >= 0 && id < kReservedCount) return reserved[id];
  int i = id - kReservedCount;
  if (i < 0 || i >= static_cast<int>(names_.size()))
    throw std::out_of_range("vocabulary: no token with id " + std::to_string(id));
  return names_[static_cast<std::size_t>(i)];
}

void save_vocabulary(std::ostream& out, const Vocabulary& v) {
  for (int id = 0; id < v.size(); ++id) out << id << '\t' << v.name_of(id) << '\n';
  if (!out) throw std::runtime_error("vocabulary: write failed");
}

Vocabulary load_vocabulary(std::istream& in) {
  std::vector<std::string> names;
  std::string line;
  int lineno = 0;
  int expected = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("vocabulary: missing tab at line " + std::to_string(lineno));
    int id = 0;
    try {
      std::size_t used = 0;
      id = std::stoi(line.substr(0, tab), &used);
      if (used != tab) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw std::runtime_error("vocabulary: bad id at line " + std::to_string(lineno));
    }
    if (id != expected)
      throw std::runtime_error("vocabulary: ids must be dense, expected " +
                               std::to_string(expected) + " at line " + std::to_string(lineno));
    std::string name = line.substr(tab + 1);
    if (id < Vocabulary::kReservedCount) {
      if (name != kReservedNames[id])
        throw std::runtime_error("vocabulary: id " + std::to_string(id) + " must be named " +
                                 kReservedNames[id]);
    } else {
      names.push_back(name);
    }
    ++expected;
  }
  if (expected < Vocabulary::kReservedCount)
    throw std::runtime_error("vocabulary: reserved tokens missing");
  return Vocabulary(names);  // re-validates names and uniqueness
}

void validate_sequence(const AxiomSequence& s, int vocab_size) {
  const std::vector<int>& tk = s.tokens;
  if (tk.size() < 2 || tk.front() != Vocabulary::kStart || tk.back() != Vocabulary::kEnd)
    throw std::invalid_argument("sequence " + s.problem_id +
                                ": must be wrapped in <start>/<end>");
  if (static_cast<int>(tk.size()) > kMaxSequence)
    throw std::invalid_argument("sequence " + s.problem_id + ": longer than " +
                                std::to_string(kMaxSequence) + " tokens");
  for (std::size_t i = 1; i + 1 < tk.size(); ++i) {
    int id = tk[i];
    if (id == Vocabulary::kUnknown) continue;
    if (id < Vocabulary::kReservedCount || id >= vocab_size)
      throw std::invalid_argument("sequence " + s.problem_id + ": interior token " +
                                  std::to_string(id) + " is not an axiom id");
  }
}

AxiomSequence make_sequence(const std::string& problem_id,
                            const std::vector<std::string>& axiom_names,
                            const Vocabulary& vocab) {
  if (static_cast<int>(axiom_names.size()) > kMaxAxioms)
    throw std::invalid_argument("sequence " + problem_id + ": more than " +
                                std::to_string(kMaxAxioms) + " axioms");
  AxiomSequence s;
  s.problem_id = problem_id;
  s.tokens.reserve(axiom_names.size() + 2);
  s.tokens.push_back(Vocabulary::kStart);
  for (const std::string& name : axiom_names) s.tokens.push_back(vocab.id_of(name));
  s.tokens.push_back(Vocabulary::kEnd);
  validate_sequence(s, vocab.size());
  return s;
}

int CaptionModel::lstm_input_size() const {
  int size = config.embedding_dim + config.problem_dim;
  if (config.attention == AttentionStyle::Bahdanau) size += config.problem_dim;
  return size;
}

int CaptionModel::dense_input_size() const {
  int size = config.lstm_units;
  if (config.attention == AttentionStyle::LuongDot ||
      config.attention == AttentionStyle::LuongConcat)
    size += config.problem_dim;
  return size;
}

bool CaptionModel::has_dot_projection() const {
  return config.attention == AttentionStyle::LuongDot &&
         config.problem_dim != config.lstm_units;
}

std::vector<num::Parameter*> CaptionModel::parameters() {
  std::vector<num::Parameter*> out = {&token_embedding,
                                      &input.w,  &input.u,  &input.b,  &forget.w, &forget.u,
                                      &forget.b, &cell.w,   &cell.u,   &cell.b,   &output.w,
                                      &output.u, &output.b, &dense_w,  &dense_b,  &out_w,
                                      &out_b};
  switch (config.attention) {
    case AttentionStyle::None:
      break;
    case AttentionStyle::Bahdanau:
      out.push_back(&att_w1);
      out.push_back(&att_w2);
      out.push_back(&att_v);
      break;
    case AttentionStyle::LuongDot:
      if (has_dot_projection()) out.push_back(&att_p);
      break;
    case AttentionStyle::LuongConcat:
      out.push_back(&att_w);
      out.push_back(&att_v);
      break;
  }
  return out;
}

std::vector<const num::Parameter*> CaptionModel::parameters() const {
  auto mutable_list = const_cast<CaptionModel*>(this)->parameters();
  return std::vector<const num::Parameter*>(mutable_list.begin(), mutable_list.end());
}

CaptionModel make_caption_model(const CaptionConfig& config) {
  validate_caption_config(config);
  CaptionModel m;
  m.config = config;
  Rng root(config.seed);
  int in = m.lstm_input_size();
  int units = config.lstm_units;

  m.token_embedding = init_uniform(root, "token_embedding", config.vocab_size,
                                   config.embedding_dim);
  auto make_gate = [&](const char* tag, bool forget_gate) {
    CaptionModel::Gate g;
    std::string base = std::string("lstm.") + tag;
    g.w = init_uniform(root, base + ".w", units, in);
    g.u = init_uniform(root, base + ".u", units, units);
    if (forget_gate) {
      g.b = num::Parameter(base + ".b", num::Tensor2(1, units, 1.0));
    } else {
      g.b = init_uniform(root, base + ".b", 1, units);
    }
    return g;
  };
  m.input = make_gate("input", false);
  m.forget = make_gate("forget", true);
  m.cell = make_gate("cell", false);
  m.output = make_gate("output", false);

  m.dense_w = init_uniform(root, "dense.w", config.dense_units, m.dense_input_size());
  m.dense_b = init_uniform(root, "dense.b", 1, config.dense_units);
  m.out_w = init_uniform(root, "out.w", config.vocab_size, config.dense_units);
  m.out_b = init_uniform(root, "out.b", 1, config.vocab_size);

  switch (config.attention) {
    case AttentionStyle::None:
      break;
    case AttentionStyle::Bahdanau:
      m.att_w1 = init_uniform(root, "attention.w1", units, config.problem_dim);
      m.att_w2 = init_uniform(root, "attention.w2", units, units);
      m.att_v = init_uniform(root, "attention.v", units, 1);
      break;
    case AttentionStyle::LuongDot:
      if (m.has_dot_projection())
        m.att_p = init_uniform(root, "attention.p", units, config.problem_dim);
      break;
    case AttentionStyle::LuongConcat:
      m.att_w = init_uniform(root, "attention.w", units, config.problem_dim + units);
      m.att_v = init_uniform(root, "attention.v", units, 1);
      break;
  }
  return m;
}

num::Tensor2 injected_problem_vector(const CaptionModel& m, const gnn::ProblemEmbedding& e) {
  if (static_cast<int>(e.pooled.size()) != m.config.problem_dim)
    throw std::invalid_argument("problem embedding width " + std::to_string(e.pooled.size()) +
                                " does not match the model's " +
                                std::to_string(m.config.problem_dim));
  num::Tensor2 v(1, m.config.problem_dim);
  v.data = e.pooled;
  if (m.config.feature_normalization) {
    double norm = 0.0;
    for (double x : v.data) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (double& x : v.data) x /= norm;
  }
  return v;
}

TapeCaption bind_captioner(num::Tape& t, const CaptionModel& m) {
  // Leaf creation must mirror CaptionModel::parameters() so param_leaves
  // lines up index-for-index.
  TapeCaption tc;
  auto leaf = [&](const num::Parameter& p) {
    int id = t.leaf(p);
    tc.param_leaves.push_back(id);
    return id;
  };
  tc.token_embedding = leaf(m.token_embedding);
  auto bind_gate = [&](const CaptionModel::Gate& g) {
    TapeCaption::GateIds ids;
    ids.w_t = t.transpose(leaf(g.w));
    ids.u_t = t.transpose(leaf(g.u));
    ids.b = leaf(g.b);
    return ids;
  };
  tc.input = bind_gate(m.input);
  tc.forget = bind_gate(m.forget);
  tc.cell = bind_gate(m.cell);
  tc.output = bind_gate(m.output);
  tc.dense_w_t = t.transpose(leaf(m.dense_w));
  tc.dense_b = leaf(m.dense_b);
  tc.out_w_t = t.transpose(leaf(m.out_w));
  tc.out_b = leaf(m.out_b);
  switch (m.config.attention) {
    case AttentionStyle::None:
      break;
    case AttentionStyle::Bahdanau:
      tc.att_w1_t = t.transpose(leaf(m.att_w1));
      tc.att_w2_t = t.transpose(leaf(m.att_w2));
      tc.att_v = leaf(m.att_v);
      break;
    case AttentionStyle::LuongDot:
      if (m.has_dot_projection()) tc.att_p_t = t.transpose(leaf(m.att_p));
      break;
    case AttentionStyle::LuongConcat:
      tc.att_w_t = t.transpose(leaf(m.att_w));
      tc.att_v = leaf(m.att_v);
      break;
  }
  return tc;
}

AttentionOut attention_context(num::Tape& t, const CaptionModel& m, const TapeCaption& tc,
                               int elements, int h) {
  int rows = t.val(elements).rows;
  if (rows < 1) throw std::invalid_argument("attention: no element rows");
  int scores = -1;  // column of one score per element
  switch (m.config.attention) {
    case AttentionStyle::None:
      throw std::invalid_argument("attention: style None has no context");
    case AttentionStyle::Bahdanau:
      scores = t.matmul(t.tanh_of(t.add(t.matmul(elements, tc.att_w1_t),
                                        t.matmul(h, tc.att_w2_t))),
                        tc.att_v);
      break;
    case AttentionStyle::LuongDot: {
      int projected = m.has_dot_projection() ? t.matmul(elements, tc.att_p_t) : elements;
      scores = t.matmul(projected, t.transpose(h));
      break;
    }
    case AttentionStyle::LuongConcat: {
      int joined = t.concat_cols(elements, t.repeat_row(h, rows));
      scores = t.matmul(t.tanh_of(t.matmul(joined, tc.att_w_t)), tc.att_v);
      break;
    }
  }
  AttentionOut out;
  out.alpha = t.softmax_rows(t.transpose(scores));
  out.context = t.matmul(out.alpha, elements);
  return out;
}

std::pair<std::vector<double>, std::vector<double>> attention_context(
    const CaptionModel& m, const num::Tensor2& elements, const std::vector<double>& h) {
  if (static_cast<int>(h.size()) != m.config.lstm_units)
    throw std::invalid_argument("attention: hidden state width mismatch");
  num::Tape t;
  TapeCaption tc = bind_captioner(t, m);
  num::Tensor2 hrow(1, m.config.lstm_units);
  hrow.data = h;
  AttentionOut out = attention_context(t, m, tc, t.leaf(elements), t.leaf(hrow));
  return {t.val(out.context).data, t.val(out.alpha).data};
}

TapeState initial_state(num::Tape& t, const CaptionModel& m) {
  TapeState s;
  s.h = t.leaf(num::Tensor2(1, m.config.lstm_units));
  s.cell = t.leaf(num::Tensor2(1, m.config.lstm_units));
  return s;
}

TapeStep caption_step(num::Tape& t, const CaptionModel& m, const TapeCaption& tc, int token,
                      TapeState state, int problem_vec, int node_matrix, bool train, Rng* rng) {
  if (token < 0 || token >= m.config.vocab_size)
    throw std::invalid_argument("caption step: token id " + std::to_string(token) +
                                " out of range");
  bool attending = m.config.attention != AttentionStyle::None;
  if (attending && node_matrix < 0)
    throw std::invalid_argument("caption step: attention needs the node matrix");

  int x = t.concat_cols(t.gather_rows(tc.token_embedding, {token}), problem_vec);
  TapeStep step;
  if (m.config.attention == AttentionStyle::Bahdanau) {
    AttentionOut att = attention_context(t, m, tc, node_matrix, state.h);
    step.alpha = att.alpha;
    x = t.concat_cols(x, att.context);
  }

  int i = t.sigmoid_of(gate_pre(t, x, state.h, tc.input));
  int f = t.sigmoid_of(gate_pre(t, x, state.h, tc.forget));
  int g = t.tanh_of(gate_pre(t, x, state.h, tc.cell));
  int o = t.sigmoid_of(gate_pre(t, x, state.h, tc.output));
  step.state.cell = t.add(t.mul(f, state.cell), t.mul(i, g));
  step.state.h = t.mul(o, t.tanh_of(step.state.cell));

  int dense_in = step.state.h;
  if (m.config.attention == AttentionStyle::LuongDot ||
      m.config.attention == AttentionStyle::LuongConcat) {
    AttentionOut att = attention_context(t, m, tc, node_matrix, step.state.h);
    step.alpha = att.alpha;
    dense_in = t.concat_cols(step.state.h, att.context);
  }
  if (train && m.config.dropout > 0.0) {
    if (!rng) throw std::invalid_argument("caption step: dropout needs an rng");
    dense_in = t.dropout(dense_in, m.config.dropout, *rng, true);
  }
  int d = t.tanh_of(t.add(t.matmul(dense_in, tc.dense_w_t), tc.dense_b));
  step.logits = t.add(t.matmul(d, tc.out_w_t), tc.out_b);
  step.probs = t.softmax_rows(step.logits);
  return step;
}

int caption_loss(num::Tape& t, const CaptionModel& m, const TapeCaption& tc,
                 const gnn::ProblemEmbedding& e, const AxiomSequence& s, bool train, Rng* rng) {
  validate_sequence(s, m.config.vocab_size);
  int problem_vec = t.leaf(injected_problem_vector(m, e));
  int node_matrix = -1;
  if (m.config.attention != AttentionStyle::None) {
    if (!e.node_matrix.has_value())
      throw std::invalid_argument("caption loss: attention needs node rows for " + e.problem_id);
    node_matrix = t.leaf(*e.node_matrix);
  }
  TapeState state = initial_state(t, m);
  int total = -1;
  for (std::size_t pos = 0; pos + 1 < s.tokens.size(); ++pos) {
    TapeStep step =
        caption_step(t, m, tc, s.tokens[pos], state, problem_vec, node_matrix, train, rng);
    int step_loss = t.softmax_cross_entropy(step.logits, s.tokens[pos + 1]);
    total = total < 0 ? step_loss : t.add(total, step_loss);
    state = step.state;
  }
  return total;
}

DecoderState initial_state(const CaptionModel& m) {
  DecoderState s;
  s.h.assign(static_cast<std::size_t>(m.config.lstm_units), 0.0);
  s.cell.assign(static_cast<std::size_t>(m.config.lstm_units), 0.0);
  return s;
}

std::pair<std::vector<double>, DecoderState> forward_step(const CaptionModel& m, int token,
                                                          const DecoderState& state,
                                                          const gnn::ProblemEmbedding& e,
                                                          bool train, Rng* rng) {
  if (static_cast<int>(state.h.size()) != m.config.lstm_units ||
      static_cast<int>(state.cell.size()) != m.config.lstm_units)
    throw std::invalid_argument("forward step: state width mismatch");
  num::Tape t;
  TapeCaption tc = bind_captioner(t, m);
  num::Tensor2 h(1, m.config.lstm_units), c(1, m.config.lstm_units);
  h.data = state.h;
  c.data = state.cell;
  TapeState ts{t.leaf(h), t.leaf(c)};
  int problem_vec = t.leaf(injected_problem_vector(m, e));
  int node_matrix = -1;
  if (m.config.attention != AttentionStyle::None) {
    if (!e.node_matrix.has_value())
      throw std::invalid_argument("forward step: attention needs node rows for " + e.problem_id);
    node_matrix = t.leaf(*e.node_matrix);
  }
  TapeStep step = caption_step(t, m, tc, token, ts, problem_vec, node_matrix, train, rng);
  DecoderState next;
  next.h = t.val(step.state.h).data;
  next.cell = t.val(step.state.cell).data;
  next.t = state.t + 1;
  return {t.val(step.probs).data, next};
}

double teacher_forced_loss(const CaptionModel& m, const gnn::ProblemEmbedding& e,
                           const AxiomSequence& s) {
  num::Tape t;
  TapeCaption tc = bind_captioner(t, m);
  return t.val(caption_loss(t, m, tc, e, s, false, nullptr)).at(0, 0);
}

}  // namespace axcap::cap
