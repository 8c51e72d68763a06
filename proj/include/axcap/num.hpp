#pragma once

// Minimal reverse-mode differentiation kernel used by the graph encoder and
// the caption decoder. Everything is a dense row-major matrix of doubles;
// training problems here are small enough that plain loops beat any attempt
// at cleverness. Each primitive checks shapes, verifies its output is finite
// and knows its exact adjoint.

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <initializer_list>
#include <string>
#include <vector>

#include "axcap/rng.hpp"

namespace axcap::num {

struct Tensor2 {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(int r, int c, double fill = 0.0);
  static Tensor2 from(int r, int c, std::initializer_list<double> values);

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  int size() const { return rows * cols; }
  bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
};

Tensor2 uniform_init(int rows, int cols, double lo, double hi, Rng& rng);

// A trainable matrix plus its optimizer state.
struct Parameter {
  std::string name;
  Tensor2 value;
  Tensor2 grad;
  Tensor2 adam_m;
  Tensor2 adam_v;
  long step_count = 0;

  Parameter() = default;
  Parameter(std::string n, Tensor2 v);
  void zero_grad();
};

// One Adam update over a set of parameters using each one's accumulated grad.
// beta1 = 0.9, beta2 = 0.999, eps = 1e-8 with bias correction.
void adam_step(const std::vector<Parameter*>& params, double lr);

// Sparse row mixing pattern: output row r is sum of weight * input row j over
// the listed (j, weight) pairs. This is how graph message passing enters the
// kernel without materializing a dense adjacency.
using RowCombination = std::vector<std::vector<std::pair<int, double>>>;

// Computation tape. Operations append nodes; backward() runs the recorded
// adjoints in reverse creation order. Node handles are plain ints.
class Tape {
 public:
  int leaf(const Tensor2& value);
  int leaf(const Parameter& p) { return leaf(p.value); }

  const Tensor2& val(int id) const { return nodes_[id].value; }
  const Tensor2& grad(int id) const { return nodes_[id].grad; }

  int matmul(int a, int b);
  // Elementwise sum. b may also be a single row broadcast over a's rows.
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);  // elementwise
  int concat_cols(int a, int b);
  int transpose(int a);
  int tanh_of(int a);
  int sigmoid_of(int a);
  // Inverted dropout: scales kept entries by 1/(1-rate) during training,
  // identity when train is false.
  int dropout(int a, double rate, Rng& rng, bool train);
  // Embedding-style lookup; gradient scatters back into the table rows.
  int gather_rows(int a, std::vector<int> rows);
  // Column-wise mean over the given row subset -> 1 x cols.
  int mean_rows(int a, std::vector<int> rows);
  int repeat_row(int a, int count);  // 1 x c -> count x c
  int combine_rows(int a, const RowCombination& pattern);
  int softmax_rows(int a);
  // logits is 1 x k; returns the scalar -log softmax(logits)[target].
  int softmax_cross_entropy(int logits, int target);
  // Mean binary cross entropy of sigmoid(logits) against constant targets
  // in {0,1}; computed via softplus so large logits stay finite.
  int sigmoid_bce(int logits, const Tensor2& targets);
  int l2_norm(int a);       // sqrt(sum x^2) -> 1 x 1
  int square(int a);        // elementwise
  int scale(int a, double c);
  int add_const(int a, double c);
  // y = x / s where s is a positive 1 x 1 node (used for L2 normalization).
  int div_by_scalar(int a, int s);

  // Seeds d(loss)/d(loss) = 1 and pulls gradients back to every node.
  // loss must be 1 x 1.
  void backward(int loss);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor2 value;
    Tensor2 grad;
    std::function<void(Tape&)> pull;
  };

  int push(Tensor2 value, std::function<void(Tape&)> pull, const char* op);
  Tensor2& grad_mut(int id) { return nodes_[id].grad; }

  std::deque<Node> nodes_;
};

// Central-difference gradient check. compute_grads must populate param.grad
// from a fresh evaluation (zeroing first); loss_value must evaluate the same
// objective from the current parameter values without touching grads.
// Returns the max relative error max|a-n| / max(1e-5, |a|+|n|) over all
// parameter entries; the floor keeps sub-noise gradient components from
// dominating the comparison.
double grad_check(const std::function<double()>& loss_value,
                  const std::function<void()>& compute_grads,
                  const std::vector<Parameter*>& params, double h = 1e-5);

// Locale-independent shortest-faithful formatting (17 significant digits).
std::string format_double(double v);

// Versioned textual checkpoint: "axcap-ckpt 1" header, optional '#' comment
// lines, then "param <name> <rows> <cols>" followed by row-major values.
void save_checkpoint(std::ostream& out, const std::vector<const Parameter*>& params,
                     const std::vector<std::string>& header_comments = {});
// Loads by name into the given parameters; every parameter must be present
// with a matching shape. Unknown names in the file are an error.
void load_checkpoint(std::istream& in, const std::vector<Parameter*>& params);

}  // namespace axcap::num
