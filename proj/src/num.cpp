#include "axcap/num.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace axcap::num {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void check_finite(const Tensor2& t, const char* op) {
  for (double v : t.data) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(std::string("non-finite value produced by ") + op);
    }
  }
}

}  // namespace

Tensor2::Tensor2(int r, int c, double fill)
    : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {
  require(r >= 0 && c >= 0, "negative tensor shape");
}

Tensor2 Tensor2::from(int r, int c, std::initializer_list<double> values) {
  Tensor2 t(r, c);
  require(static_cast<int>(values.size()) == r * c, "initializer size mismatch");
  std::copy(values.begin(), values.end(), t.data.begin());
  return t;
}

Tensor2 uniform_init(int rows, int cols, double lo, double hi, Rng& rng) {
  Tensor2 t(rows, cols);
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

Parameter::Parameter(std::string n, Tensor2 v)
    : name(std::move(n)),
      value(std::move(v)),
      grad(value.rows, value.cols),
      adam_m(value.rows, value.cols),
      adam_v(value.rows, value.cols) {}

void Parameter::zero_grad() {
  std::fill(grad.data.begin(), grad.data.end(), 0.0);
}

void adam_step(const std::vector<Parameter*>& params, double lr) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  for (Parameter* p : params) {
    p->step_count += 1;
    double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(p->step_count));
    double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(p->step_count));
    for (int i = 0; i < p->value.size(); ++i) {
      double g = p->grad.data[i];
      double m = kBeta1 * p->adam_m.data[i] + (1.0 - kBeta1) * g;
      double v = kBeta2 * p->adam_v.data[i] + (1.0 - kBeta2) * g * g;
      p->adam_m.data[i] = m;
      p->adam_v.data[i] = v;
      p->value.data[i] -= lr * (m / bc1) / (std::sqrt(v / bc2) + kEps);
    }
    check_finite(p->value, "adam_step");
  }
}

int Tape::push(Tensor2 value, std::function<void(Tape&)> pull, const char* op) {
  check_finite(value, op);
  Node n;
  n.grad = Tensor2(value.rows, value.cols);
  n.value = std::move(value);
  n.pull = std::move(pull);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(const Tensor2& value) { return push(value, nullptr, "leaf"); }

int Tape::matmul(int a, int b) {
  const Tensor2& A = val(a);
  const Tensor2& B = val(b);
  require(A.cols == B.rows, "matmul: inner dimensions differ");
  Tensor2 Y(A.rows, B.cols);
  for (int i = 0; i < A.rows; ++i) {
    for (int k = 0; k < A.cols; ++k) {
      double aik = A.at(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < B.cols; ++j) Y.at(i, j) += aik * B.at(k, j);
    }
  }
  int y = static_cast<int>(nodes_.size());
  return push(std::move(Y), [a, b, y](Tape& t) {
    const Tensor2& A = t.val(a);
    const Tensor2& B = t.val(b);
    const Tensor2& dY = t.grad(y);
    Tensor2& dA = t.grad_mut(a);
    Tensor2& dB = t.grad_mut(b);
    for (int i = 0; i < A.rows; ++i) {
      for (int j = 0; j < B.cols; ++j) {
        double g = dY.at(i, j);
        if (g == 0.0) continue;
        for (int k = 0; k < A.cols; ++k) {
          dA.at(i, k) += g * B.at(k, j);
          dB.at(k, j) += g * A.at(i, k);
        }
      }
    }
  }, "matmul");
}

int Tape::add(int a, int b) {
  const Tensor2& A = val(a);
  const Tensor2& B = val(b);
  bool broadcast = (B.rows == 1 && A.cols == B.cols && A.rows != 1);
  require(A.same_shape(B) || broadcast, "add: shape mismatch");
  Tensor2 Y = A;
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j) Y.at(i, j) += B.at(broadcast ? 0 : i, j);
  int y = static_cast<int>(nodes_.size());
  return push(std::move(Y), [a, b, broadcast, y](Tape& t) {
    const Tensor2& dY = t.grad(y);
    Tensor2& dA = t.grad_mut(a);
    Tensor2& dB = t.grad_mut(b);
    for (int i = 0; i < dY.rows; ++i)
      for (int j = 0; j < dY.cols; ++j) {
        dA.at(i, j) += dY.at(i, j);
        dB.at(broadcast ? 0 : i, j) += dY.at(i, j);
      }
  }, "add");
}

int Tape::sub(int a, int b) {
  const Tensor2& A = val(a);
  const Tensor2& B = val(b);
  require(A.same_shape(B), "sub: shape mismatch");
  Tensor2 Y = A;
  for (int i = 0; i < Y.size(); ++i) Y.data[i] -= B.data[i];
  int y = static_cast<int>(nodes_.size());
  return push(std::move(Y), [a, b, y](Tape& t) {
    const Tensor2& dY = t.grad(y);
    Tensor2& dA = t.grad_mut(a);
    Tensor2& dB = t.grad_mut(b);
    for (int i = 0; i < dY.size(); ++i) {
      dA.data[i] += dY.data[i];
      dB.data[i] -= dY.data[i];
    }
  }, "sub");
}

int Tape::mul(int a, int b) {
  const Tensor2& A = val(a);
  const Tensor2& B = val(b);
  require(A.same_shape(B), "mul: shape mismatch");
  Tensor2 Y = A;
  for (int i = 0; i < Y.size(); ++i) Y.data[i] *= B.data[i];
  int y = static_cast<int>(nodes_.size());
  return push(std::move(Y), [a, b, y](Tape& t) {
    const Tensor2& A = t.val(a);
    const Tensor2& B = t.val(b);
    const Tensor2& dY = t.grad(y);
    Tensor2& dA = t.grad_mut(a);
    Tensor2& dB = t.grad_mut(b);
    for (int i = 0; i < dY.size(); ++i) {
      dA.data[i] += dY.data[i] * B.data[i];
      dB.data[i] += dY.data[i] * A.data[i];
    }
  }, "mul");
}

int Tape::concat_cols(int a, int b) {
  const Tensor2& A = val(a);
  const Tensor2& B = val(b);
  require(A.rows == B.rows, "concat_cols: row counts differ");
  Tensor2 Y(A.rows, A.cols + B.cols);
  for (int i = 0; i < A.rows; ++i) {
    for (int j = 0; j < A.cols; ++j) Y.at(i, j) = A.at(i, j);
    for (int j = 0; j < B.cols; ++j) Y.at(i, A.cols + j) = B.at(i, j);
  }
  int sa = A.cols;
  int y = static_cast<int>(nodes_.size());
  return push(std::move(Y), [a, b, sa, y](Tape& t) {
    const Tensor2& dY = t.grad(y);
    Tensor2& dA = t.grad_mut(a);
    Tensor2& dB = t.grad_mut(b);
    for (int i = 0; i < dY.rows; ++i) {
      for (int j = 0; j < sa; ++j) dA.at(i, j) += dY.at(i, j);
      for (int j = sa; j < dY.cols; ++j) dB.at(i, j - sa) += dY.at(i, j);
    }
  }, "concat_cols");
}

int Tape::transpose(int a) {
  const Tensor2& A = val(a);
  Tensor2 Y(A.cols, A.rows);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j) Y.at(j, i) = A.at(i, j);
  int y = static_cast<int>(nodes_.size());
  return push(std::move(Y), [a, y](Tape& t) {
    const Tensor2& dY = t.grad(y);
    Tensor2& dA = t.grad_mut(a);
    for (int i = 0; i < dY.rows; ++i)
      for (int j = 0; j < dY.cols; ++j) dA.at(j, i) += dY.at(i, j);
  }, "transpose");
}

int Tape::tanh_of(int a) {
  Tensor2 Y = val(a);
  for (double& v : Y.data) v = std::tanh(v);
  int y = static_cast<int>(nodes_.size());
  return push(std::move(Y), [a, y](Tape& t) {
    const Tensor2& Y = t.val(y);
    const Tensor2& dY = t.grad(y);
    Tensor2& dA = t.grad_mut(a);
    for (int i = 0; i < dY.size(); ++i)
      dA.data[i] += dY.data[i] * (1.0 - Y.data[i] * Y.data[i]);
  }, "tanh");
}

int Tape::sigmoid_of(int a) {
  Tensor2 Y = val(a);
  for (double& v : Y.data) {
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                 : std::exp(v) / (1.0 + std::exp(v));
  }
  int y = static_cast<int>(nodes_.size());
  return push(std::move(Y), [a, y](Tape& t) {
    const Tensor2& Y = t.val(y);
    const Tensor2& dY = t.grad(y);
    Tensor2& dA = t.grad_mut(a);
    for (int i = 0; i < dY.size(); ++i)
      dA.data[i] += dY.data[i] * Y.data[i] * (1.0 - Y.data[i]);
  }, "sigmoid");
}

int Tape::dropout(int a, double rate, Rng& rng, bool train) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
  const Tensor2& A = val(a);
  if (!train || rate == 0.0) {
    Tensor2 Y = A;
    int y = static_cast<int>(nodes_.size());
    return push(std::move(Y), [a, y](Tape& t) {
      const Tensor2& dY = t.grad(y);
      Tensor2& dA = t.grad_mut(a);
      for (int i = 0; i < dY.size(); ++i) dA.data[i] += dY.data[i];
    }, "dropout");
  }
  auto mask = std::make_shared<std::vector<double>>(A.data.size());
  double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : *mask) m = rng.uniform() >= rate ? keep_scale : 0.0;
  Tensor2 Y = A;
  for (int i = 0; i < Y.size(); ++i) Y.data[i] *= (*mask)[i];
  int y = static_cast<int>(nodes_.size());
  return push(std::move(Y), [a, mask, y](Tape& t) {
    const Tensor2& dY = t.grad(y);
    Tensor2& dA = t.grad_mut(a);
    for (int i = 0; i < dY.size(); ++i) dA.data[i] += dY.data[i] * (*mask)[i];
  }, "dropout");
}

int Tape::gather_rows(int a, std::vector<int> rows) {
  const Tensor2& A = val(a);
  for (int r : rows) require(r >= 0 && r < A.rows, "gather_rows: index out of range");
  Tensor2 Y(static_cast<int>(rows.size()), A.cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < A.cols; ++j) Y.at(static_cast<int>(i), j) = A.at(rows[i], j);
  int y = static_cast<int>(nodes_.size());
  return push(std::move(Y), [a, rows = std::move(rows), y](Tape& t) {
    const Tensor2& dY = t.grad(y);
    Tensor2& dA = t.grad_mut(a);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (int j = 0; j < dY.cols; ++j)
        dA.at(rows[i], j) += dY.at(static_cast<int>(i), j);
  }, "gather_rows");
}

int Tape::mean_rows(int a, std::vector<int> rows) {
  require(!rows.empty(), "mean_rows: empty row set");
  const Tensor2& A = val(a);
  for (int r : rows) require(r >= 0 && r < A.rows, "mean_rows: index out of range");
  Tensor2 Y(1, A.cols);
  for (int r : rows)
    for (int j = 0; j < A.cols; ++j) Y.at(0, j) += A.at(r, j);
  double inv = 1.0 / static_cast<double>(rows.size());
  for (double& v : Y.data) v *= inv;
  int y = static_cast<int>(nodes_.size());
  return push(std::move(Y), [a, rows = std::move(rows), inv, y](Tape& t) {
    const Tensor2& dY = t.grad(y);
    Tensor2& dA = t.grad_mut(a);
    for (int r : rows)
      for (int j = 0; j < dY.cols; ++j) dA.at(r, j) += dY.at(0, j) * inv;
  }, "mean_rows");
}

int Tape::repeat_row(int a, int count) {
  const Tensor2& A = val(a);
  require(A.rows == 1, "repeat_row: input must be a single row");
  require(count >= 1, "repeat_row: count must be positive");
  Tensor2 Y(count, A.cols);
  for (int i = 0; i < count; ++i)
    for (int j = 0; j < A.cols; ++j) Y.at(i, j) = A.at(0, j);
  int y = static_cast<int>(nodes_.size());
  return push(std::move(Y), [a, y](Tape& t) {
    const Tensor2& dY = t.grad(y);
    Tensor2& dA = t.grad_mut(a);
    for (int i = 0; i < dY.rows; ++i)
      for (int j = 0; j < dY.cols; ++j) dA.at(0, j) += dY.at(i, j);
  }, "repeat_row");
}

int Tape::combine_rows(int a, const RowCombination& pattern) {
  const Tensor2& A = val(a);
  for (const auto& row : pattern)
    for (const auto& [j, w] : row) {
      (void)w;
      require(j >= 0 && j < A.rows, "combine_rows: index out of range");
    }
  Tensor2 Y(static_cast<int>(pattern.size()), A.cols);
  for (std::size_t r = 0; r < pattern.size(); ++r)
    for (const auto& [j, w] : pattern[r])
      for (int c = 0; c < A.cols; ++c)
        Y.at(static_cast<int>(r), c) += w * A.at(j, c);
  int y = static_cast<int>(nodes_.size());
  return push(std::move(Y), [a, pattern, y](Tape& t) {
    const Tensor2& dY = t.grad(y);
    Tensor2& dA = t.grad_mut(a);
    for (std::size_t r = 0; r < pattern.size(); ++r)
      for (const auto& [j, w] : pattern[r])
        for (int c = 0; c < dY.cols; ++c)
          dA.at(j, c) += w * dY.at(static_cast<int>(r), c);
  }, "combine_rows");
}

int Tape::softmax_rows(int a) {
  const Tensor2& A = val(a);
  require(A.cols >= 1, "softmax_rows: empty rows");
  Tensor2 Y(A.rows, A.cols);
  for (int i = 0; i < A.rows; ++i) {
    double m = A.at(i, 0);
    for (int j = 1; j < A.cols; ++j) m = std::max(m, A.at(i, j));
    double s = 0.0;
    for (int j = 0; j < A.cols; ++j) {
      double e = std::exp(A.at(i, j) - m);
      Y.at(i, j) = e;
      s += e;
    }
    for (int j = 0; j < A.cols; ++j) Y.at(i, j) /= s;
  }
  int y = static_cast<int>(nodes_.size());
  return push(std::move(Y), [a, y](Tape& t) {
    const Tensor2& Y = t.val(y);
    const Tensor2& dY = t.grad(y);
    Tensor2& dA = t.grad_mut(a);
    for (int i = 0; i < Y.rows; ++i) {
      double dot = 0.0;
      for (int j = 0; j < Y.cols; ++j) dot += dY.at(i, j) * Y.at(i, j);
      for (int j = 0; j < Y.cols; ++j)
        dA.at(i, j) += Y.at(i, j) * (dY.at(i, j) - dot);
    }
  }, "softmax_rows");
}

int Tape::softmax_cross_entropy(int logits, int target) {
  const Tensor2& L = val(logits);
  require(L.rows == 1, "softmax_cross_entropy: logits must be one row");
  require(target >= 0 && target < L.cols, "softmax_cross_entropy: target out of range");
  double m = L.at(0, 0);
  for (int j = 1; j < L.cols; ++j) m = std::max(m, L.at(0, j));
  double s = 0.0;
  for (int j = 0; j < L.cols; ++j) s += std::exp(L.at(0, j) - m);
  double lse = m + std::log(s);
  Tensor2 Y(1, 1);
  Y.at(0, 0) = lse - L.at(0, target);
  int y = static_cast<int>(nodes_.size());
  return push(std::move(Y), [logits, target, m, s, y](Tape& t) {
    const Tensor2& L = t.val(logits);
    double g = t.grad(y).at(0, 0);
    Tensor2& dL = t.grad_mut(logits);
    for (int j = 0; j < L.cols; ++j) {
      double p = std::exp(L.at(0, j) - m) / s;
      dL.at(0, j) += g * (p - (j == target ? 1.0 : 0.0));
    }
  }, "softmax_cross_entropy");
}

int Tape::sigmoid_bce(int logits, const Tensor2& targets) {
  const Tensor2& Z = val(logits);
  require(Z.same_shape(targets), "sigmoid_bce: target shape mismatch");
  for (double v : targets.data) require(v == 0.0 || v == 1.0, "sigmoid_bce: targets must be 0/1");
  // mean over entries of softplus(z) - z*y, with softplus(z) = log(1+e^z)
  // evaluated as max(z,0) + log1p(exp(-|z|)) for stability.
  double total = 0.0;
  for (int i = 0; i < Z.size(); ++i) {
    double z = Z.data[i];
    total += std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z))) - z * targets.data[i];
  }
  double inv = 1.0 / static_cast<double>(Z.size());
  Tensor2 Y(1, 1);
  Y.at(0, 0) = total * inv;
  auto tg = std::make_shared<Tensor2>(targets);
  int y = static_cast<int>(nodes_.size());
  return push(std::move(Y), [logits, tg, inv, y](Tape& t) {
    const Tensor2& Z = t.val(logits);
    double g = t.grad(y).at(0, 0) * inv;
    Tensor2& dZ = t.grad_mut(logits);
    for (int i = 0; i < Z.size(); ++i) {
      double z = Z.data[i];
      double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      dZ.data[i] += g * (sig - tg->data[i]);
    }
  }, "sigmoid_bce");
}

int Tape::l2_norm(int a) {
  const Tensor2& A = val(a);
  double s = 0.0;
  for (double v : A.data) s += v * v;
  Tensor2 Y(1, 1);
  Y.at(0, 0) = std::sqrt(s);
  int y = static_cast<int>(nodes_.size());
  return push(std::move(Y), [a, y](Tape& t) {
    const Tensor2& A = t.val(a);
    double norm = t.val(y).at(0, 0);
    if (norm == 0.0) return;  // subgradient 0 at the origin
    double g = t.grad(y).at(0, 0) / norm;
    Tensor2& dA = t.grad_mut(a);
    for (int i = 0; i < A.size(); ++i) dA.data[i] += g * A.data[i];
  }, "l2_norm");
}

int Tape::square(int a) {
  Tensor2 Y = val(a);
  for (double& v : Y.data) v *= v;
  int y = static_cast<int>(nodes_.size());
  return push(std::move(Y), [a, y](Tape& t) {
    const Tensor2& A = t.val(a);
    const Tensor2& dY = t.grad(y);
    Tensor2& dA = t.grad_mut(a);
    for (int i = 0; i < dY.size(); ++i) dA.data[i] += 2.0 * A.data[i] * dY.data[i];
  }, "square");
}

int Tape::scale(int a, double c) {
  Tensor2 Y = val(a);
  for (double& v : Y.data) v *= c;
  int y = static_cast<int>(nodes_.size());
  return push(std::move(Y), [a, c, y](Tape& t) {
    const Tensor2& dY = t.grad(y);
    Tensor2& dA = t.grad_mut(a);
    for (int i = 0; i < dY.size(); ++i) dA.data[i] += c * dY.data[i];
  }, "scale");
}

int Tape::add_const(int a, double c) {
  Tensor2 Y = val(a);
  for (double& v : Y.data) v += c;
  int y = static_cast<int>(nodes_.size());
  return push(std::move(Y), [a, y](Tape& t) {
    const Tensor2& dY = t.grad(y);
    Tensor2& dA = t.grad_mut(a);
    for (int i = 0; i < dY.size(); ++i) dA.data[i] += dY.data[i];
  }, "add_const");
}

int Tape::div_by_scalar(int a, int s) {
  const Tensor2& A = val(a);
  const Tensor2& S = val(s);
  require(S.rows == 1 && S.cols == 1, "div_by_scalar: divisor must be 1x1");
  double sv = S.at(0, 0);
  require(sv != 0.0, "div_by_scalar: division by zero");
  Tensor2 Y = A;
  for (double& v : Y.data) v /= sv;
  int y = static_cast<int>(nodes_.size());
  return push(std::move(Y), [a, s, sv, y](Tape& t) {
    const Tensor2& A = t.val(a);
    const Tensor2& dY = t.grad(y);
    Tensor2& dA = t.grad_mut(a);
    Tensor2& dS = t.grad_mut(s);
    double acc = 0.0;
    for (int i = 0; i < dY.size(); ++i) {
      dA.data[i] += dY.data[i] / sv;
      acc += dY.data[i] * A.data[i];
    }
    dS.at(0, 0) -= acc / (sv * sv);
  }, "div_by_scalar");
}

void Tape::backward(int loss) {
  require(loss >= 0 && loss < static_cast<int>(nodes_.size()), "backward: bad node id");
  const Tensor2& L = val(loss);
  require(L.rows == 1 && L.cols == 1, "backward: loss must be scalar");
  grad_mut(loss).at(0, 0) = 1.0;
  for (int i = loss; i >= 0; --i) {
    if (nodes_[i].pull) nodes_[i].pull(*this);
  }
}

double grad_check(const std::function<double()>& loss_value,
                  const std::function<void()>& compute_grads,
                  const std::vector<Parameter*>& params, double h) {
  compute_grads();
  std::vector<Tensor2> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);

  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter* p = params[pi];
    for (int i = 0; i < p->value.size(); ++i) {
      double saved = p->value.data[i];
      p->value.data[i] = saved + h;
      double up = loss_value();
      p->value.data[i] = saved - h;
      double down = loss_value();
      p->value.data[i] = saved;
      double numeric = (up - down) / (2.0 * h);
      double a = analytic[pi].data[i];
      // Central differencing of an O(1..10) loss carries cancellation noise
      // of roughly eps * |loss| / h, about 1e-10 here. The denominator floor
      // sits above that so components whose true gradient is below the noise
      // are compared absolutely instead of reading as spurious disagreement.
      double rel = std::fabs(a - numeric) / std::max(1e-5, std::fabs(a) + std::fabs(numeric));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error("checkpoint: bad numeric literal '" + s + "'");
  return v;
}

}  // namespace

void save_checkpoint(std::ostream& out, const std::vector<const Parameter*>& params,
                     const std::vector<std::string>& header_comments) {
  out << "axcap-ckpt 1\n";
  for (const std::string& c : header_comments) out << "# " << c << "\n";
  for (const Parameter* p : params) {
    out << "param " << p->name << " " << p->value.rows << " " << p->value.cols << "\n";
    for (int i = 0; i < p->value.rows; ++i) {
      for (int j = 0; j < p->value.cols; ++j) {
        if (j) out << " ";
        out << format_double(p->value.at(i, j));
      }
      out << "\n";
    }
  }
}

void load_checkpoint(std::istream& in, const std::vector<Parameter*>& params) {
  std::string line;
  if (!std::getline(in, line) || line != "axcap-ckpt 1")
    throw std::runtime_error("checkpoint: missing or unsupported version header");

  std::vector<bool> seen(params.size(), false);
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream hdr(line);
    std::string tag, name;
    int rows = 0, cols = 0;
    hdr >> tag >> name >> rows >> cols;
    if (tag != "param" || hdr.fail())
      throw std::runtime_error("checkpoint: malformed parameter header: " + line);

    Parameter* target = nullptr;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i]->name == name) {
        if (seen[i]) throw std::runtime_error("checkpoint: duplicate parameter " + name);
        seen[i] = true;
        target = params[i];
        break;
      }
    }
    if (!target) throw std::runtime_error("checkpoint: unknown parameter " + name);
    if (target->value.rows != rows || target->value.cols != cols)
      throw std::runtime_error("checkpoint: shape mismatch for " + name);

    for (int i = 0; i < rows; ++i) {
      if (!std::getline(in, line))
        throw std::runtime_error("checkpoint: truncated values for " + name);
      std::istringstream vals(line);
      std::string tok;
      for (int j = 0; j < cols; ++j) {
        if (!(vals >> tok))
          throw std::runtime_error("checkpoint: missing value in " + name);
        target->value.at(i, j) = parse_double(tok);
      }
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!seen[i])
      throw std::runtime_error("checkpoint: parameter not found: " + params[i]->name);
  }
}

}  // namespace axcap::num
