#include "axcap/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "axcap/rng.hpp"

namespace axcap::spectral {

num::Tensor2 laplacian(const graph::ProblemGraph& g) {
  int n = g.node_count();
  if (n == 0) throw std::invalid_argument("laplacian: empty graph");
  auto nbr = graph::undirected_view(g);
  num::Tensor2 L(n, n);
  for (int i = 0; i < n; ++i) {
    L.at(i, i) = static_cast<double>(nbr[i].size());
    for (int j : nbr[i]) L.at(i, j) = -1.0;
  }
  return L;
}

std::vector<double> laplacian_spectrum(const graph::ProblemGraph& g) {
  num::Tensor2 L = laplacian(g);
  int n = L.rows;
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = L.at(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(M);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("laplacian_spectrum: eigensolver did not converge");
  std::vector<double> eig(n);
  for (int i = 0; i < n; ++i) eig[i] = solver.eigenvalues()(i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

double spectrum_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("spectrum_distance: empty spectrum");
  std::size_t k = std::min(a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double spectrum_distance(const graph::ProblemGraph& a, const graph::ProblemGraph& b) {
  return spectrum_distance(laplacian_spectrum(a), laplacian_spectrum(b));
}

const std::vector<double>& SpectrumCache::spectrum_for(int index,
                                                       const graph::ProblemGraph& g) {
  auto it = cache_.find(index);
  if (it != cache_.end()) return it->second;
  return cache_.emplace(index, laplacian_spectrum(g)).first->second;
}

std::vector<GraphPair> make_pair_dataset(const std::vector<graph::ProblemGraph>& graphs,
                                         int count, std::uint64_t seed, bool normalize) {
  if (graphs.empty()) throw std::invalid_argument("make_pair_dataset: no graphs");
  if (count < 0) throw std::invalid_argument("make_pair_dataset: negative count");
  Rng rng(seed);
  SpectrumCache cache;
  std::vector<GraphPair> out;
  out.reserve(count);
  for (int c = 0; c < count; ++c) {
    int i = static_cast<int>(rng.uniform_index(graphs.size()));
    int j = static_cast<int>(rng.uniform_index(graphs.size()));
    GraphPair p;
    p.left = std::min(i, j);
    p.right = std::max(i, j);
    double d = spectrum_distance(cache.spectrum_for(p.left, graphs[p.left]),
                                 cache.spectrum_for(p.right, graphs[p.right]));
    if (normalize) {
      double scale = static_cast<double>(
          std::max(graphs[p.left].node_count(), graphs[p.right].node_count()));
      d /= scale;
    }
    p.distance = d;
    out.push_back(p);
  }
  return out;
}

}  // namespace axcap::spectral
