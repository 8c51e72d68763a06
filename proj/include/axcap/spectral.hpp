#pragma once

// Graph Laplacian spectra and the spectral distance used as the target for
// unsupervised encoder pre-training. Distances are computed on the
// undirected view of the problem graphs: L = D - A, eigenvalues ascending,
// and for two graphs with n and m nodes the distance compares the k =
// min(n, m) smallest eigenvalues:
//
//   pi(G, G') = sqrt(sum_{i=1..k} (lambda_i - lambda'_i)^2)

#include <cstdint>
#include <map>
#include <vector>

#include "axcap/graph.hpp"
#include "axcap/num.hpp"

namespace axcap::spectral {

// Dense symmetric Laplacian of the undirected view. Throws on empty graphs.
num::Tensor2 laplacian(const graph::ProblemGraph& g);

// Eigenvalues of the Laplacian, ascending. Throws if the solver fails to
// converge.
std::vector<double> laplacian_spectrum(const graph::ProblemGraph& g);

double spectrum_distance(const std::vector<double>& a, const std::vector<double>& b);
double spectrum_distance(const graph::ProblemGraph& a, const graph::ProblemGraph& b);

struct GraphPair {
  int left = 0;   // indices into the graph list handed to make_pair_dataset
  int right = 0;
  double distance = 0.0;
};

// Spectra keyed by graph index so repeated pair sampling does not recompute
// eigendecompositions.
class SpectrumCache {
 public:
  const std::vector<double>& spectrum_for(int index, const graph::ProblemGraph& g);

 private:
  std::map<int, std::vector<double>> cache_;
};

// `count` unordered pairs drawn uniformly with replacement (left <= right).
// When normalize is set, each distance is divided by max(n, m) of the pair's
// node counts.
std::vector<GraphPair> make_pair_dataset(const std::vector<graph::ProblemGraph>& graphs,
                                         int count, std::uint64_t seed,
                                         bool normalize = false);

}  // namespace axcap::spectral
