#pragma once

// Set-overlap scores for selections: Jaccard |A∩B|/|A∪B| and Coverage
// |A∩B|/|B|. Two empty sets are identical, so their Jaccard is 1; Coverage
// of an empty ground truth is undefined and reported as an empty optional.

#include <algorithm>
#include <iterator>
#include <optional>
#include <set>

namespace axcap::metrics {

template <typename T>
double jaccard(const std::set<T>& a, const std::set<T>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const T& x : a) common += b.count(x);
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

template <typename T>
std::optional<double> coverage(const std::set<T>& a, const std::set<T>& b) {
  if (b.empty()) return std::nullopt;
  std::size_t common = 0;
  for (const T& x : a) common += b.count(x);
  return static_cast<double>(common) / static_cast<double>(b.size());
}

}  // namespace axcap::metrics
