#pragma once

// Shared helpers for tests: synthetic graphs and a brute-force eigenvalue
// oracle (characteristic polynomial roots) that is independent of the
// library-backed solver under test.

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "axcap/graph.hpp"
#include "axcap/num.hpp"
#include "axcap/rng.hpp"

namespace testsupport {

// A bare graph with the given undirected edge set; node types cycle through
// the enum so type-dependent code sees variety.
inline axcap::graph::ProblemGraph make_graph(int n,
                                             const std::vector<std::pair<int, int>>& edges) {
  axcap::graph::ProblemGraph g;
  g.problem_id = "synthetic";
  for (int i = 0; i < n; ++i)
    g.node_types.push_back(static_cast<axcap::graph::NodeType>(i % axcap::graph::kNodeTypeCount));
  g.edges = edges;
  return g;
}

inline axcap::graph::ProblemGraph path_graph(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return make_graph(n, e);
}

inline axcap::graph::ProblemGraph complete_graph(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) e.emplace_back(i, j);
  return make_graph(n, e);
}

inline axcap::graph::ProblemGraph random_graph(axcap::Rng& rng, int n, double p) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < p) e.emplace_back(i, j);
  return make_graph(n, e);
}

// --- characteristic polynomial oracle -------------------------------------

// Coefficients of det(xI - A), index i holding the coefficient of x^i.
// Faddeev-LeVerrier; for integer matrices of the sizes used in tests every
// intermediate is integral, so the doubles are exact.
inline std::vector<double> char_poly(const axcap::num::Tensor2& A) {
  int n = A.rows;
  if (n != A.cols) throw std::invalid_argument("char_poly: square matrix required");
  std::vector<double> c(n + 1, 0.0);
  c[n] = 1.0;
  axcap::num::Tensor2 M(n, n);
  for (int i = 0; i < n; ++i) M.at(i, i) = 1.0;
  for (int k = 1; k <= n; ++k) {
    axcap::num::Tensor2 AM(n, n);
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n; ++l) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += A.at(i, j) * M.at(j, l);
        AM.at(i, l) = s;
      }
    double tr = 0.0;
    for (int i = 0; i < n; ++i) tr += AM.at(i, i);
    double ck = -tr / static_cast<double>(k);
    c[n - k] = ck;
    M = AM;
    for (int i = 0; i < n; ++i) M.at(i, i) += ck;
  }
  return c;
}

inline double poly_eval(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) v = v * x + c[i];
  return v;
}

inline std::vector<double> poly_derivative(const std::vector<double>& c) {
  std::vector<double> d;
  for (std::size_t i = 1; i < c.size(); ++i) d.push_back(c[i] * static_cast<double>(i));
  return d;
}

// All real roots with multiplicity, ascending. Valid for polynomials whose
// roots are all real (characteristic polynomials of symmetric matrices).
// Simple roots come from sign-change bisection between critical points;
// roots at critical points inherit multiplicity from the derivative.
inline std::vector<double> poly_real_roots(const std::vector<double>& c) {
  std::vector<double> coef = c;
  while (coef.size() > 1 && coef.back() == 0.0) coef.pop_back();
  int degree = static_cast<int>(coef.size()) - 1;
  if (degree <= 0) return {};
  if (degree == 1) return {-coef[0] / coef[1]};

  std::vector<double> deriv_roots = poly_real_roots(poly_derivative(coef));

  double maxc = 0.0;
  for (int i = 0; i < degree; ++i) maxc = std::max(maxc, std::fabs(coef[i] / coef[degree]));
  double bound = 1.0 + maxc;

  double scale = 1.0;
  for (double v : coef) scale = std::max(scale, std::fabs(v));
  const double tol = 1e-4 * scale;

  // critical points with their multiplicity in the derivative
  std::map<double, int> crit;
  for (double r : deriv_roots) {
    auto it = crit.lower_bound(r - 1e-9);
    if (it != crit.end() && std::fabs(it->first - r) < 1e-9) {
      it->second += 1;
    } else {
      crit[r] = 1;
    }
  }

  std::vector<double> roots;
  std::vector<double> points{-bound};
  for (const auto& [r, m] : crit) {
    if (std::fabs(poly_eval(coef, r)) <= tol) {
      for (int i = 0; i <= m; ++i) roots.push_back(r);
    }
    points.push_back(r);
  }
  points.push_back(bound);

  // The tolerance only decides whether an interval endpoint already is a
  // root (then that root was counted at the critical point); the bisection
  // itself must use strict signs or it stops tol/|p'| away from the root.
  auto endpoint_sign = [&](double x) {
    double v = poly_eval(coef, x);
    if (std::fabs(v) <= tol) return 0;
    return v > 0.0 ? 1 : -1;
  };
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    double a = points[i], b = points[i + 1];
    int sa = endpoint_sign(a), sb = endpoint_sign(b);
    if (sa == 0 || sb == 0 || sa == sb) continue;
    for (int it = 0; it < 200 && a != b; ++it) {
      double mid = 0.5 * (a + b);
      double v = poly_eval(coef, mid);
      if (v == 0.0) {
        a = b = mid;
        break;
      }
      ((v > 0.0 ? 1 : -1) == sa ? a : b) = mid;
    }
    roots.push_back(0.5 * (a + b));
  }
  std::sort(roots.begin(), roots.end());
  if (static_cast<int>(roots.size()) != degree)
    throw std::runtime_error("poly_real_roots: lost a root (tolerance too tight?)");
  return roots;
}

}  // namespace testsupport
