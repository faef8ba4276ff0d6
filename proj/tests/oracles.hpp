#pragma once

// Independent reference implementations used to check the production code.
// Everything here recomputes from definitions: no Lance-Williams shortcuts,
// no shared solver code paths.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "ct/cluster.hpp"
#include "ct/glm.hpp"
#include "ct/matrix.hpp"

namespace ct_test {

// ---------------------------------------------------------------------------
// Complete-linkage oracle: keeps explicit member lists and recomputes every
// inter-cluster distance from the raw points at every step. O(n^3) per merge.
// Same tie rule as production: smallest (min leaf, other min leaf) pair.
// ---------------------------------------------------------------------------
inline ct::Dendrogram hclust_complete_oracle(const ct::Matrix& rows) {
  const int n = static_cast<int>(rows.rows());
  ct::Dendrogram dend;
  dend.leaf_count = n;
  struct Group {
    std::vector<int> members;
    int node;
  };
  std::vector<Group> groups;
  for (int i = 0; i < n; ++i) groups.push_back({{i}, i});

  auto linkage = [&](const Group& a, const Group& b) {
    double worst = 0.0;
    for (int i : a.members)
      for (int j : b.members) {
        const double d = std::sqrt(ct::squared_distance(
            rows.row(static_cast<std::size_t>(i)), rows.row(static_cast<std::size_t>(j))));
        worst = std::max(worst, d);
      }
    return worst;
  };

  for (int step = 0; step < n - 1; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    int best_lo = 0, best_hi = 0;
    bool have = false;
    for (std::size_t i = 0; i < groups.size(); ++i)
      for (std::size_t j = i + 1; j < groups.size(); ++j) {
        const double d = linkage(groups[i], groups[j]);
        const int lo = std::min(groups[i].members.front(), groups[j].members.front());
        const int hi = std::max(groups[i].members.front(), groups[j].members.front());
        if (!have || d < best ||
            (d == best && (lo < best_lo || (lo == best_lo && hi < best_hi)))) {
          best = d;
          bi = i;
          bj = j;
          best_lo = lo;
          best_hi = hi;
          have = true;
        }
      }
    const bool left_first = groups[bi].members.front() <= groups[bj].members.front();
    const std::size_t li = left_first ? bi : bj;
    const std::size_t ri = left_first ? bj : bi;
    ct::DendrogramMerge merge;
    merge.left = groups[li].node;
    merge.right = groups[ri].node;
    merge.height = best;
    merge.size = static_cast<int>(groups[li].members.size() + groups[ri].members.size());
    dend.merges.push_back(merge);

    Group merged;
    merged.members = groups[li].members;
    merged.members.insert(merged.members.end(), groups[ri].members.begin(),
                          groups[ri].members.end());
    std::sort(merged.members.begin(), merged.members.end());
    merged.node = n + step;
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(std::max(bi, bj)));
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(std::min(bi, bj)));
    groups.push_back(merged);
  }
  return dend;
}

// ---------------------------------------------------------------------------
// Penalized-objective oracle with its own likelihood code. Supports gaussian
// and binomial with an intercept plus p <= 2 coefficients.
// ---------------------------------------------------------------------------
struct ObjectiveOracle {
  const ct::Matrix* x;
  const std::vector<double>* y_values;  // gaussian
  const std::vector<int>* y_labels;     // binomial
  double lambda;

  double operator()(std::span<const double> point) const {
    const std::size_t n = x->rows();
    const std::size_t p = x->cols();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double eta = point[0];
      for (std::size_t j = 0; j < p; ++j) eta += point[j + 1] * (*x)(i, j);
      if (y_values) {
        const double r = (*y_values)[i] - eta;
        total += 0.5 * r * r;
      } else {
        const double z = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
        total += z - ((*y_labels)[i] == 1 ? eta : 0.0);
      }
    }
    total /= static_cast<double>(n);
    for (std::size_t j = 0; j < p; ++j) total += lambda * std::abs(point[j + 1]);
    return total;
  }
};

// Refining dense grid search over (intercept, coefficients). Convexity makes
// the shrink-around-argmin iteration reliable.
inline double grid_search_min_objective(const ObjectiveOracle& oracle, std::size_t dims,
                                        double initial_range, int levels = 7,
                                        int points = 13) {
  std::vector<double> center(dims, 0.0);
  double range = initial_range;
  double best = std::numeric_limits<double>::infinity();
  for (int level = 0; level < levels; ++level) {
    std::vector<double> best_point = center;
    std::vector<std::size_t> idx(dims, 0);
    const std::size_t total = static_cast<std::size_t>(std::pow(points, dims));
    std::vector<double> point(dims);
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t rem = flat;
      for (std::size_t d = 0; d < dims; ++d) {
        const std::size_t q = rem % static_cast<std::size_t>(points);
        rem /= static_cast<std::size_t>(points);
        point[d] = center[d] - range +
                   2.0 * range * static_cast<double>(q) / static_cast<double>(points - 1);
      }
      const double v = oracle(point);
      if (v < best) {
        best = v;
        best_point = point;
      }
    }
    center = best_point;
    range = 4.0 * range / static_cast<double>(points - 1);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient of the oracle's own negative log-likelihood
// (no penalty), central differences.
// ---------------------------------------------------------------------------
inline std::vector<double> fd_gradient(const ObjectiveOracle& oracle,
                                       std::span<const double> point, double step = 1e-5) {
  std::vector<double> grad(point.size() - 1);
  std::vector<double> plus(point.begin(), point.end());
  std::vector<double> minus(point.begin(), point.end());
  for (std::size_t j = 1; j < point.size(); ++j) {
    plus[j] = point[j] + step;
    minus[j] = point[j] - step;
    grad[j - 1] = (oracle(plus) - oracle(minus)) / (2.0 * step);
    plus[j] = point[j];
    minus[j] = point[j];
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Plain least squares via normal equations (Gaussian elimination).
// ---------------------------------------------------------------------------
inline std::vector<double> ols_fit(const ct::Matrix& x, const std::vector<double>& y) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols() + 1;
  std::vector<double> ata(d * d, 0.0), atb(d, 0.0);
  std::vector<double> row(d, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) row[j + 1] = x(i, j);
    for (std::size_t a = 0; a < d; ++a) {
      atb[a] += row[a] * y[i];
      for (std::size_t b = 0; b < d; ++b) ata[a * d + b] += row[a] * row[b];
    }
    row[0] = 1.0;
  }
  for (std::size_t c = 0; c < d; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < d; ++r)
      if (std::abs(ata[r * d + c]) > std::abs(ata[piv * d + c])) piv = r;
    for (std::size_t k = 0; k < d; ++k) std::swap(ata[c * d + k], ata[piv * d + k]);
    std::swap(atb[c], atb[piv]);
    for (std::size_t r = 0; r < d; ++r) {
      if (r == c || ata[c * d + c] == 0.0) continue;
      const double f = ata[r * d + c] / ata[c * d + c];
      for (std::size_t k = 0; k < d; ++k) ata[r * d + k] -= f * ata[c * d + k];
      atb[r] -= f * atb[c];
    }
  }
  std::vector<double> out(d, 0.0);
  for (std::size_t c = 0; c < d; ++c)
    out[c] = ata[c * d + c] != 0.0 ? atb[c] / ata[c * d + c] : 0.0;
  return out;  // [intercept, coefs...]
}

// ---------------------------------------------------------------------------
// Max violation of the stationarity conditions of the penalized problem the
// solver actually solves (standardized scale), from the stored original-scale
// solution. Skips clipped fits (saturation is flagged, not optimal).
// ---------------------------------------------------------------------------
inline double kkt_max_violation(const ct::GlmFit& fit, const ct::Matrix& x,
                                const ct::Response& y) {
  const ct::Matrix z = ct::apply_standardizer(fit.standardizer, x);
  const std::size_t p = fit.n_features;
  const int groups = fit.family.n_groups();
  double worst = 0.0;
  for (std::size_t l = 0; l < fit.n_lambdas(); ++l) {
    if (fit.clipped[l] || !fit.converged[l]) continue;
    std::vector<double> std_coefs(static_cast<std::size_t>(groups) * p, 0.0);
    std::vector<double> std_intercepts(static_cast<std::size_t>(groups), 0.0);
    for (int g = 0; g < groups; ++g) {
      double shift = 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        const double beta = fit.coefficient(l, g, j);
        std_coefs[static_cast<std::size_t>(g) * p + j] =
            fit.standardizer.scales[j] > 0.0 ? beta * fit.standardizer.scales[j] : beta;
        shift += beta * fit.standardizer.means[j];
      }
      std_intercepts[static_cast<std::size_t>(g)] =
          fit.intercepts[l][static_cast<std::size_t>(g)] + shift;
    }
    const auto grad = ct::glm_smooth_gradient(fit.family, z, y, std_intercepts, std_coefs);
    const double lambda = fit.lambdas[l];
    for (std::size_t k = 0; k < grad.size(); ++k) {
      const double a = std_coefs[k];
      const double violation = a == 0.0 ? std::max(0.0, std::abs(grad[k]) - lambda)
                                        : std::abs(grad[k] + lambda * (a > 0 ? 1.0 : -1.0));
      worst = std::max(worst, violation);
    }
  }
  return worst;
}

}  // namespace ct_test
