#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "corebudget/dataset.hpp"
#include "corebudget/errors.hpp"
#include "corebudget/metric.hpp"
#include "corebudget/parallel.hpp"

namespace corebudget {

struct CoverageReport {
  double mean_radius = 0.0;    // rho(S): empirical mean nearest-seed distance
  double maxmin_radius = 0.0;  // k-center objective value
  std::vector<double> nearest_seed_distance;  // aligned with the evaluated rows
  std::size_t seed_count = 0;
};

struct HybridCertificate {
  std::vector<double> region_coverage_terms;  // greedy maxmin at q_c per region
  double max_region_term = 0.0;
  double delta_cluster = 0.0;  // max intra-region diameter
  double alpha = 0.0;
  std::optional<double> delta_diff;  // user-supplied only; never estimated
  bool diff_term_unquantified = false;
  double bound_value = 0.0;
};

// Mean and max of distances from every evaluated row to its nearest seed row.
inline CoverageReport coverage_radius(const EmbeddingSet& X,
                                      const std::vector<std::size_t>& points,
                                      const std::vector<std::size_t>& seeds) {
  if (seeds.empty()) throw ValidationError("coverage_radius: empty seed set");
  CoverageReport report;
  report.seed_count = seeds.size();
  report.nearest_seed_distance.resize(points.size());
  parallel_for(points.size(), [&](std::size_t i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t s : seeds)
      best = std::min(best, squared_distance(X.row(points[i]), X.row(s)));
    report.nearest_seed_distance[i] = std::sqrt(best);
  });
  double sum = 0.0, worst = 0.0;
  for (double d : report.nearest_seed_distance) {
    sum += d;
    worst = std::max(worst, d);
  }
  report.mean_radius = points.empty() ? 0.0 : sum / static_cast<double>(points.size());
  report.maxmin_radius = worst;
  return report;
}

// Farthest-first traversal over `candidates`, starting at `start` (a member of
// candidates). Each next point maximizes min distance to the chosen set; ties
// broken by candidate order.
inline std::vector<std::size_t> gonzalez(const EmbeddingSet& X,
                                         const std::vector<std::size_t>& candidates,
                                         std::size_t k, std::size_t start) {
  if (k < 1 || k > candidates.size())
    throw ValidationError("gonzalez: k must lie in [1, n]");
  std::vector<std::size_t> chosen{start};
  std::vector<double> min_sq(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    min_sq[i] = squared_distance(X.row(candidates[i]), X.row(start));
  while (chosen.size() < k) {
    std::size_t best_idx = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (min_sq[i] > best) {
        best = min_sq[i];
        best_idx = i;
      }
    }
    const std::size_t next = candidates[best_idx];
    chosen.push_back(next);
    for (std::size_t i = 0; i < candidates.size(); ++i)
      min_sq[i] = std::min(min_sq[i], squared_distance(X.row(candidates[i]), X.row(next)));
  }
  return chosen;
}

struct KCenterSolution {
  double radius = 0.0;
  std::vector<std::size_t> centers;
};

// Exhaustive discrete k-center (centers restricted to data points). Guarded
// to n <= 15, k <= 4.
inline KCenterSolution optimal_kcenter_bruteforce(const EmbeddingSet& X,
                                                  const std::vector<std::size_t>& candidates,
                                                  std::size_t k) {
  const std::size_t n = candidates.size();
  if (n > 15 || k > 4) throw ValidationError("optimal_kcenter_bruteforce: instance too large");
  if (k < 1 || k > n) throw ValidationError("optimal_kcenter_bruteforce: k must lie in [1, n]");

  std::vector<double> dist(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      dist[i * n + j] = distance(X.row(candidates[i]), X.row(candidates[j]));

  std::vector<std::size_t> combo(k);
  for (std::size_t i = 0; i < k; ++i) combo[i] = i;
  KCenterSolution best;
  best.radius = std::numeric_limits<double>::infinity();
  while (true) {
    double worst = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t c : combo) nearest = std::min(nearest, dist[p * n + c]);
      worst = std::max(worst, nearest);
    }
    if (worst < best.radius) {
      best.radius = worst;
      best.centers.clear();
      for (std::size_t c : combo) best.centers.push_back(candidates[c]);
    }
    // next combination
    std::size_t i = k;
    while (i > 0 && combo[i - 1] == n - k + i - 1) --i;
    if (i == 0) break;
    ++combo[i - 1];
    for (std::size_t j = i; j < k; ++j) combo[j] = combo[j - 1] + 1;
  }
  return best;
}

namespace detail {

inline double region_diameter(const EmbeddingSet& X, const std::vector<std::size_t>& region) {
  double diam = 0.0;
  for (std::size_t i = 0; i < region.size(); ++i)
    for (std::size_t j = i + 1; j < region.size(); ++j)
      diam = std::max(diam, distance(X.row(region[i]), X.row(region[j])));
  return diam;
}

// Point of the region nearest to its centroid; ties by position.
inline std::size_t region_medoid(const EmbeddingSet& X, const std::vector<std::size_t>& region) {
  std::vector<double> centroid(X.dim, 0.0);
  for (std::size_t r : region) {
    auto row = X.row(r);
    for (std::size_t c = 0; c < X.dim; ++c) centroid[c] += row[c];
  }
  for (double& v : centroid) v /= static_cast<double>(region.size());
  std::size_t best = region[0];
  double best_sq = std::numeric_limits<double>::infinity();
  for (std::size_t r : region) {
    const double sq = squared_distance(X.row(r), {centroid.data(), centroid.size()});
    if (sq < best_sq) {
      best_sq = sq;
      best = r;
    }
  }
  return best;
}

}  // namespace detail

// Per-region greedy coverage terms (upper bound on the optimal q_c-point
// radius up to a factor of 2) plus the maximum intra-region diameter. The
// difficulty penalty alpha * delta_diff is included only when the caller
// supplies delta_diff; with alpha = 0 the term vanishes entirely.
inline HybridCertificate hybrid_certificate(const EmbeddingSet& X,
                                            const std::vector<std::vector<std::size_t>>& regions,
                                            const std::vector<std::int64_t>& quotas,
                                            double alpha,
                                            std::optional<double> delta_diff = std::nullopt) {
  if (regions.size() != quotas.size())
    throw ValidationError("hybrid_certificate: quotas inconsistent with regions");
  HybridCertificate cert;
  cert.alpha = alpha;
  cert.delta_diff = delta_diff;
  for (std::size_t c = 0; c < regions.size(); ++c) {
    const auto& region = regions[c];
    if (region.empty()) {
      cert.region_coverage_terms.push_back(0.0);
      continue;
    }
    const double diam = detail::region_diameter(X, region);
    cert.delta_cluster = std::max(cert.delta_cluster, diam);
    if (quotas[c] <= 0) {
      // An unserved region contributes its own diameter as the coverage term.
      cert.region_coverage_terms.push_back(diam);
      continue;
    }
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(quotas[c]), region.size());
    const auto seeds = gonzalez(X, region, k, detail::region_medoid(X, region));
    cert.region_coverage_terms.push_back(coverage_radius(X, region, seeds).maxmin_radius);
  }
  for (double t : cert.region_coverage_terms)
    cert.max_region_term = std::max(cert.max_region_term, t);
  cert.bound_value = cert.max_region_term + cert.delta_cluster;
  if (alpha > 0.0) {
    if (delta_diff)
      cert.bound_value += alpha * *delta_diff;
    else
      cert.diff_term_unquantified = true;
  }
  return cert;
}

}  // namespace corebudget
