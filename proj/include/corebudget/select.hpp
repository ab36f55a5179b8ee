#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "corebudget/cluster.hpp"
#include "corebudget/coverage.hpp"
#include "corebudget/dataset.hpp"
#include "corebudget/errors.hpp"
#include "corebudget/metric.hpp"

namespace corebudget {

struct SelectionConfig {
  std::int64_t budget = 1;
  double alpha = 0.5;
  std::size_t clusters = 16;
  std::size_t m0 = 3;
  double eps = 1e-12;
  std::uint64_t seed = 0;
  double warmup_fraction = 0.1;
  std::string cluster_backend = "gmm";  // or "kmeans"
};

struct ScoreTable {
  // All vectors aligned with the pool row list passed to select_budget.
  std::vector<double> difficulty_norm;  // D_bar in [0,1)
  std::vector<double> diversity_norm;   // n_bar in [0,1]
  std::vector<double> combined;         // s = alpha*D_bar + (1-alpha)*n_bar
  std::vector<int> region;
};

struct QuotaPlan {
  std::vector<std::int64_t> quotas;
  std::int64_t q_min = 1;
  bool feasible_floors = true;
};

struct SelectionResult {
  std::vector<std::size_t> selected_rows;  // rows of the EmbeddingSet
  std::vector<std::string> selected_ids;
  QuotaPlan quota_plan;
  ScoreTable scores;
  HybridCertificate certificate;
  SelectionConfig config;
};

// D_bar(x) = Diff(x) / (max Diff + eps); an all-zero input stays all zero.
inline std::vector<double> normalize_difficulty(const std::vector<double>& raw, double eps) {
  double max_raw = 0.0;
  for (double v : raw) {
    if (v < 0.0) throw ValidationError("normalize_difficulty: negative raw difficulty");
    max_raw = std::max(max_raw, v);
  }
  std::vector<double> out(raw.size());
  const double denom = max_raw + eps;
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = denom > 0.0 ? raw[i] / denom : 0.0;
  return out;
}

// Farthest-point seeds within one region: the first seed is the region medoid,
// each further seed maximizes min distance to the chosen set (ties by
// position in `region_rows`). Returns min(m0, |region|) rows.
inline std::vector<std::size_t> fps_seeds(const EmbeddingSet& X,
                                          const std::vector<std::size_t>& region_rows,
                                          std::size_t m0) {
  if (region_rows.empty()) throw ValidationError("fps_seeds: empty region");
  const std::size_t k = std::min(m0, region_rows.size());
  return gonzalez(X, region_rows, k, detail::region_medoid(X, region_rows));
}

// n_bar(x) = (min_{z in S0} d(x,z) - n_min) / (n_max - n_min + eps), with
// n_min/n_max taken over the whole pool.
inline std::vector<double> diversity_scores(const EmbeddingSet& X,
                                            const std::vector<std::size_t>& pool_rows,
                                            const std::vector<std::size_t>& seed_rows,
                                            double eps) {
  if (seed_rows.empty()) throw ValidationError("diversity_scores: empty seed set");
  const CoverageReport report = coverage_radius(X, pool_rows, seed_rows);
  double n_min = std::numeric_limits<double>::infinity(), n_max = 0.0;
  for (double d : report.nearest_seed_distance) {
    n_min = std::min(n_min, d);
    n_max = std::max(n_max, d);
  }
  std::vector<double> out(pool_rows.size());
  const double denom = n_max - n_min + eps;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = denom > 0.0 ? (report.nearest_seed_distance[i] - n_min) / denom : 0.0;
  return out;
}

// Proportional quotas q_c = max{q_min, floor(w_c B)} with q_min =
// max{1, floor(B/(10C))}, repaired to sum exactly B by largest-remainder
// redistribution, capped at region sizes. When even the floors exceed B, the
// floors are kept on the largest-weight regions only and the plan is flagged
// infeasible.
inline QuotaPlan allocate_quotas(const std::vector<double>& weights, std::int64_t B,
                                 std::size_t C, const std::vector<std::size_t>& region_sizes) {
  if (B < 1) throw ValidationError("allocate_quotas: budget must be >= 1");
  if (weights.size() != C || region_sizes.size() != C)
    throw ValidationError("allocate_quotas: C inconsistent with weights/sizes");
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(wsum - 1.0) > 1e-9)
    throw ValidationError("allocate_quotas: weights do not sum to 1");
  std::int64_t total_size = 0;
  for (std::size_t s : region_sizes) total_size += static_cast<std::int64_t>(s);
  if (B > total_size) throw ValidationError("allocate_quotas: budget exceeds pool size");

  QuotaPlan plan;
  plan.q_min = std::max<std::int64_t>(1, B / static_cast<std::int64_t>(10 * C));
  plan.quotas.assign(C, 0);

  std::vector<std::int64_t> floor_c(C);
  std::int64_t floor_sum = 0;
  for (std::size_t c = 0; c < C; ++c) {
    floor_c[c] = std::min<std::int64_t>(plan.q_min, static_cast<std::int64_t>(region_sizes[c]));
    floor_sum += floor_c[c];
  }

  if (floor_sum > B) {
    plan.feasible_floors = false;
    std::vector<std::size_t> order(C);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return weights[a] > weights[b];
    });
    std::int64_t remaining = B;
    for (std::size_t c : order) {
      const std::int64_t q = std::min(floor_c[c], remaining);
      plan.quotas[c] = q;
      remaining -= q;
      if (remaining == 0) break;
    }
    return plan;
  }

  std::vector<double> remainder(C);
  std::int64_t total = 0;
  for (std::size_t c = 0; c < C; ++c) {
    const double share = weights[c] * static_cast<double>(B);
    const auto prop = static_cast<std::int64_t>(std::floor(share));
    remainder[c] = share - std::floor(share);
    plan.quotas[c] = std::min<std::int64_t>(std::max(floor_c[c], prop),
                                            static_cast<std::int64_t>(region_sizes[c]));
    total += plan.quotas[c];
  }

  while (total < B) {
    // Grant one unit to the uncapped region with the largest remainder.
    std::size_t pick = C;
    for (std::size_t c = 0; c < C; ++c) {
      if (plan.quotas[c] >= static_cast<std::int64_t>(region_sizes[c])) continue;
      if (pick == C || remainder[c] > remainder[pick]) pick = c;
    }
    if (pick == C) throw ValidationError("allocate_quotas: no capacity left to place budget");
    ++plan.quotas[pick];
    remainder[pick] -= 1.0;
    ++total;
  }
  while (total > B) {
    // Take one unit back from the smallest-remainder region above its floor.
    std::size_t pick = C;
    for (std::size_t c = C; c-- > 0;) {
      if (plan.quotas[c] <= floor_c[c]) continue;
      if (pick == C || remainder[c] < remainder[pick]) pick = c;
    }
    if (pick == C) throw ValidationError("allocate_quotas: cannot repair quotas to budget");
    --plan.quotas[pick];
    remainder[pick] += 1.0;
    --total;
  }
  return plan;
}

// Full coverage-guided selection over the pool: normalize difficulty, seed
// per-region diversity, blend scores, allocate quotas, take the per-region
// top-q_c (ties by pool position), and attach a coverage certificate.
inline SelectionResult select_budget(const EmbeddingSet& X,
                                     const std::vector<std::size_t>& pool_rows,
                                     const std::vector<double>& raw_difficulty,
                                     const RegionAssignment& assignment,
                                     const SelectionConfig& config) {
  if (pool_rows.empty()) throw ValidationError("select_budget: empty pool");
  if (raw_difficulty.size() != pool_rows.size() ||
      assignment.region_of.size() != pool_rows.size())
    throw ValidationError("select_budget: inputs not aligned with pool");
  if (config.budget < 1 || config.budget > static_cast<std::int64_t>(pool_rows.size()))
    throw ValidationError("select_budget: budget must lie in [1, |pool|]");
  if (config.alpha < 0.0 || config.alpha > 1.0)
    throw ValidationError("select_budget: alpha must lie in [0,1]");

  const std::size_t C = assignment.region_sizes.size();
  SelectionResult result;
  result.config = config;
  result.scores.region = assignment.region_of;
  result.scores.difficulty_norm = normalize_difficulty(raw_difficulty, config.eps);

  std::vector<std::vector<std::size_t>> region_rows(C);       // absolute rows
  std::vector<std::vector<std::size_t>> region_positions(C);  // pool positions
  for (std::size_t i = 0; i < pool_rows.size(); ++i) {
    const auto c = static_cast<std::size_t>(assignment.region_of[i]);
    region_rows[c].push_back(pool_rows[i]);
    region_positions[c].push_back(i);
  }

  std::vector<std::size_t> seed_union;
  for (std::size_t c = 0; c < C; ++c) {
    if (region_rows[c].empty()) continue;
    const auto seeds = fps_seeds(X, region_rows[c], config.m0);
    seed_union.insert(seed_union.end(), seeds.begin(), seeds.end());
  }
  result.scores.diversity_norm = diversity_scores(X, pool_rows, seed_union, config.eps);

  result.scores.combined.resize(pool_rows.size());
  for (std::size_t i = 0; i < pool_rows.size(); ++i)
    result.scores.combined[i] = config.alpha * result.scores.difficulty_norm[i] +
                                (1.0 - config.alpha) * result.scores.diversity_norm[i];

  result.quota_plan =
      allocate_quotas(assignment.weights, config.budget, C, assignment.region_sizes);

  for (std::size_t c = 0; c < C; ++c) {
    auto order = region_positions[c];
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return result.scores.combined[a] > result.scores.combined[b];
    });
    const auto take = static_cast<std::size_t>(result.quota_plan.quotas[c]);
    for (std::size_t i = 0; i < take && i < order.size(); ++i) {
      result.selected_rows.push_back(pool_rows[order[i]]);
      result.selected_ids.push_back(X.ids[pool_rows[order[i]]]);
    }
  }

  result.certificate =
      hybrid_certificate(X, region_rows, result.quota_plan.quotas, config.alpha);
  return result;
}

}  // namespace corebudget
