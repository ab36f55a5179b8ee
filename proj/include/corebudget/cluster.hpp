#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include <json.hpp>

#include "corebudget/dataset.hpp"
#include "corebudget/errors.hpp"
#include "corebudget/metric.hpp"
#include "corebudget/parallel.hpp"

namespace corebudget {

inline constexpr double kVarFloor = 1e-6;

struct GmmModel {
  std::size_t components = 0;
  std::size_t dim = 0;
  std::vector<double> means;      // C x d row-major
  std::vector<double> variances;  // C x d, diagonal covariance, >= kVarFloor
  std::vector<double> weights;    // simplex
  double final_log_likelihood = 0.0;
  std::size_t iterations_run = 0;
  std::vector<double> loglik_trace;  // per EM iteration of the winning restart
  bool degenerate = false;           // all points identical

  std::span<const double> mean(std::size_t c) const { return {means.data() + c * dim, dim}; }
  std::span<const double> variance(std::size_t c) const {
    return {variances.data() + c * dim, dim};
  }
};

struct RegionAssignment {
  std::vector<int> region_of;            // aligned with the fitted row list
  std::vector<std::size_t> region_sizes;
  std::vector<double> weights;           // w_c = |R_c| / n
};

struct GmmOptions {
  std::size_t restarts = 3;
  std::size_t max_iter = 1000;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::size_t count_distinct_rows(const EmbeddingSet& X,
                                       const std::vector<std::size_t>& rows) {
  std::set<std::vector<double>> distinct;
  for (std::size_t r : rows) {
    auto row = X.row(r);
    distinct.emplace(row.begin(), row.end());
  }
  return distinct.size();
}

// log N(x | mu, diag var)
inline double diag_gaussian_logpdf(std::span<const double> x, std::span<const double> mu,
                                   std::span<const double> var) {
  constexpr double kLog2Pi = 1.8378770664093453;
  double acc = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double diff = x[j] - mu[j];
    acc += kLog2Pi + std::log(var[j]) + diff * diff / var[j];
  }
  return -0.5 * acc;
}

}  // namespace detail

// k-means++ (D^2) seeding over the given rows; deterministic per rng state.
inline std::vector<double> kmeanspp_init(const EmbeddingSet& X,
                                         const std::vector<std::size_t>& rows, std::size_t C,
                                         std::mt19937_64& rng) {
  if (C < 1) throw ValidationError("kmeanspp_init: C must be >= 1");
  if (C > detail::count_distinct_rows(X, rows))
    throw ValidationError("kmeanspp_init: C exceeds distinct-point count");

  const std::size_t d = X.dim;
  std::vector<double> centers;
  centers.reserve(C * d);

  std::uniform_int_distribution<std::size_t> first(0, rows.size() - 1);
  auto first_row = X.row(rows[first(rng)]);
  centers.insert(centers.end(), first_row.begin(), first_row.end());

  std::vector<double> min_sq(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    min_sq[i] = squared_distance(X.row(rows[i]), {centers.data(), d});

  while (centers.size() < C * d) {
    const double total = std::accumulate(min_sq.begin(), min_sq.end(), 0.0);
    std::size_t pick = 0;
    if (total <= 0.0) {
      // All remaining mass at existing centers; cannot happen while C is
      // within the distinct-point count, but guard anyway.
      throw ValidationError("kmeanspp_init: no candidate with positive D^2 mass");
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double tgt = u(rng);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      tgt -= min_sq[i];
      if (tgt <= 0.0) {
        pick = i;
        break;
      }
      if (i + 1 == rows.size()) pick = i;
    }
    auto row = X.row(rows[pick]);
    const std::size_t base = centers.size();
    centers.insert(centers.end(), row.begin(), row.end());
    for (std::size_t i = 0; i < rows.size(); ++i)
      min_sq[i] = std::min(min_sq[i],
                           squared_distance(X.row(rows[i]), {centers.data() + base, d}));
  }
  return centers;
}

namespace detail {

struct EmRun {
  GmmModel model;
};

inline GmmModel run_em_once(const EmbeddingSet& X, const std::vector<std::size_t>& rows,
                            std::size_t C, const GmmOptions& opts, std::mt19937_64& rng) {
  const std::size_t n = rows.size();
  const std::size_t d = X.dim;

  GmmModel model;
  model.components = C;
  model.dim = d;
  model.means = kmeanspp_init(X, rows, C, rng);
  model.weights.assign(C, 1.0 / static_cast<double>(C));

  // Initial variances: global per-dimension sample variance, floored.
  std::vector<double> global_mean(d, 0.0), global_var(d, 0.0);
  for (std::size_t r : rows) {
    auto row = X.row(r);
    for (std::size_t j = 0; j < d; ++j) global_mean[j] += row[j];
  }
  for (double& v : global_mean) v /= static_cast<double>(n);
  for (std::size_t r : rows) {
    auto row = X.row(r);
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = row[j] - global_mean[j];
      global_var[j] += diff * diff;
    }
  }
  for (double& v : global_var) v = std::max(kVarFloor, v / static_cast<double>(n));
  model.variances.resize(C * d);
  for (std::size_t c = 0; c < C; ++c)
    std::copy(global_var.begin(), global_var.end(), model.variances.begin() + c * d);

  std::vector<double> resp(n * C);       // responsibilities
  std::vector<double> point_loglik(n);
  double prev_ll = -std::numeric_limits<double>::infinity();

  for (std::size_t iter = 0; iter < opts.max_iter; ++iter) {
    // E-step
    parallel_for(n, [&](std::size_t i) {
      auto x = X.row(rows[i]);
      double* ri = resp.data() + i * C;
      double max_log = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < C; ++c) {
        ri[c] = (model.weights[c] > 0.0 ? std::log(model.weights[c])
                                        : -std::numeric_limits<double>::infinity()) +
                diag_gaussian_logpdf(x, model.mean(c), model.variance(c));
        max_log = std::max(max_log, ri[c]);
      }
      double sum = 0.0;
      for (std::size_t c = 0; c < C; ++c) sum += std::exp(ri[c] - max_log);
      point_loglik[i] = max_log + std::log(sum);
      for (std::size_t c = 0; c < C; ++c) ri[c] = std::exp(ri[c] - point_loglik[i]);
    });
    double ll = std::accumulate(point_loglik.begin(), point_loglik.end(), 0.0);
    model.loglik_trace.push_back(ll);
    model.iterations_run = iter + 1;
    model.final_log_likelihood = ll;
    if (ll - prev_ll < opts.tol && iter > 0) break;
    prev_ll = ll;

    // M-step
    for (std::size_t c = 0; c < C; ++c) {
      double mass = 0.0;
      for (std::size_t i = 0; i < n; ++i) mass += resp[i * C + c];
      if (mass < 1e-10) {
        // Dead component: restart it at the point the mixture explains worst.
        std::size_t worst = 0;
        for (std::size_t i = 1; i < n; ++i)
          if (point_loglik[i] < point_loglik[worst]) worst = i;
        auto row = X.row(rows[worst]);
        std::copy(row.begin(), row.end(), model.means.begin() + c * d);
        std::copy(global_var.begin(), global_var.end(), model.variances.begin() + c * d);
        model.weights[c] = 1.0 / static_cast<double>(n);
        continue;
      }
      model.weights[c] = mass / static_cast<double>(n);
      for (std::size_t j = 0; j < d; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += resp[i * C + c] * X.row(rows[i])[j];
        model.means[c * d + j] = m / mass;
      }
      for (std::size_t j = 0; j < d; ++j) {
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double diff = X.row(rows[i])[j] - model.means[c * d + j];
          v += resp[i * C + c] * diff * diff;
        }
        model.variances[c * d + j] = std::max(kVarFloor, v / mass);
      }
    }
    const double wsum = std::accumulate(model.weights.begin(), model.weights.end(), 0.0);
    for (double& w : model.weights) w /= wsum;
  }
  return model;
}

}  // namespace detail

// Best-of-restarts diagonal-covariance EM. Restart r uses seed opts.seed + r,
// so runs are reproducible independent of restart count changes elsewhere.
inline GmmModel fit_gmm(const EmbeddingSet& X, const std::vector<std::size_t>& rows,
                        std::size_t C, const GmmOptions& opts = {}) {
  if (rows.size() < C) throw ValidationError("fit_gmm: fewer points than components");
  if (C < 1) throw ValidationError("fit_gmm: C must be >= 1");

  if (detail::count_distinct_rows(X, rows) == 1) {
    GmmModel model;
    model.components = C;
    model.dim = X.dim;
    model.degenerate = true;
    model.means.resize(C * X.dim);
    auto row = X.row(rows[0]);
    for (std::size_t c = 0; c < C; ++c)
      std::copy(row.begin(), row.end(), model.means.begin() + c * X.dim);
    model.variances.assign(C * X.dim, kVarFloor);
    model.weights.assign(C, 0.0);
    model.weights[0] = 1.0;
    return model;
  }

  GmmModel best;
  bool have = false;
  for (std::size_t r = 0; r < opts.restarts; ++r) {
    std::mt19937_64 rng(opts.seed + r);
    GmmModel candidate = detail::run_em_once(X, rows, C, opts, rng);
    if (!have || candidate.final_log_likelihood > best.final_log_likelihood) {
      best = std::move(candidate);
      have = true;
    }
  }
  return best;
}

// Lloyd's k-means behind the same model contract: unit variances and
// count-based weights make argmax responsibility equal nearest-center.
inline GmmModel fit_kmeans(const EmbeddingSet& X, const std::vector<std::size_t>& rows,
                           std::size_t C, std::uint64_t seed, std::size_t max_iter = 1000) {
  if (rows.size() < C) throw ValidationError("fit_kmeans: fewer points than components");
  const std::size_t d = X.dim;
  std::mt19937_64 rng(seed);
  std::vector<double> centers = kmeanspp_init(X, rows, C, rng);
  std::vector<int> label(rows.size(), 0);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      int best = 0;
      double best_sq = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < C; ++c) {
        const double sq = squared_distance(X.row(rows[i]), {centers.data() + c * d, d});
        if (sq < best_sq) {
          best_sq = sq;
          best = static_cast<int>(c);
        }
      }
      if (best != label[i]) changed = true;
      label[i] = best;
    }
    std::vector<double> sums(C * d, 0.0);
    std::vector<std::size_t> counts(C, 0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto row = X.row(rows[i]);
      for (std::size_t j = 0; j < d; ++j) sums[label[i] * d + j] += row[j];
      ++counts[label[i]];
    }
    for (std::size_t c = 0; c < C; ++c)
      if (counts[c] > 0)
        for (std::size_t j = 0; j < d; ++j)
          centers[c * d + j] = sums[c * d + j] / static_cast<double>(counts[c]);
    if (!changed) break;
  }
  GmmModel model;
  model.components = C;
  model.dim = d;
  model.means = std::move(centers);
  model.variances.assign(C * d, 1.0);
  model.weights.assign(C, 0.0);
  for (int l : label) model.weights[static_cast<std::size_t>(l)] += 1.0 / rows.size();
  return model;
}

// Hard assignment by argmax responsibility; exact ties go to the lower index.
inline RegionAssignment assign_regions(const GmmModel& model, const EmbeddingSet& X,
                                       const std::vector<std::size_t>& rows) {
  if (model.dim != X.dim)
    throw ValidationError("assign_regions: dimension mismatch between model and data");
  RegionAssignment out;
  out.region_of.resize(rows.size());
  parallel_for(rows.size(), [&](std::size_t i) {
    auto x = X.row(rows[i]);
    int best = 0;
    double best_log = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < model.components; ++c) {
      const double lw = model.weights[c] > 0.0 ? std::log(model.weights[c])
                                               : -std::numeric_limits<double>::infinity();
      const double lp = lw + detail::diag_gaussian_logpdf(x, model.mean(c), model.variance(c));
      if (lp > best_log) {
        best_log = lp;
        best = static_cast<int>(c);
      }
    }
    out.region_of[i] = best;
  });
  out.region_sizes.assign(model.components, 0);
  for (int r : out.region_of) ++out.region_sizes[static_cast<std::size_t>(r)];
  out.weights.resize(model.components);
  for (std::size_t c = 0; c < model.components; ++c)
    out.weights[c] = static_cast<double>(out.region_sizes[c]) / static_cast<double>(rows.size());
  return out;
}

inline nlohmann::json gmm_to_json(const GmmModel& model) {
  return nlohmann::json{{"C", model.components},       {"d", model.dim},
                        {"means", model.means},        {"variances", model.variances},
                        {"weights", model.weights},    {"loglik", model.final_log_likelihood},
                        {"degenerate", model.degenerate}};
}

inline GmmModel gmm_from_json(const nlohmann::json& j) {
  GmmModel model;
  model.components = j.at("C").get<std::size_t>();
  model.dim = j.at("d").get<std::size_t>();
  model.means = j.at("means").get<std::vector<double>>();
  model.variances = j.at("variances").get<std::vector<double>>();
  model.weights = j.at("weights").get<std::vector<double>>();
  model.final_log_likelihood = j.at("loglik").get<double>();
  model.degenerate = j.value("degenerate", false);
  if (model.means.size() != model.components * model.dim ||
      model.variances.size() != model.means.size() ||
      model.weights.size() != model.components)
    throw ValidationError("gmm_from_json: inconsistent shapes");
  return model;
}

}  // namespace corebudget
