#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "corebudget/cluster.hpp"

namespace cb = corebudget;

namespace {

cb::EmbeddingSet make_set(const std::vector<std::vector<double>>& points) {
  cb::EmbeddingSet X;
  X.dim = points.empty() ? 1 : points[0].size();
  for (std::size_t i = 0; i < points.size(); ++i) {
    X.ids.push_back(std::to_string(i));
    for (double v : points[i]) X.vectors.push_back(v);
  }
  return X;
}

std::vector<std::size_t> all_rows(const cb::EmbeddingSet& X) {
  std::vector<std::size_t> rows(X.size());
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

// Three tight 2D blobs separated far beyond their spread.
cb::EmbeddingSet three_blobs(std::mt19937_64& rng, std::size_t per_blob = 10) {
  std::normal_distribution<double> jitter(0.0, 0.2);
  const std::vector<std::vector<double>> centers{{0, 0}, {50, 0}, {0, 50}};
  std::vector<std::vector<double>> pts;
  for (const auto& c : centers)
    for (std::size_t i = 0; i < per_blob; ++i)
      pts.push_back({c[0] + jitter(rng), c[1] + jitter(rng)});
  return make_set(pts);
}

int blob_of(std::span<const double> p) {
  if (p[0] > 25) return 1;
  if (p[1] > 25) return 2;
  return 0;
}

}  // namespace

TEST_CASE("kmeans++ picks both points of a two-point set") {
  const auto X = make_set({{0, 0}, {10, 10}});
  std::mt19937_64 rng(3);
  const auto centers = cb::kmeanspp_init(X, all_rows(X), 2, rng);
  REQUIRE(centers.size() == 4);
  std::set<std::vector<double>> got{{centers[0], centers[1]}, {centers[2], centers[3]}};
  const std::set<std::vector<double>> want{{0, 0}, {10, 10}};
  CHECK(got == want);
}

TEST_CASE("kmeans++ with C=1 returns one data point") {
  const auto X = make_set({{1, 2}, {3, 4}, {5, 6}});
  std::mt19937_64 rng(9);
  const auto centers = cb::kmeanspp_init(X, all_rows(X), 1, rng);
  REQUIRE(centers.size() == 2);
  bool is_data_point = false;
  for (std::size_t i = 0; i < X.size(); ++i)
    if (X.row(i)[0] == centers[0] && X.row(i)[1] == centers[1]) is_data_point = true;
  CHECK(is_data_point);
}

TEST_CASE("kmeans++ spreads centers across well-separated blobs") {
  std::mt19937_64 data_rng(42);
  const auto X = three_blobs(data_rng);
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const auto centers = cb::kmeanspp_init(X, all_rows(X), 3, rng);
    std::set<int> covered;
    for (std::size_t c = 0; c < 3; ++c)
      covered.insert(blob_of({centers.data() + c * 2, 2}));
    if (covered.size() == 3) ++hits;
  }
  // D^2 weighting makes one-center-per-blob overwhelmingly likely.
  CHECK(hits >= 90);
}

TEST_CASE("kmeans++ rejects more components than distinct rows") {
  const auto X = make_set({{1, 1}, {1, 1}, {2, 2}});
  std::mt19937_64 rng(0);
  CHECK_THROWS_AS(cb::kmeanspp_init(X, all_rows(X), 3, rng), cb::ValidationError);
}

TEST_CASE("GMM recovers the means of two separated clouds") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> jitter(0.0, 0.3);
  std::vector<std::vector<double>> pts;
  std::vector<double> mean_a{0, 0}, mean_b{0, 0};
  for (int i = 0; i < 40; ++i) {
    pts.push_back({jitter(rng), jitter(rng)});
    mean_a[0] += pts.back()[0] / 40;
    mean_a[1] += pts.back()[1] / 40;
  }
  for (int i = 0; i < 40; ++i) {
    pts.push_back({20 + jitter(rng), 20 + jitter(rng)});
    mean_b[0] += pts.back()[0] / 40;
    mean_b[1] += pts.back()[1] / 40;
  }
  const auto X = make_set(pts);
  cb::GmmOptions opts;
  opts.seed = 13;
  const auto model = cb::fit_gmm(X, all_rows(X), 2, opts);

  auto close = [](std::span<const double> m, const std::vector<double>& target) {
    return std::abs(m[0] - target[0]) < 0.1 && std::abs(m[1] - target[1]) < 0.1;
  };
  const bool matched = (close(model.mean(0), mean_a) && close(model.mean(1), mean_b)) ||
                       (close(model.mean(0), mean_b) && close(model.mean(1), mean_a));
  CHECK(matched);
}

TEST_CASE("GMM with C=1 matches the closed-form M-step fixed point") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> gauss(1.0, 2.0);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 50; ++i) pts.push_back({gauss(rng), gauss(rng), gauss(rng)});
  const auto X = make_set(pts);

  std::vector<double> mean(3, 0.0), var(3, 0.0);
  for (const auto& p : pts)
    for (int j = 0; j < 3; ++j) mean[j] += p[j] / 50;
  for (const auto& p : pts)
    for (int j = 0; j < 3; ++j) var[j] += (p[j] - mean[j]) * (p[j] - mean[j]) / 50;

  cb::GmmOptions opts;
  opts.seed = 1;
  const auto model = cb::fit_gmm(X, all_rows(X), 1, opts);
  for (int j = 0; j < 3; ++j) {
    CHECK_THAT(model.mean(0)[j], Catch::Matchers::WithinAbs(mean[j], 1e-9));
    CHECK_THAT(model.variance(0)[j],
               Catch::Matchers::WithinAbs(std::max(var[j], cb::kVarFloor), 1e-9));
  }
  CHECK_THAT(model.weights[0], Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("EM log-likelihood trace is non-decreasing on random instances") {
  std::mt19937_64 rng(2026);
  std::uniform_real_distribution<double> unit(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 20 + rng() % 30;
    std::vector<std::vector<double>> pts(n, std::vector<double>(2));
    for (auto& p : pts)
      for (double& v : p) v = unit(rng);
    const auto X = make_set(pts);
    cb::GmmOptions opts;
    opts.seed = rng();
    opts.max_iter = 60;
    const auto model = cb::fit_gmm(X, all_rows(X), 3, opts);
    for (std::size_t i = 1; i < model.loglik_trace.size(); ++i)
      REQUIRE(model.loglik_trace[i] >= model.loglik_trace[i - 1] - 1e-9);
    for (double v : model.variances) REQUIRE(v >= cb::kVarFloor);
    double wsum = 0.0;
    for (double w : model.weights) wsum += w;
    REQUIRE_THAT(wsum, Catch::Matchers::WithinAbs(1.0, 1e-9));
  }
}

TEST_CASE("all-identical points produce a flagged degenerate model") {
  const auto X = make_set({{2, 2}, {2, 2}, {2, 2}, {2, 2}});
  const auto model = cb::fit_gmm(X, all_rows(X), 3, {});
  CHECK(model.degenerate);
  CHECK(model.weights[0] == 1.0);
  const auto assignment = cb::assign_regions(model, X, all_rows(X));
  for (int r : assignment.region_of) CHECK(r == 0);
}

TEST_CASE("fit_gmm rejects n < C") {
  const auto X = make_set({{0, 0}, {1, 1}});
  CHECK_THROWS_AS(cb::fit_gmm(X, all_rows(X), 3, {}), cb::ValidationError);
}

TEST_CASE("assignment sends a dominant component mean to that component") {
  cb::GmmModel model;
  model.components = 2;
  model.dim = 1;
  model.means = {0.0, 10.0};
  model.variances = {1.0, 1.0};
  model.weights = {0.9, 0.1};
  const auto X = make_set({{0.0}, {10.0}});
  const auto assignment = cb::assign_regions(model, X, all_rows(X));
  CHECK(assignment.region_of[0] == 0);
  CHECK(assignment.region_of[1] == 1);
  CHECK(assignment.region_sizes == std::vector<std::size_t>{1, 1});
}

TEST_CASE("exact responsibility ties break to the lower region index") {
  cb::GmmModel model;
  model.components = 2;
  model.dim = 1;
  model.means = {-1.0, 1.0};
  model.variances = {1.0, 1.0};
  model.weights = {0.5, 0.5};
  const auto X = make_set({{0.0}});
  const auto assignment = cb::assign_regions(model, X, {0});
  CHECK(assignment.region_of[0] == 0);
}

TEST_CASE("assignment weights always sum to one") {
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> unit(-4.0, 4.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> pts(30, std::vector<double>(2));
    for (auto& p : pts)
      for (double& v : p) v = unit(rng);
    const auto X = make_set(pts);
    cb::GmmOptions opts;
    opts.seed = trial;
    const auto model = cb::fit_gmm(X, all_rows(X), 4, opts);
    const auto assignment = cb::assign_regions(model, X, all_rows(X));
    double wsum = 0.0;
    std::size_t count = 0;
    for (std::size_t c = 0; c < 4; ++c) {
      wsum += assignment.weights[c];
      count += assignment.region_sizes[c];
    }
    REQUIRE_THAT(wsum, Catch::Matchers::WithinAbs(1.0, 1e-9));
    REQUIRE(count == X.size());
  }
}

TEST_CASE("assign_regions rejects a dimension mismatch") {
  cb::GmmModel model;
  model.components = 1;
  model.dim = 3;
  model.means = {0, 0, 0};
  model.variances = {1, 1, 1};
  model.weights = {1.0};
  const auto X = make_set({{0.0, 0.0}});
  CHECK_THROWS_AS(cb::assign_regions(model, X, {0}), cb::ValidationError);
}

TEST_CASE("GMM JSON round trip preserves the model") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unit(-2.0, 2.0);
  std::vector<std::vector<double>> pts(25, std::vector<double>(2));
  for (auto& p : pts)
    for (double& v : p) v = unit(rng);
  const auto X = make_set(pts);
  cb::GmmOptions opts;
  opts.seed = 4;
  const auto model = cb::fit_gmm(X, all_rows(X), 3, opts);
  const auto restored = cb::gmm_from_json(cb::gmm_to_json(model));
  CHECK(restored.means == model.means);
  CHECK(restored.variances == model.variances);
  CHECK(restored.weights == model.weights);
}

TEST_CASE("kmeans backend honors the same assignment contract") {
  std::mt19937_64 rng(99);
  const auto X = three_blobs(rng);
  const auto model = cb::fit_kmeans(X, all_rows(X), 3, 17);
  const auto assignment = cb::assign_regions(model, X, all_rows(X));
  // Every blob maps to a single region under nearest-center assignment.
  std::set<int> blob_regions[3];
  for (std::size_t i = 0; i < X.size(); ++i)
    blob_regions[blob_of(X.row(i))].insert(assignment.region_of[i]);
  for (const auto& s : blob_regions) CHECK(s.size() == 1);
}

TEST_CASE("fixed seed gives identical GMM fits") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> unit(-3.0, 3.0);
  std::vector<std::vector<double>> pts(40, std::vector<double>(3));
  for (auto& p : pts)
    for (double& v : p) v = unit(rng);
  const auto X = make_set(pts);
  cb::GmmOptions opts;
  opts.seed = 31;
  const auto a = cb::fit_gmm(X, all_rows(X), 4, opts);
  const auto b = cb::fit_gmm(X, all_rows(X), 4, opts);
  CHECK(a.means == b.means);
  CHECK(a.variances == b.variances);
  CHECK(a.weights == b.weights);
  CHECK(a.final_log_likelihood == b.final_log_likelihood);
}
