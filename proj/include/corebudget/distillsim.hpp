#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "corebudget/dataset.hpp"
#include "corebudget/errors.hpp"
#include "corebudget/select.hpp"

namespace corebudget::sim {

// Synthetic rationale-mediated task: r*(x) = tanh(W x), y* = argmax(V r*(x)).
// The teacher returns r* plus small noise and flips the answer to a uniform
// label with probability teacher_flip.
struct SimTaskConfig {
  std::size_t n_total = 2000;
  std::size_t input_dim = 12;
  std::size_t rationale_dim = 4;
  int class_count = 4;
  double teacher_flip = 0.05;        // eps_T in [0, 0.5)
  double teacher_rationale_noise = 0.05;
  double heldout_fraction = 0.25;
  std::uint64_t seed = 0;
};

struct SimTask {
  SimTaskConfig config;
  Eigen::MatrixXd inputs;             // n_total x d
  Eigen::MatrixXd rationale_true;     // n_total x k
  Eigen::VectorXi answer_true;        // ground truth y*
  Eigen::MatrixXd rationale_teacher;  // r* + noise
  Eigen::VectorXi answer_teacher;     // y* flipped with prob eps_T
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> heldout_idx;
  Eigen::MatrixXd rationale_map;      // W, k x d
  Eigen::MatrixXd answer_map;         // V, K x k
};

// Capacity knob = random-feature count P; the feature map is fixed per class
// so every arm of a paired experiment shares initialization randomness.
struct SimModelClass {
  std::size_t features = 64;  // P
  double ridge_lambda = 1e-3;
  double beta = 0.5;
  std::uint64_t feature_seed = 1234;
};

struct FittedModel {
  SimModelClass cls;
  int class_count = 0;
  Eigen::MatrixXd omega;   // P x d
  Eigen::VectorXd phase;   // P
  Eigen::MatrixXd head_rationale;  // P x k (zero when untrained)
  Eigen::MatrixXd head_answer;     // (P + k) x K
  std::size_t rationale_dim = 0;

  Eigen::MatrixXd feature_map(const Eigen::MatrixXd& X) const {
    const double scale = std::sqrt(2.0 / static_cast<double>(cls.features));
    Eigen::MatrixXd Z = (X * omega.transpose()).rowwise() + phase.transpose();
    return scale * Z.array().cos().matrix();
  }
  Eigen::MatrixXd predict_rationale(const Eigen::MatrixXd& X) const {
    return feature_map(X) * head_rationale;
  }
  Eigen::MatrixXd answer_scores(const Eigen::MatrixXd& X) const {
    const Eigen::MatrixXd Z = feature_map(X);
    Eigen::MatrixXd A(Z.rows(), Z.cols() + rationale_dim);
    A.leftCols(Z.cols()) = Z;
    if (rationale_dim > 0) A.rightCols(rationale_dim) = Z * head_rationale;
    return A * head_answer;
  }
  // Argmax with ties to the lower class index.
  Eigen::VectorXi predict(const Eigen::MatrixXd& X) const {
    const Eigen::MatrixXd scores = answer_scores(X);
    Eigen::VectorXi out(scores.rows());
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
      int best = 0;
      for (int c = 1; c < scores.cols(); ++c)
        if (scores(i, c) > scores(i, best)) best = c;
      out(i) = best;
    }
    return out;
  }
};

struct SimRunResult {
  double assistant_accuracy = std::numeric_limits<double>::quiet_NaN();
  double assistant_risk = std::numeric_limits<double>::quiet_NaN();
  double student_accuracy = 0.0;
  double student_risk = 0.0;  // 0-1 loss on held-out, bounded by M = 1
  double teacher_heldout_accuracy = 0.0;
  double delta_A_proxy = std::numeric_limits<double>::quiet_NaN();  // vs teacher
  double student_assistant_disagreement = std::numeric_limits<double>::quiet_NaN();
  std::size_t annotation_count = 0;  // assistant queries in Phase 2; must equal n
  std::int64_t B = 0;
  std::int64_t n = 0;
  std::string selection;
  double beta = 0.0;
  std::uint64_t seed = 0;
};

inline SimTask gen_task(const SimTaskConfig& config) {
  if (config.input_dim == 0 || config.rationale_dim == 0 || config.class_count < 2 ||
      config.n_total < 4)
    throw ValidationError("gen_task: invalid dimensions");
  if (!(config.teacher_flip >= 0.0 && config.teacher_flip < 0.5))
    throw ValidationError("gen_task: teacher_flip must lie in [0, 0.5)");

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SimTask task;
  task.config = config;
  const auto n = static_cast<Eigen::Index>(config.n_total);
  const auto d = static_cast<Eigen::Index>(config.input_dim);
  const auto k = static_cast<Eigen::Index>(config.rationale_dim);
  const auto K = static_cast<Eigen::Index>(config.class_count);

  task.rationale_map.resize(k, d);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < d; ++j) task.rationale_map(i, j) = gauss(rng);
  task.answer_map.resize(K, k);
  for (Eigen::Index i = 0; i < K; ++i)
    for (Eigen::Index j = 0; j < k; ++j) task.answer_map(i, j) = gauss(rng);

  task.inputs.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) task.inputs(i, j) = gauss(rng);

  task.rationale_true = (task.inputs * task.rationale_map.transpose()).array().tanh();
  task.answer_true.resize(n);
  const Eigen::MatrixXd class_scores = task.rationale_true * task.answer_map.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    for (Eigen::Index c = 1; c < K; ++c)
      if (class_scores(i, c) > class_scores(i, best)) best = static_cast<int>(c);
    task.answer_true(i) = best;
  }

  task.rationale_teacher = task.rationale_true;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> any_class(0, config.class_count - 1);
  task.answer_teacher = task.answer_true;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j)
      task.rationale_teacher(i, j) += config.teacher_rationale_noise * gauss(rng);
    if (config.teacher_flip > 0.0 && unit(rng) < config.teacher_flip)
      task.answer_teacher(i) = any_class(rng);
  }

  std::vector<std::size_t> order(config.n_total);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_held =
      static_cast<std::size_t>(std::llround(config.heldout_fraction * config.n_total));
  task.heldout_idx.assign(order.begin(), order.begin() + n_held);
  task.train_idx.assign(order.begin() + n_held, order.end());
  return task;
}

namespace detail {

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

inline Eigen::VectorXi take(const Eigen::VectorXi& v, const std::vector<std::size_t>& rows) {
  Eigen::VectorXi out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(rows[i]));
  return out;
}

inline double accuracy(const Eigen::VectorXi& pred, const Eigen::VectorXi& truth) {
  double hits = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i)
    if (pred(i) == truth(i)) hits += 1.0;
  return pred.size() > 0 ? hits / static_cast<double>(pred.size()) : 0.0;
}

}  // namespace detail

// Ridge-regularized two-head fit on fixed random cosine features, solved in
// closed form with mean-normalized Gram matrices (duplicating every example
// leaves the fit unchanged). The answer head conditions on the predicted
// rationale: scores = [z(x), z(x) H_r] H_a, mirroring rationale-then-answer
// generation. With beta = 1 (or no rationale targets) H_r is zero and the
// answer head reduces to the answer-only fit.
inline FittedModel train_model(const SimModelClass& cls, const Eigen::MatrixXd& X,
                               const std::optional<Eigen::MatrixXd>& rationale_targets,
                               const Eigen::VectorXi& answer_targets, int class_count,
                               double beta) {
  if (X.rows() < 1) throw ValidationError("train_model: need at least one example");
  if (!(beta > 0.0 && beta <= 1.0))
    throw ValidationError("train_model: beta must lie in (0,1]");
  if (cls.ridge_lambda <= 0.0) throw ValidationError("train_model: lambda must be positive");

  FittedModel model;
  model.cls = cls;
  model.class_count = class_count;

  std::mt19937_64 rng(cls.feature_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto P = static_cast<Eigen::Index>(cls.features);
  model.omega.resize(P, X.cols());
  const double omega_scale = 1.0 / std::sqrt(static_cast<double>(X.cols()));
  for (Eigen::Index i = 0; i < P; ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) model.omega(i, j) = omega_scale * gauss(rng);
  model.phase.resize(P);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * M_PI);
  for (Eigen::Index i = 0; i < P; ++i) model.phase(i) = phase_dist(rng);

  const Eigen::MatrixXd Z = model.feature_map(X);
  const double n = static_cast<double>(X.rows());
  const Eigen::MatrixXd gram = Z.transpose() * Z / n;

  const bool train_rationale = rationale_targets.has_value() && beta < 1.0;
  model.rationale_dim =
      rationale_targets ? static_cast<std::size_t>(rationale_targets->cols()) : 0;
  model.head_rationale =
      Eigen::MatrixXd::Zero(P, static_cast<Eigen::Index>(model.rationale_dim));
  if (train_rationale) {
    const double w = 1.0 - beta;
    Eigen::MatrixXd lhs = w * gram;
    lhs.diagonal().array() += cls.ridge_lambda;
    model.head_rationale =
        lhs.ldlt().solve(w / n * Z.transpose() * *rationale_targets);
  }

  Eigen::MatrixXd targets =
      Eigen::MatrixXd::Zero(X.rows(), static_cast<Eigen::Index>(class_count));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const int y = answer_targets(i);
    if (y < 0 || y >= class_count) throw ValidationError("train_model: label out of range");
    targets(i, y) = 1.0;
  }

  Eigen::MatrixXd A(X.rows(), P + static_cast<Eigen::Index>(model.rationale_dim));
  A.leftCols(P) = Z;
  if (model.rationale_dim > 0)
    A.rightCols(static_cast<Eigen::Index>(model.rationale_dim)) = Z * model.head_rationale;
  Eigen::MatrixXd lhs = beta * (A.transpose() * A) / n;
  lhs.diagonal().array() += cls.ridge_lambda;
  model.head_answer = lhs.ldlt().solve(beta / n * A.transpose() * targets);
  return model;
}

// Empirical multi-task risk: (1-beta) * mean clipped squared rationale error
// + beta * mean 0-1 answer loss against the given pseudo-labels.
inline double multitask_risk(const FittedModel& model, const Eigen::MatrixXd& X,
                             const Eigen::MatrixXd& rationale_targets,
                             const Eigen::VectorXi& answer_targets, double beta,
                             double rationale_clip = 1.0) {
  const Eigen::MatrixXd r_hat = model.predict_rationale(X);
  double r_loss = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double err = (r_hat.row(i) - rationale_targets.row(i)).squaredNorm();
    r_loss += std::min(err, rationale_clip);
  }
  r_loss /= static_cast<double>(X.rows());
  const double a_loss = 1.0 - detail::accuracy(model.predict(X), answer_targets);
  return (1.0 - beta) * r_loss + beta * a_loss;
}

namespace detail {

struct Phase1Selection {
  std::vector<std::size_t> selected;  // indices into task.inputs
  std::vector<std::size_t> warmup;
  std::vector<std::size_t> pool;
};

// Warm-up split, warm answer-only fit for difficulty, then coverage-guided or
// uniform-random selection of B teacher queries from the pool.
inline Phase1Selection phase1_select(const SimTask& task, const std::vector<std::size_t>& universe,
                                     std::int64_t B, const SimModelClass& warm_cls,
                                     const std::string& selection, std::size_t clusters,
                                     double alpha, std::size_t m0, std::uint64_t seed) {
  Phase1Selection out;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order = universe;
  std::shuffle(order.begin(), order.end(), rng);
  auto n_warm = static_cast<std::size_t>(
      std::llround(0.1 * static_cast<double>(universe.size())));
  // The pool must retain at least B candidates; at n = B the warm-up is empty.
  if (B >= 0 && universe.size() - n_warm < static_cast<std::size_t>(B))
    n_warm = universe.size() - static_cast<std::size_t>(B);
  out.warmup.assign(order.begin(), order.begin() + n_warm);
  out.pool.assign(order.begin() + n_warm, order.end());
  std::sort(out.warmup.begin(), out.warmup.end());
  std::sort(out.pool.begin(), out.pool.end());
  if (B > static_cast<std::int64_t>(out.pool.size()))
    throw ValidationError("phase1_select: budget exceeds pool size");

  if (selection == "random") {
    std::vector<std::size_t> pick = out.pool;
    std::shuffle(pick.begin(), pick.end(), rng);
    out.selected.assign(pick.begin(), pick.begin() + B);
    return out;
  }
  if (selection != "coverage")
    throw ValidationError("phase1_select: unknown selection strategy " + selection);

  // Warm fit on ground-truth labels only (zero teacher cost). An empty
  // warm-up (the B = n boundary) degrades difficulty to all zeros.
  std::vector<double> difficulty(out.pool.size(), 0.0);
  if (!out.warmup.empty()) {
    const FittedModel warm =
        train_model(warm_cls, take_rows(task.inputs, out.warmup), std::nullopt,
                    take(task.answer_true, out.warmup), task.config.class_count, 1.0);

    // Loss-based difficulty from the warm model's softmax.
    const Eigen::MatrixXd scores = warm.answer_scores(take_rows(task.inputs, out.pool));
    for (std::size_t i = 0; i < out.pool.size(); ++i) {
      const auto row = scores.row(static_cast<Eigen::Index>(i));
      const double mx = row.maxCoeff();
      double denom = 0.0;
      for (Eigen::Index c = 0; c < row.size(); ++c) denom += std::exp(row(c) - mx);
      const double p = std::exp(scores(static_cast<Eigen::Index>(i),
                                       task.answer_true(static_cast<Eigen::Index>(out.pool[i]))) -
                                mx) /
                       denom;
      difficulty[i] = p < kDifficultyClampProb ? kDifficultyClampMax : -std::log(p);
    }
  }

  // Embeddings for clustering/selection are the raw inputs (phi = x).
  EmbeddingSet embeddings;
  embeddings.dim = task.config.input_dim;
  embeddings.ids.resize(out.pool.size());
  embeddings.vectors.resize(out.pool.size() * embeddings.dim);
  for (std::size_t i = 0; i < out.pool.size(); ++i) {
    embeddings.ids[i] = std::to_string(out.pool[i]);
    for (std::size_t j = 0; j < embeddings.dim; ++j)
      embeddings.vectors[i * embeddings.dim + j] =
          task.inputs(static_cast<Eigen::Index>(out.pool[i]), static_cast<Eigen::Index>(j));
  }
  std::vector<std::size_t> pool_rows(out.pool.size());
  std::iota(pool_rows.begin(), pool_rows.end(), 0);

  GmmOptions gmm_opts;
  gmm_opts.seed = seed + 101;
  const GmmModel gmm = fit_gmm(embeddings, pool_rows, clusters, gmm_opts);
  const RegionAssignment regions = assign_regions(gmm, embeddings, pool_rows);

  SelectionConfig cfg;
  cfg.budget = B;
  cfg.alpha = alpha;
  cfg.clusters = clusters;
  cfg.m0 = m0;
  cfg.seed = seed;
  const SelectionResult sel = select_budget(embeddings, pool_rows, difficulty, regions, cfg);
  for (std::size_t row : sel.selected_rows) out.selected.push_back(out.pool[row]);
  return out;
}

}  // namespace detail

struct PipelineConfig {
  std::int64_t B = 30;
  std::int64_t n = 600;  // Phase 2 supervision volume (bridge only)
  SimModelClass assistant;
  SimModelClass student;
  std::string selection = "coverage";  // or "random"
  double beta = 0.5;
  std::size_t clusters = 4;
  double alpha = 0.5;
  std::size_t m0 = 3;
  std::uint64_t seed = 0;
};

// Two-stage pipeline: assistant trained on B teacher-labeled examples, then
// the assistant annotates all n examples exactly once and the student is
// trained on the cached pseudo-labels.
inline SimRunResult run_bridge(const SimTask& task, const PipelineConfig& cfg) {
  if (cfg.B > cfg.n) throw ValidationError("run_bridge: B exceeds n");
  if (cfg.n > static_cast<std::int64_t>(task.train_idx.size()))
    throw ValidationError("run_bridge: n exceeds available training examples");

  std::vector<std::size_t> universe(task.train_idx.begin(),
                                    task.train_idx.begin() + cfg.n);
  const auto phase1 = detail::phase1_select(task, universe, cfg.B, cfg.assistant,
                                            cfg.selection, cfg.clusters, cfg.alpha, cfg.m0, cfg.seed);

  const FittedModel assistant = train_model(
      cfg.assistant, detail::take_rows(task.inputs, phase1.selected),
      detail::take_rows(task.rationale_teacher, phase1.selected),
      detail::take(task.answer_teacher, phase1.selected), task.config.class_count, cfg.beta);

  // Phase 2: one assistant annotation per example, cached for training.
  const Eigen::MatrixXd phase2_inputs = detail::take_rows(task.inputs, universe);
  const Eigen::MatrixXd cached_rationales = assistant.predict_rationale(phase2_inputs);
  const Eigen::VectorXi cached_answers = assistant.predict(phase2_inputs);

  const FittedModel student =
      train_model(cfg.student, phase2_inputs, cached_rationales, cached_answers,
                  task.config.class_count, cfg.beta);

  const Eigen::MatrixXd held_X = detail::take_rows(task.inputs, task.heldout_idx);
  const Eigen::VectorXi held_y = detail::take(task.answer_true, task.heldout_idx);
  const Eigen::VectorXi held_teacher = detail::take(task.answer_teacher, task.heldout_idx);
  const Eigen::VectorXi assistant_pred = assistant.predict(held_X);
  const Eigen::VectorXi student_pred = student.predict(held_X);

  SimRunResult result;
  result.assistant_accuracy = detail::accuracy(assistant_pred, held_y);
  result.assistant_risk = 1.0 - result.assistant_accuracy;
  result.student_accuracy = detail::accuracy(student_pred, held_y);
  result.student_risk = 1.0 - result.student_accuracy;
  result.teacher_heldout_accuracy = detail::accuracy(held_teacher, held_y);
  result.delta_A_proxy = 1.0 - detail::accuracy(assistant_pred, held_teacher);
  result.student_assistant_disagreement = 1.0 - detail::accuracy(student_pred, assistant_pred);
  result.annotation_count = static_cast<std::size_t>(phase2_inputs.rows());
  result.B = cfg.B;
  result.n = cfg.n;
  result.selection = cfg.selection;
  result.beta = cfg.beta;
  result.seed = cfg.seed;
  return result;
}

// Direct distillation: the student class is trained straight on the B
// teacher-labeled examples; there is no Phase 2.
inline SimRunResult run_direct(const SimTask& task, const PipelineConfig& cfg) {
  if (cfg.B > static_cast<std::int64_t>(task.train_idx.size()))
    throw ValidationError("run_direct: B exceeds available training examples");
  std::vector<std::size_t> universe(task.train_idx.begin(),
                                    task.train_idx.begin() + std::max(cfg.n, cfg.B));
  const auto phase1 = detail::phase1_select(task, universe, cfg.B, cfg.student,
                                            cfg.selection, cfg.clusters, cfg.alpha, cfg.m0, cfg.seed);

  const FittedModel student = train_model(
      cfg.student, detail::take_rows(task.inputs, phase1.selected),
      detail::take_rows(task.rationale_teacher, phase1.selected),
      detail::take(task.answer_teacher, phase1.selected), task.config.class_count, cfg.beta);

  const Eigen::MatrixXd held_X = detail::take_rows(task.inputs, task.heldout_idx);
  const Eigen::VectorXi held_y = detail::take(task.answer_true, task.heldout_idx);
  const Eigen::VectorXi held_teacher = detail::take(task.answer_teacher, task.heldout_idx);
  const Eigen::VectorXi student_pred = student.predict(held_X);

  SimRunResult result;
  result.student_accuracy = detail::accuracy(student_pred, held_y);
  result.student_risk = 1.0 - result.student_accuracy;
  result.teacher_heldout_accuracy =
      detail::accuracy(held_teacher, held_y);
  result.delta_A_proxy = 1.0 - detail::accuracy(student_pred, held_teacher);
  result.B = cfg.B;
  result.n = cfg.B;
  result.selection = cfg.selection;
  result.beta = cfg.beta;
  result.seed = cfg.seed;
  return result;
}

// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(xs), ry = ranks(ys);
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double num = 0, dx = 0, dy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  if (dx <= 0.0 || dy <= 0.0) return 0.0;
  return num / std::sqrt(dx * dy);
}

struct ExperimentRow {
  std::string experiment;
  std::string cell;
  std::int64_t seed = 0;  // -1 for aggregate rows
  std::string arm;
  double risk = std::numeric_limits<double>::quiet_NaN();
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  double delta_A_proxy = std::numeric_limits<double>::quiet_NaN();
  std::string extra;
};

struct ExperimentTable {
  std::vector<ExperimentRow> rows;

  std::string to_csv() const {
    std::ostringstream out;
    out << "experiment,cell,seed,arm,risk,accuracy,delta_A_proxy,extra\n";
    out.setf(std::ios::fmtflags(0), std::ios::floatfield);
    out.precision(10);
    for (const auto& r : rows) {
      out << r.experiment << ',' << r.cell << ',' << r.seed << ',' << r.arm << ',' << r.risk
          << ',' << r.accuracy << ',' << r.delta_A_proxy << ',' << r.extra << '\n';
    }
    return out.str();
  }
};

struct ExperimentGrid {
  SimTaskConfig task;
  PipelineConfig pipeline;
  std::vector<std::int64_t> n_list;          // data_scaling
  std::vector<std::size_t> assistant_P_list; // capacity_gap
};

inline ExperimentGrid grid_from_json(const nlohmann::json& j) {
  ExperimentGrid g;
  g.task.n_total = j.value("n_total", std::size_t{2000});
  g.task.input_dim = j.value("d", std::size_t{12});
  g.task.rationale_dim = j.value("k", std::size_t{4});
  g.task.class_count = j.value("K", 4);
  g.task.teacher_flip = j.value("eps_T", 0.05);
  g.pipeline.B = j.value("B", std::int64_t{30});
  g.pipeline.n = j.value("n", std::int64_t{600});
  g.pipeline.assistant.features = j.value("P_A", std::size_t{192});
  g.pipeline.assistant.feature_seed = 1234;
  g.pipeline.student.features = j.value("P_S", std::size_t{48});
  g.pipeline.student.feature_seed = 5678;
  g.pipeline.assistant.ridge_lambda = j.value("lambda", 1e-3);
  g.pipeline.student.ridge_lambda = j.value("lambda", 1e-3);
  g.pipeline.beta = j.value("beta", 0.5);
  g.pipeline.clusters = j.value("clusters", std::size_t{4});
  g.pipeline.alpha = j.value("alpha", 0.5);
  g.pipeline.m0 = j.value("m0", std::size_t{3});
  if (j.contains("n_list")) g.n_list = j.at("n_list").get<std::vector<std::int64_t>>();
  if (j.contains("P_A_list"))
    g.assistant_P_list = j.at("P_A_list").get<std::vector<std::size_t>>();
  return g;
}

// Sweeps one experimental axis with paired seeds across arms: each seed index
// maps to one task, shared by every arm of that seed.
inline ExperimentTable run_experiment(const std::string& name, const ExperimentGrid& grid,
                                      std::size_t n_seeds, std::uint64_t base_seed) {
  ExperimentTable table;
  auto task_for_seed = [&](std::size_t s) {
    SimTaskConfig tc = grid.task;
    tc.seed = base_seed + s;
    return gen_task(tc);
  };
  auto push = [&](const std::string& cell, std::int64_t seed, const std::string& arm,
                  const SimRunResult& r, const std::string& extra = "") {
    table.rows.push_back(
        {name, cell, seed, arm, r.student_risk, r.student_accuracy, r.delta_A_proxy, extra});
  };

  if (name == "data_scaling") {
    std::vector<std::int64_t> ns = grid.n_list;
    if (ns.empty())
      ns = {grid.pipeline.B, 2 * grid.pipeline.B, 5 * grid.pipeline.B, 10 * grid.pipeline.B,
            20 * grid.pipeline.B};
    std::vector<double> gap_ns, gaps;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      const SimTask task = task_for_seed(s);
      for (std::int64_t n : ns) {
        PipelineConfig cfg = grid.pipeline;
        cfg.n = n;
        cfg.seed = base_seed + s;
        const SimRunResult bridge = run_bridge(task, cfg);
        const SimRunResult direct = run_direct(task, cfg);
        const std::string cell = "n=" + std::to_string(n);
        push(cell, static_cast<std::int64_t>(s), "bridge", bridge);
        push(cell, static_cast<std::int64_t>(s), "direct", direct);
        gap_ns.push_back(static_cast<double>(n));
        gaps.push_back(bridge.student_accuracy - direct.student_accuracy);
      }
    }
    table.rows.push_back({name, "all", -1, "gap_spearman", std::numeric_limits<double>::quiet_NaN(),
                          std::numeric_limits<double>::quiet_NaN(),
                          std::numeric_limits<double>::quiet_NaN(),
                          std::to_string(spearman(gap_ns, gaps))});
    return table;
  }

  if (name == "capacity_gap") {
    std::vector<std::size_t> ps = grid.assistant_P_list;
    if (ps.empty()) ps = {32, 64, 128, 256};
    for (std::size_t P : ps) {
      const std::string cell = "P_A=" + std::to_string(P);
      // Assistant risk over a budget ladder gives a crude log-log rate fit.
      const std::vector<std::int64_t> ladder = {grid.pipeline.B, 2 * grid.pipeline.B,
                                                4 * grid.pipeline.B};
      std::vector<double> log_b, log_risk;
      for (std::size_t s = 0; s < n_seeds; ++s) {
        const SimTask task = task_for_seed(s);
        for (std::size_t bi = 0; bi < ladder.size(); ++bi) {
          PipelineConfig cfg = grid.pipeline;
          cfg.assistant.features = P;
          cfg.B = ladder[bi];
          cfg.n = std::max(cfg.n, cfg.B * 2);
          cfg.seed = base_seed + s;
          const SimRunResult bridge = run_bridge(task, cfg);
          if (bi == 0) {
            const SimRunResult direct = run_direct(task, cfg);
            push(cell, static_cast<std::int64_t>(s), "bridge", bridge);
            push(cell, static_cast<std::int64_t>(s), "direct", direct);
          }
          log_b.push_back(std::log(static_cast<double>(cfg.B)));
          log_risk.push_back(std::log(std::max(bridge.assistant_risk, 1e-6)));
        }
      }
      // Least-squares slope of log(assistant risk) vs log(B); report only.
      double mb = 0, mr = 0;
      for (std::size_t i = 0; i < log_b.size(); ++i) {
        mb += log_b[i];
        mr += log_risk[i];
      }
      mb /= static_cast<double>(log_b.size());
      mr /= static_cast<double>(log_b.size());
      double num = 0, den = 0;
      for (std::size_t i = 0; i < log_b.size(); ++i) {
        num += (log_b[i] - mb) * (log_risk[i] - mr);
        den += (log_b[i] - mb) * (log_b[i] - mb);
      }
      table.rows.push_back({name, cell, -1, "assistant_rate_loglog_slope",
                            std::numeric_limits<double>::quiet_NaN(),
                            std::numeric_limits<double>::quiet_NaN(),
                            std::numeric_limits<double>::quiet_NaN(),
                            std::to_string(den > 0 ? num / den : 0.0)});
    }
    return table;
  }

  if (name == "selection_quality") {
    for (std::size_t s = 0; s < n_seeds; ++s) {
      const SimTask task = task_for_seed(s);
      PipelineConfig cfg = grid.pipeline;
      cfg.B = std::max<std::int64_t>(1, static_cast<std::int64_t>(
                                            std::llround(0.05 * static_cast<double>(cfg.n))));
      cfg.seed = base_seed + s;
      cfg.selection = "coverage";
      push("B=0.05n", static_cast<std::int64_t>(s), "coverage", run_bridge(task, cfg));
      cfg.selection = "random";
      push("B=0.05n", static_cast<std::int64_t>(s), "random", run_bridge(task, cfg));
    }
    return table;
  }

  if (name == "rationale_supervision") {
    for (std::size_t s = 0; s < n_seeds; ++s) {
      const SimTask task = task_for_seed(s);
      PipelineConfig cfg = grid.pipeline;
      cfg.seed = base_seed + s;
      cfg.beta = 0.5;
      const SimRunResult multi = run_bridge(task, cfg);
      cfg.beta = 1.0;
      const SimRunResult answer_only = run_bridge(task, cfg);
      push("beta=0.5", static_cast<std::int64_t>(s), "multi_task", multi,
           std::to_string(multi.student_assistant_disagreement));
      push("beta=1.0", static_cast<std::int64_t>(s), "answer_only", answer_only,
           std::to_string(answer_only.student_assistant_disagreement));
    }
    return table;
  }

  throw ValidationError("unknown experiment name: " + name);
}

}  // namespace corebudget::sim
