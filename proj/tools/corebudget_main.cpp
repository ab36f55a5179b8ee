// corebudget: budget-aware coverage-guided data selection toolkit.
// Subcommands: select, coverage, theory, simulate. Exit codes: 0 success,
// 1 internal error, 2 validation error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "corebudget/cluster.hpp"
#include "corebudget/coverage.hpp"
#include "corebudget/dataset.hpp"
#include "corebudget/distillsim.hpp"
#include "corebudget/manifest.hpp"
#include "corebudget/select.hpp"
#include "corebudget/theory.hpp"

namespace cb = corebudget;
using nlohmann::json;

namespace {

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw cb::ValidationError("cannot open file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw cb::ValidationError("malformed JSON in " + path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write output file: " + path);
  out << body;
}

json certificate_to_json(const cb::HybridCertificate& cert) {
  json j{{"region_coverage_terms", cert.region_coverage_terms},
         {"max_region_term", cert.max_region_term},
         {"delta_cluster", cert.delta_cluster},
         {"alpha", cert.alpha},
         {"bound_value", cert.bound_value},
         {"diff_term_unquantified", cert.diff_term_unquantified}};
  if (cert.delta_diff) j["delta_diff"] = *cert.delta_diff;
  return j;
}

struct SelectArgs {
  std::string embeddings, metadata, config_path, out;
  std::optional<std::int64_t> budget;
  std::optional<double> alpha;
  std::optional<std::int64_t> clusters;
  std::optional<std::int64_t> m0;
  std::optional<double> warmup_fraction;
  std::optional<std::uint64_t> seed;
};

int cmd_select(const SelectArgs& args) {
  cb::SelectionConfig cfg;
  json config_echo = json::object();
  if (!args.config_path.empty()) {
    config_echo = load_json_file(args.config_path);
    cfg.budget = config_echo.value("budget", cfg.budget);
    cfg.alpha = config_echo.value("alpha", cfg.alpha);
    cfg.clusters = config_echo.value("clusters", cfg.clusters);
    cfg.m0 = config_echo.value("m0", cfg.m0);
    cfg.eps = config_echo.value("eps", cfg.eps);
    cfg.seed = config_echo.value("seed", cfg.seed);
    cfg.warmup_fraction = config_echo.value("warmup_fraction", cfg.warmup_fraction);
    cfg.cluster_backend = config_echo.value("backend", cfg.cluster_backend);
  }
  if (args.budget) cfg.budget = *args.budget;
  if (args.alpha) cfg.alpha = *args.alpha;
  if (args.clusters) cfg.clusters = static_cast<std::size_t>(*args.clusters);
  if (args.m0) cfg.m0 = static_cast<std::size_t>(*args.m0);
  if (args.warmup_fraction) cfg.warmup_fraction = *args.warmup_fraction;
  if (args.seed) cfg.seed = *args.seed;

  if (cfg.alpha < 0.0 || cfg.alpha > 1.0)
    throw cb::ValidationError("alpha must lie in [0,1]");
  if (cfg.m0 < 1) throw cb::ValidationError("m0 must be >= 1");
  if (cfg.budget < 1) throw cb::ValidationError("budget must be >= 1");

  auto [embeddings, records] = cb::load_dataset(args.embeddings, args.metadata);
  const cb::PoolPartition partition =
      cb::split_warmup(embeddings.ids, cfg.warmup_fraction, cfg.seed);

  std::vector<std::size_t> pool_rows;
  std::vector<double> difficulty;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    if (!partition.pool_ids.count(embeddings.ids[i])) continue;
    pool_rows.push_back(i);
    if (records[i].raw_difficulty) {
      difficulty.push_back(*records[i].raw_difficulty);
    } else if (cfg.alpha > 0.0) {
      throw cb::ValidationError("missing difficulty for id " + records[i].id +
                                " (required when alpha > 0)");
    } else {
      difficulty.push_back(0.0);
    }
  }
  if (cfg.budget > static_cast<std::int64_t>(pool_rows.size()))
    throw cb::ValidationError("budget " + std::to_string(cfg.budget) + " exceeds pool size " +
                              std::to_string(pool_rows.size()));

  cb::GmmModel model;
  if (cfg.cluster_backend == "gmm") {
    cb::GmmOptions opts;
    opts.seed = cfg.seed;
    model = cb::fit_gmm(embeddings, pool_rows, cfg.clusters, opts);
  } else if (cfg.cluster_backend == "kmeans") {
    model = cb::fit_kmeans(embeddings, pool_rows, cfg.clusters, cfg.seed);
  } else {
    throw cb::ValidationError("unknown cluster backend: " + cfg.cluster_backend);
  }
  const cb::RegionAssignment assignment = cb::assign_regions(model, embeddings, pool_rows);
  const cb::SelectionResult result =
      cb::select_budget(embeddings, pool_rows, difficulty, assignment, cfg);

  cb::RunManifest manifest;
  manifest.subcommand = "select";
  manifest.seed = cfg.seed;
  manifest.timestamp = cb::RunManifest::now_iso8601();
  manifest.input_digests[args.embeddings] = cb::file_digest(args.embeddings);
  manifest.input_digests[args.metadata] = cb::file_digest(args.metadata);
  manifest.resolved_config = {{"budget", cfg.budget},
                              {"alpha", cfg.alpha},
                              {"clusters", cfg.clusters},
                              {"m0", cfg.m0},
                              {"eps", cfg.eps},
                              {"seed", cfg.seed},
                              {"warmup_fraction", cfg.warmup_fraction},
                              {"backend", cfg.cluster_backend}};

  json scores = json::object();
  for (std::size_t i = 0; i < pool_rows.size(); ++i) {
    scores[embeddings.ids[pool_rows[i]]] = {{"D_bar", result.scores.difficulty_norm[i]},
                                            {"n_bar", result.scores.diversity_norm[i]},
                                            {"s", result.scores.combined[i]},
                                            {"region", result.scores.region[i]}};
  }
  json report{{"manifest", manifest.to_json()},
              {"config", manifest.resolved_config},
              {"selected_ids", result.selected_ids},
              {"quota_plan",
               {{"quotas", result.quota_plan.quotas},
                {"q_min", result.quota_plan.q_min},
                {"feasible_floors", result.quota_plan.feasible_floors}}},
              {"scores", scores},
              {"coverage_certificate", certificate_to_json(result.certificate)},
              {"warmup_size", partition.warmup_ids.size()},
              {"pool_size", partition.pool_ids.size()}};
  write_text(args.out, report.dump(2) + "\n");
  return 0;
}

struct CoverageArgs {
  std::string embeddings, metadata, selection_path, out;
  std::optional<std::int64_t> k;
  std::string start_id;
  std::uint64_t seed = 0;
};

int cmd_coverage(const CoverageArgs& args) {
  auto [embeddings, records] = cb::load_dataset(args.embeddings, args.metadata);
  (void)records;
  std::vector<std::size_t> all_rows(embeddings.size());
  std::iota(all_rows.begin(), all_rows.end(), 0);

  std::vector<std::size_t> seeds;
  if (!args.selection_path.empty()) {
    json sel = load_json_file(args.selection_path);
    const auto& arr = sel.is_array() ? sel : sel.at("ids");
    for (const auto& id : arr) {
      const auto it =
          std::find(embeddings.ids.begin(), embeddings.ids.end(), id.get<std::string>());
      if (it == embeddings.ids.end())
        throw cb::ValidationError("selection id not in dataset: " + id.get<std::string>());
      seeds.push_back(static_cast<std::size_t>(it - embeddings.ids.begin()));
    }
  } else if (args.k) {
    std::size_t start = 0;
    if (!args.start_id.empty()) {
      const auto it = std::find(embeddings.ids.begin(), embeddings.ids.end(), args.start_id);
      if (it == embeddings.ids.end())
        throw cb::ValidationError("start id not in dataset: " + args.start_id);
      start = static_cast<std::size_t>(it - embeddings.ids.begin());
    }
    if (*args.k < 1 || *args.k > static_cast<std::int64_t>(embeddings.size()))
      throw cb::ValidationError("k must lie in [1, n]");
    seeds = cb::gonzalez(embeddings, all_rows, static_cast<std::size_t>(*args.k), start);
  } else {
    throw cb::ValidationError("coverage requires --selection or --k");
  }

  const cb::CoverageReport report = cb::coverage_radius(embeddings, all_rows, seeds);

  cb::RunManifest manifest;
  manifest.subcommand = "coverage";
  manifest.seed = args.seed;
  manifest.timestamp = cb::RunManifest::now_iso8601();
  manifest.input_digests[args.embeddings] = cb::file_digest(args.embeddings);
  manifest.input_digests[args.metadata] = cb::file_digest(args.metadata);
  if (!args.selection_path.empty())
    manifest.input_digests[args.selection_path] = cb::file_digest(args.selection_path);
  manifest.resolved_config = {{"k", args.k ? json(*args.k) : json(nullptr)},
                              {"start", args.start_id},
                              {"selection", args.selection_path}};

  std::vector<std::string> seed_ids;
  for (std::size_t s : seeds) seed_ids.push_back(embeddings.ids[s]);
  json out{{"manifest", manifest.to_json()},
           {"mean_radius", report.mean_radius},
           {"maxmin_radius", report.maxmin_radius},
           {"seed_count", report.seed_count},
           {"seed_ids", seed_ids}};
  write_text(args.out, out.dump(2) + "\n");
  return 0;
}

struct TheoryArgs {
  std::string params_path, out, sweep, format = "json";
};

int cmd_theory(const TheoryArgs& args) {
  const json params_json = load_json_file(args.params_path);
  const cb::TheoryParams params = cb::theory_params_from_json(params_json);
  const auto B = params_json.value("B", std::int64_t{100});
  const auto n = params_json.value("n", std::int64_t{10000});

  cb::RunManifest manifest;
  manifest.subcommand = "theory";
  manifest.seed = 0;
  manifest.timestamp = cb::RunManifest::now_iso8601();
  manifest.input_digests[args.params_path] = cb::file_digest(args.params_path);
  manifest.resolved_config = params_json;

  if (!args.sweep.empty()) {
    const auto colon = args.sweep.find(':');
    if (colon == std::string::npos)
      throw cb::ValidationError("--sweep-n expects LO:HI");
    const auto lo = static_cast<std::int64_t>(std::stod(args.sweep.substr(0, colon)));
    const auto hi = static_cast<std::int64_t>(std::stod(args.sweep.substr(colon + 1)));
    if (lo < 1 || hi < lo) throw cb::ValidationError("--sweep-n range invalid");
    const auto crossover = cb::crossover_n0(params, B, hi);
    std::vector<std::int64_t> ns;
    const int steps = 60;
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      const auto v = static_cast<std::int64_t>(
          std::llround(std::exp(std::log(static_cast<double>(lo)) * (1 - t) +
                                std::log(static_cast<double>(hi)) * t)));
      if (ns.empty() || v > ns.back()) ns.push_back(v);
    }
    std::ostringstream csv;
    csv << "# manifest: " << manifest.to_json().dump() << "\n";
    csv << "n,delta_adv,at_or_past_crossover\n";
    csv.precision(12);
    for (std::int64_t nv : ns) {
      const auto breakdown = cb::advantage(params, B, nv);
      csv << nv << ',' << breakdown.delta_adv << ','
          << ((crossover && nv >= *crossover) ? 1 : 0) << '\n';
    }
    write_text(args.out, csv.str());
    return 0;
  }

  const cb::AdvantageBreakdown breakdown = cb::advantage(params, B, n);
  json out{{"manifest", manifest.to_json()},
           {"B", B},
           {"n", n},
           {"breakdown", cb::advantage_to_json(breakdown)},
           {"exponent_ordering_expected", cb::exponent_ordering_expected(params)}};
  const auto crossover = cb::crossover_n0(params, B, std::int64_t{1000000000000ll});
  out["crossover_n0"] = crossover ? json(*crossover) : json(nullptr);
  write_text(args.out, out.dump(2) + "\n");
  return 0;
}

struct SimulateArgs {
  std::string experiment, grid, out;
  std::int64_t seeds = 10;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& args) {
  json grid_json = json::object();
  if (!args.grid.empty()) {
    if (!args.grid.empty() && args.grid.front() == '{') {
      try {
        grid_json = json::parse(args.grid);
      } catch (const json::exception& e) {
        throw cb::ValidationError(std::string("malformed --grid JSON: ") + e.what());
      }
    } else {
      grid_json = load_json_file(args.grid);
    }
  }
  if (args.seeds < 1) throw cb::ValidationError("--seeds must be >= 1");
  const cb::sim::ExperimentGrid grid = cb::sim::grid_from_json(grid_json);
  const cb::sim::ExperimentTable table = cb::sim::run_experiment(
      args.experiment, grid, static_cast<std::size_t>(args.seeds), args.seed);

  cb::RunManifest manifest;
  manifest.subcommand = "simulate";
  manifest.seed = args.seed;
  manifest.timestamp = cb::RunManifest::now_iso8601();
  manifest.resolved_config = {{"experiment", args.experiment},
                              {"grid", grid_json},
                              {"seeds", args.seeds}};
  std::ostringstream out;
  out << "# manifest: " << manifest.to_json().dump() << "\n" << table.to_csv();
  write_text(args.out, out.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"corebudget: budget-aware coverage-guided data selection toolkit"};
  app.require_subcommand(1);

  SelectArgs sel;
  auto* select = app.add_subcommand("select", "run the coverage-guided selection pipeline");
  select->add_option("--embeddings", sel.embeddings)->required();
  select->add_option("--metadata", sel.metadata)->required();
  select->add_option("--config", sel.config_path);
  select->add_option("--out", sel.out)->required();
  select->add_option("--budget", sel.budget);
  select->add_option("--alpha", sel.alpha);
  select->add_option("--clusters", sel.clusters);
  select->add_option("--m0", sel.m0);
  select->add_option("--warmup-fraction", sel.warmup_fraction);
  select->add_option("--seed", sel.seed);

  CoverageArgs cov;
  auto* coverage = app.add_subcommand("coverage", "coverage radius / farthest-first traversal");
  coverage->add_option("--embeddings", cov.embeddings)->required();
  coverage->add_option("--metadata", cov.metadata)->required();
  coverage->add_option("--selection", cov.selection_path);
  coverage->add_option("--k", cov.k);
  coverage->add_option("--start", cov.start_id);
  coverage->add_option("--seed", cov.seed);
  coverage->add_option("--out", cov.out)->required();

  TheoryArgs theo;
  auto* theory = app.add_subcommand("theory", "risk-decomposition bound calculator");
  theory->add_option("--params", theo.params_path)->required();
  theory->add_option("--out", theo.out)->required();
  theory->add_option("--sweep-n", theo.sweep);
  theory->add_option("--format", theo.format);

  SimulateArgs simu;
  auto* simulate = app.add_subcommand("simulate", "desk-scale distillation simulator");
  simulate->add_option("--experiment", simu.experiment)->required();
  simulate->add_option("--grid", simu.grid);
  simulate->add_option("--seeds", simu.seeds);
  simulate->add_option("--seed", simu.seed);
  simulate->add_option("--out", simu.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (select->parsed()) return cmd_select(sel);
    if (coverage->parsed()) return cmd_coverage(cov);
    if (theory->parsed()) return cmd_theory(theo);
    if (simulate->parsed()) return cmd_simulate(simu);
  } catch (const cb::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
