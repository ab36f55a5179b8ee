#pragma once

#include <cmath>
#include <cstdint>
#include <optional>

#include <json.hpp>

#include "corebudget/errors.hpp"

namespace corebudget {

// Every symbol of the risk-decomposition calculus, treated strictly as input;
// none of these are estimated from data.
struct TheoryParams {
  double eps_approx_TS = 0.0;  // approximation error, teacher target / student class
  double eps_approx_TA = 0.0;  // teacher target / assistant class
  double eps_approx_AS = 0.0;  // assistant target / student class
  double C_ST = 1.0;           // sample-rate constants
  double C_AT = 1.0;
  double C_SA = 1.0;
  double exp_ST = 0.5;         // convergence exponents, in (0,1]
  double exp_AT = 0.5;
  double exp_SA = 0.5;
  double L = 1.0;              // input-Lipschitz constant
  double L_ell = 1.0;          // label-Lipschitz blend (1-beta)L_r + beta*L_a
  double Delta_T = 0.0;        // pseudo-label noise levels
  double Delta_A = 0.0;
  double M = 1.0;              // loss bound
  double d_VC = 1.0;
  double delta = 0.05;         // confidence
  double C_UC = 1.0;           // unnamed absolute constant, exposed as a knob
  double eps_opt = 0.0;
  double eps_T = 0.0;
  double beta = 0.5;
  double rho_B = 0.0;          // coverage radii entering Gamma_B / Gamma_n
  double rho_n = 0.0;
  double R_MT = 0.0;           // risk anchor for the teacher; only differences matter
};

struct AdvantageBreakdown {
  double delta_struct = 0.0;
  double delta_sample = 0.0;
  double delta_overhead = 0.0;
  double delta_adv = 0.0;  // struct + sample - overhead
  double bridge_bound_rhs = 0.0;
  double direct_bound_rhs = 0.0;
  double gamma_B = 0.0;
  double gamma_n = 0.0;
};

// Gamma_m = L*rho + C_UC * M * sqrt(d_VC * ln(2m/delta) / m), natural log.
inline double complexity_term(double rho, std::int64_t m, double L, double C_UC, double M,
                              double d_VC, double delta) {
  if (m < 1) throw ValidationError("complexity_term: m must be >= 1");
  if (!(delta > 0.0 && delta < 1.0))
    throw ValidationError("complexity_term: delta must lie in (0,1)");
  const double md = static_cast<double>(m);
  return L * rho + C_UC * M * std::sqrt(d_VC * std::log(2.0 * md / delta) / md);
}

// May be negative; the two-stage gap assumption is not enforced here.
inline double delta_struct(const TheoryParams& p) {
  return p.eps_approx_TS - p.eps_approx_TA - p.eps_approx_AS;
}

inline double delta_sample(const TheoryParams& p, std::int64_t B, std::int64_t n) {
  if (B < 1 || n < 1) throw ValidationError("delta_sample: B and n must be >= 1");
  return p.C_ST * std::pow(static_cast<double>(B), -p.exp_ST) -
         p.C_AT * std::pow(static_cast<double>(B), -p.exp_AT) -
         p.C_SA * std::pow(static_cast<double>(n), -p.exp_SA);
}

// Evaluates both bound right-hand sides (nine terms for the two-stage
// pipeline, five for direct distillation) and the advantage decomposition.
// direct_rhs - bridge_rhs == delta_adv holds by construction.
inline AdvantageBreakdown advantage(const TheoryParams& p, std::int64_t B, std::int64_t n) {
  AdvantageBreakdown out;
  out.gamma_B = complexity_term(p.rho_B, B, p.L, p.C_UC, p.M, p.d_VC, p.delta);
  out.gamma_n = complexity_term(p.rho_n, n, p.L, p.C_UC, p.M, p.d_VC, p.delta);
  out.delta_struct = delta_struct(p);
  out.delta_sample = delta_sample(p, B, n);
  out.delta_overhead = out.gamma_n + p.L_ell * p.Delta_A;
  out.delta_adv = out.delta_struct + out.delta_sample - out.delta_overhead;

  const double Bd = static_cast<double>(B);
  const double nd = static_cast<double>(n);
  out.bridge_bound_rhs = p.R_MT + p.eps_approx_TA + p.C_AT * std::pow(Bd, -p.exp_AT) +
                         out.gamma_B + p.L_ell * p.Delta_T + p.eps_approx_AS +
                         p.C_SA * std::pow(nd, -p.exp_SA) + out.gamma_n + p.L_ell * p.Delta_A;
  out.direct_bound_rhs = p.R_MT + p.eps_approx_TS + p.C_ST * std::pow(Bd, -p.exp_ST) +
                         out.gamma_B + p.L_ell * p.Delta_T;
  return out;
}

// Smallest n <= n_max with delta_adv(p, B, n) > 0, by doubling then bisection;
// valid because delta_adv is non-decreasing in n (only shrinking terms depend
// on n). Returns nullopt when no such n exists up to n_max.
inline std::optional<std::int64_t> crossover_n0(const TheoryParams& p, std::int64_t B,
                                                std::int64_t n_max) {
  if (n_max < 1) throw ValidationError("crossover_n0: n_max must be >= 1");
  auto adv = [&](std::int64_t n) { return advantage(p, B, n).delta_adv; };
  if (adv(1) > 0.0) return 1;
  if (adv(n_max) <= 0.0) return std::nullopt;
  std::int64_t lo = 1, hi = 2;  // adv(lo) <= 0 invariant
  while (hi < n_max && adv(hi) <= 0.0) {
    lo = hi;
    hi = hi > n_max / 2 ? n_max : hi * 2;
  }
  if (adv(hi) <= 0.0) return std::nullopt;
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (adv(mid) > 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

inline TheoryParams theory_params_from_json(const nlohmann::json& j) {
  TheoryParams p;
  auto get = [&](const char* key, double& field) {
    if (j.contains(key)) field = j.at(key).get<double>();
  };
  get("eps_approx_TS", p.eps_approx_TS);
  get("eps_approx_TA", p.eps_approx_TA);
  get("eps_approx_AS", p.eps_approx_AS);
  get("C_ST", p.C_ST);
  get("C_AT", p.C_AT);
  get("C_SA", p.C_SA);
  get("exp_ST", p.exp_ST);
  get("exp_AT", p.exp_AT);
  get("exp_SA", p.exp_SA);
  get("L", p.L);
  get("L_ell", p.L_ell);
  get("Delta_T", p.Delta_T);
  get("Delta_A", p.Delta_A);
  get("M", p.M);
  get("d_VC", p.d_VC);
  get("delta", p.delta);
  get("C_UC", p.C_UC);
  get("eps_opt", p.eps_opt);
  get("eps_T", p.eps_T);
  get("beta", p.beta);
  get("rho_B", p.rho_B);
  get("rho_n", p.rho_n);
  get("R_MT", p.R_MT);
  if (!(p.delta > 0.0 && p.delta < 1.0))
    throw ValidationError("theory params: delta must lie in (0,1)");
  if (!(p.beta > 0.0 && p.beta <= 1.0))
    throw ValidationError("theory params: beta must lie in (0,1]");
  for (double e : {p.exp_ST, p.exp_AT, p.exp_SA})
    if (!(e > 0.0 && e <= 1.0))
      throw ValidationError("theory params: exponents must lie in (0,1]");
  return p;
}

inline nlohmann::json advantage_to_json(const AdvantageBreakdown& b) {
  return nlohmann::json{{"delta_struct", b.delta_struct},
                        {"delta_sample", b.delta_sample},
                        {"delta_overhead", b.delta_overhead},
                        {"delta_adv", b.delta_adv},
                        {"bridge_bound_rhs", b.bridge_bound_rhs},
                        {"direct_bound_rhs", b.direct_bound_rhs},
                        {"gamma_B", b.gamma_B},
                        {"gamma_n", b.gamma_n}};
}

// The capacity-gap ordering exp_ST < exp_AT < exp_SA is an empirical tendency,
// reported as a warning rather than enforced.
inline bool exponent_ordering_expected(const TheoryParams& p) {
  return p.exp_ST < p.exp_AT && p.exp_AT < p.exp_SA;
}

}  // namespace corebudget
