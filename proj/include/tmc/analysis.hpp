#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tmc/rng.hpp"

namespace tmc {

struct ScalingPoint {
  int L = 0;
  double T = 0.0;
  double value = 0.0;
  double error = 0.0;
};

struct ScalingSeries {
  std::string observable;
  std::vector<ScalingPoint> points;

  std::vector<int> sizes() const;  // sorted, distinct
  ScalingSeries of_size(int L) const;
};

// ---- crossings ------------------------------------------------------------

struct Crossing {
  int L_small = 0;
  int L_large = 0;
  double T = 0.0;
  double y = 0.0;  // rescaled value at the crossing
};

/**
 * Crossing of value * L^eta between the two sizes of each pair, located on
 * the shared temperature range with monotone cubic (Steffen) interpolation.
 * Throws no_crossing when the difference never changes sign or vanishes
 * identically.
 */
std::vector<Crossing> find_crossings(const ScalingSeries& series, double eta,
                                     const std::vector<std::pair<int, int>>& pairs);

// Doubling pairs (L, 2L) available in the series.
std::vector<std::pair<int, int>> doubling_pairs(const ScalingSeries& series);

// Least-squares slope of T* against 1/L_small; near zero when crossings have converged.
double crossing_drift_slope(const std::vector<Crossing>& crossings);

// ---- data collapse --------------------------------------------------------

struct ParameterSummary {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> samples;
};

struct CollapseFit {
  double Tc = 0.0;
  double nu = 0.0;
  double eta = 0.0;
  double chi2 = 1.0;
  int degree = 4;
  bool eta_fitted = false;
  bool Tc_fixed = false;
  // filled by the bootstrap
  ParameterSummary Tc_dist, nu_dist, eta_dist, chi2_dist;
  int n_repeats = 0;
  int n_failed = 0;
};

struct CollapseOptions {
  int degree = 4;
  int n_restarts = 8;
  // Search box; an empty Tc range means the temperature span of the data.
  std::pair<double, double> Tc_range{0.0, 0.0};
  std::pair<double, double> nu_range{0.3, 6.0};
  std::optional<double> fixed_Tc;
  bool fit_eta = false;
  bool scale_ordinate = true;  // multiply values by L^eta
  double tolerance = 1e-9;     // simplex size at convergence
  int max_iterations = 4000;
};

/**
 * chi^2 = S_res / S_tot of a joint degree-d polynomial fit of the rescaled
 * values y L^eta against mu = (T - Tc) L^(1/nu).
 */
double collapse_loss(const ScalingSeries& series, double Tc, double nu, double eta, int degree,
                     bool scale_ordinate = true);

CollapseFit collapse_fit(const ScalingSeries& series, double eta, RngStream& rng, const CollapseOptions& options = {});

struct BootstrapOptions {
  int n_repeats = 10000;
  double max_failure_fraction = 0.05;
  int restarts_per_repeat = 2;
  CollapseOptions collapse;
};

/**
 * Repeats collapse_fit with eta ~ U(eta_range) and every value perturbed by
 * a Gaussian of its error. Repeat k draws from its own stream, so the result
 * does not depend on evaluation order.
 */
CollapseFit bootstrap_collapse(const ScalingSeries& series, std::pair<double, double> eta_range, RngStream& rng,
                               const BootstrapOptions& options = {});

// Abscissa-only collapse gamma(T, L) = f((T - Tc) L^(1/nu)); Tc fixed when given.
CollapseFit tee_collapse(const ScalingSeries& series, std::pair<double, double> nu_range, RngStream& rng,
                         std::optional<double> Tc = std::nullopt, CollapseOptions options = {});

// ---- finite-size ansatz for the TEE ---------------------------------------

// ln2 * (1 - ln(1 + a exp(-b x^(1/nu))) / ln(1 + a)), x = L / xi
double tee_ansatz(double x, double nu, double a, double b);

struct AnsatzFit {
  double a = 0.0;
  double b = 0.0;
  double residual = 0.0;  // sum of squared residuals
  int iterations = 0;
};

AnsatzFit tee_ansatz_fit(const std::vector<double>& x, const std::vector<double>& gamma, double nu, double a0 = 1.0,
                         double b0 = 1.0);

// ---- reporting ------------------------------------------------------------

nlohmann::json to_json(const CollapseFit& fit);
nlohmann::json to_json(const std::vector<Crossing>& crossings);

// Rows (L, T, mu, y_rescaled, error_rescaled) for plotting a collapse.
std::vector<std::array<double, 5>> rescaled_points(const ScalingSeries& series, const CollapseFit& fit);

}  // namespace tmc
