#include "tmc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>

#include <Eigen/Dense>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_interp.h>
#include <gsl/gsl_multifit_nlinear.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_roots.h>

#include "tmc/error.hpp"

namespace tmc {

namespace {

void quiet_gsl() {
  static std::once_flag once;
  std::call_once(once, [] { gsl_set_error_handler_off(); });
}

// Monotone cubic interpolant of one curve; linear when only two points exist.
class Curve {
 public:
  Curve(std::vector<double> t, std::vector<double> y) : t_(std::move(t)), y_(std::move(y)) {
    const gsl_interp_type* type = t_.size() >= 3 ? gsl_interp_steffen : gsl_interp_linear;
    interp_ = gsl_interp_alloc(type, t_.size());
    gsl_interp_init(interp_, t_.data(), y_.data(), t_.size());
    accel_ = gsl_interp_accel_alloc();
  }
  Curve(const Curve&) = delete;
  Curve& operator=(const Curve&) = delete;
  ~Curve() {
    gsl_interp_accel_free(accel_);
    gsl_interp_free(interp_);
  }

  double lo() const { return t_.front(); }
  double hi() const { return t_.back(); }
  double operator()(double t) const {
    return gsl_interp_eval(interp_, t_.data(), y_.data(), std::clamp(t, lo(), hi()), accel_);
  }

 private:
  std::vector<double> t_, y_;
  gsl_interp* interp_ = nullptr;
  gsl_interp_accel* accel_ = nullptr;
};

std::unique_ptr<Curve> rescaled_curve(const ScalingSeries& series, int L, double eta) {
  std::vector<ScalingPoint> pts = series.of_size(L).points;
  if (pts.size() < 2)
    throw Error(ErrorCode::insufficient_data, "size " + std::to_string(L) + " needs at least two temperatures");
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.T < b.T; });
  std::vector<double> t, y;
  const double scale = std::pow(static_cast<double>(L), eta);
  for (const auto& p : pts) {
    if (!t.empty() && p.T == t.back())
      throw Error(ErrorCode::invalid_parameter, "duplicate temperature for size " + std::to_string(L));
    t.push_back(p.T);
    y.push_back(p.value * scale);
  }
  return std::make_unique<Curve>(std::move(t), std::move(y));
}

struct Difference {
  const Curve* a;
  const Curve* b;
  static double eval(double t, void* self) {
    auto* d = static_cast<Difference*>(self);
    return (*d->a)(t) - (*d->b)(t);
  }
};

double brent_root(Difference& diff, double lo, double hi) {
  gsl_function f{&Difference::eval, &diff};
  gsl_root_fsolver* s = gsl_root_fsolver_alloc(gsl_root_fsolver_brent);
  gsl_root_fsolver_set(s, &f, lo, hi);
  double root = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    gsl_root_fsolver_iterate(s);
    root = gsl_root_fsolver_root(s);
    if (gsl_root_test_interval(gsl_root_fsolver_x_lower(s), gsl_root_fsolver_x_upper(s), 1e-14, 0.0) == GSL_SUCCESS)
      break;
  }
  gsl_root_fsolver_free(s);
  return root;
}

void require_sizes(const ScalingSeries& series) {
  if (series.points.empty()) throw Error(ErrorCode::insufficient_data, "empty scaling series");
  if (series.sizes().size() < 2) throw Error(ErrorCode::insufficient_sizes, "collapse needs at least two sizes");
}

// Parameter vector layout for the simplex: [Tc]? [log nu] [eta]?
struct LossProblem {
  const ScalingSeries* series;
  CollapseOptions options;
  double eta;
  std::pair<double, double> Tc_box;

  int dims() const { return (options.fixed_Tc ? 0 : 1) + 1 + (options.fit_eta ? 1 : 0); }

  void unpack(const double* v, double& Tc, double& nu, double& eta_out) const {
    int i = 0;
    Tc = options.fixed_Tc ? *options.fixed_Tc : v[i++];
    nu = std::exp(v[i++]);
    eta_out = options.fit_eta ? v[i] : eta;
  }

  double loss(const double* v) const {
    double Tc, nu, e;
    unpack(v, Tc, nu, e);
    // soft walls keep the simplex inside the search box
    double penalty = 0.0;
    if (!options.fixed_Tc) penalty += std::max(0.0, Tc_box.first - Tc) + std::max(0.0, Tc - Tc_box.second);
    penalty += std::max(0.0, options.nu_range.first - nu) + std::max(0.0, nu - options.nu_range.second);
    if (penalty > 0.0) return 1.0 + penalty;
    const double l = collapse_loss(*series, Tc, nu, e, options.degree, options.scale_ordinate);
    return std::isfinite(l) ? l : 2.0;
  }

  static double gsl_loss(const gsl_vector* x, void* self) {
    return static_cast<LossProblem*>(self)->loss(x->data);
  }
};

struct SimplexResult {
  std::vector<double> x;
  double f = std::numeric_limits<double>::infinity();
  bool converged = false;
};

SimplexResult run_simplex(LossProblem& problem, const std::vector<double>& start, const std::vector<double>& step) {
  const int n = problem.dims();
  gsl_multimin_function fn{&LossProblem::gsl_loss, static_cast<std::size_t>(n), &problem};
  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* ss = gsl_vector_alloc(n);
  for (int i = 0; i < n; ++i) {
    gsl_vector_set(x, i, start[i]);
    gsl_vector_set(ss, i, step[i]);
  }
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_multimin_fminimizer_set(s, &fn, x, ss);
  SimplexResult r;
  for (int it = 0; it < problem.options.max_iterations; ++it) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), problem.options.tolerance) == GSL_SUCCESS) {
      r.converged = true;
      break;
    }
  }
  r.f = s->fval;
  r.x.assign(s->x->data, s->x->data + n);
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(ss);
  gsl_vector_free(x);
  return r;
}

std::pair<double, double> temperature_span(const ScalingSeries& series) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& p : series.points) {
    lo = std::min(lo, p.T);
    hi = std::max(hi, p.T);
  }
  return {lo, hi};
}

CollapseFit fit_from_starts(const ScalingSeries& series, double eta, RngStream& rng, const CollapseOptions& options,
                            const std::vector<std::vector<double>>& seeds) {
  require_sizes(series);
  if (options.degree < 1) throw Error(ErrorCode::invalid_parameter, "polynomial degree must be >= 1");
  if (!(options.nu_range.first > 0.0 && options.nu_range.second > options.nu_range.first))
    throw Error(ErrorCode::invalid_parameter, "nu range must be positive and increasing");
  quiet_gsl();

  LossProblem problem{&series, options, eta, options.Tc_range};
  if (!(problem.Tc_box.second > problem.Tc_box.first)) problem.Tc_box = temperature_span(series);
  const int n = problem.dims();

  const double log_nu_lo = std::log(options.nu_range.first);
  const double log_nu_hi = std::log(options.nu_range.second);
  std::vector<double> step;
  if (!options.fixed_Tc) step.push_back(0.1 * std::max(problem.Tc_box.second - problem.Tc_box.first, 1e-3));
  step.push_back(0.1 * (log_nu_hi - log_nu_lo));
  if (options.fit_eta) step.push_back(0.05);

  auto random_start = [&]() {
    std::vector<double> v;
    if (!options.fixed_Tc)
      v.push_back(problem.Tc_box.first + rng.uniform() * (problem.Tc_box.second - problem.Tc_box.first));
    v.push_back(log_nu_lo + rng.uniform() * (log_nu_hi - log_nu_lo));
    if (options.fit_eta) v.push_back(eta + 0.1 * (rng.uniform() - 0.5));
    return v;
  };

  std::vector<std::vector<double>> starts = seeds;
  {
    std::vector<double> centre;
    if (!options.fixed_Tc) centre.push_back(0.5 * (problem.Tc_box.first + problem.Tc_box.second));
    centre.push_back(0.5 * (log_nu_lo + log_nu_hi));
    if (options.fit_eta) centre.push_back(eta);
    if (starts.empty()) starts.push_back(centre);
  }
  while (static_cast<int>(starts.size()) < std::max(1, options.n_restarts)) starts.push_back(random_start());

  SimplexResult best;
  bool any = false;
  for (auto& s : starts) {
    if (static_cast<int>(s.size()) != n) continue;
    SimplexResult r = run_simplex(problem, s, step);
    // polish from the end point
    if (r.converged) {
      SimplexResult again = run_simplex(problem, r.x, step);
      if (again.f <= r.f) r = again;
    }
    if (r.converged && (!any || r.f < best.f)) {
      best = r;
      any = true;
    } else if (!any && r.f < best.f) {
      best = r;
    }
  }

  CollapseFit fit;
  fit.degree = options.degree;
  fit.eta_fitted = options.fit_eta;
  fit.Tc_fixed = options.fixed_Tc.has_value();
  problem.unpack(best.x.data(), fit.Tc, fit.nu, fit.eta);
  fit.chi2 = best.f;
  if (!any) {
    std::ostringstream msg;
    msg << "collapse did not converge after " << starts.size() << " starts; best so far Tc=" << fit.Tc
        << " nu=" << fit.nu << " eta=" << fit.eta << " chi2=" << fit.chi2;
    throw Error(ErrorCode::fit_failed, msg.str());
  }
  return fit;
}

ParameterSummary summarize(std::vector<double> v) {
  ParameterSummary s;
  if (!v.empty()) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    s.mean = m;
    s.std = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
  }
  s.samples = std::move(v);
  return s;
}

}  // namespace

std::vector<int> ScalingSeries::sizes() const {
  std::set<int> s;
  for (const auto& p : points) s.insert(p.L);
  return {s.begin(), s.end()};
}

ScalingSeries ScalingSeries::of_size(int L) const {
  ScalingSeries out;
  out.observable = observable;
  for (const auto& p : points)
    if (p.L == L) out.points.push_back(p);
  return out;
}

std::vector<Crossing> find_crossings(const ScalingSeries& series, double eta,
                                     const std::vector<std::pair<int, int>>& pairs) {
  quiet_gsl();
  std::vector<Crossing> out;
  for (auto [la, lb] : pairs) {
    const int small = std::min(la, lb);
    const int large = std::max(la, lb);
    if (small == large) throw Error(ErrorCode::invalid_parameter, "crossing pair needs two different sizes");
    const auto a = rescaled_curve(series, small, eta);
    const auto b = rescaled_curve(series, large, eta);
    const double lo = std::max(a->lo(), b->lo());
    const double hi = std::min(a->hi(), b->hi());
    const std::string tag = "(" + std::to_string(small) + ", " + std::to_string(large) + ")";
    if (!(hi > lo)) throw Error(ErrorCode::no_crossing, "no shared temperature range for " + tag);

    Difference diff{a.get(), b.get()};
    const int grid = 2000;
    std::vector<double> t(grid + 1), d(grid + 1);
    double scale = 0.0;
    for (int i = 0; i <= grid; ++i) {
      t[i] = lo + (hi - lo) * static_cast<double>(i) / grid;
      d[i] = Difference::eval(t[i], &diff);
      scale = std::max({scale, std::abs((*a)(t[i])), std::abs((*b)(t[i]))});
    }
    double max_diff = 0.0;
    for (double v : d) max_diff = std::max(max_diff, std::abs(v));
    if (max_diff <= 1e-13 * std::max(scale, 1e-300))
      throw Error(ErrorCode::no_crossing, "rescaled curves coincide for " + tag + " (degenerate)");

    // Among sign changes keep the steepest one; the choice is symmetric in the pair order.
    int best = -1;
    double best_jump = -1.0;
    for (int i = 0; i < grid; ++i) {
      const bool change = (d[i] < 0.0 && d[i + 1] > 0.0) || (d[i] > 0.0 && d[i + 1] < 0.0) ||
                          (d[i] == 0.0 && d[i + 1] != 0.0 && i > 0 && d[i - 1] * d[i + 1] < 0.0);
      if (!change) continue;
      const double jump = std::abs(d[i + 1] - d[i]);
      if (jump > best_jump) {
        best_jump = jump;
        best = i;
      }
    }
    if (best < 0) throw Error(ErrorCode::no_crossing, "curves do not cross for " + tag);

    const double root = d[best] == 0.0 ? t[best] : brent_root(diff, t[best], t[best + 1]);
    out.push_back(Crossing{small, large, root, 0.5 * ((*a)(root) + (*b)(root))});
  }
  return out;
}

std::vector<std::pair<int, int>> doubling_pairs(const ScalingSeries& series) {
  const std::vector<int> sizes = series.sizes();
  std::vector<std::pair<int, int>> out;
  for (int L : sizes)
    if (std::binary_search(sizes.begin(), sizes.end(), 2 * L)) out.emplace_back(L, 2 * L);
  return out;
}

double crossing_drift_slope(const std::vector<Crossing>& crossings) {
  if (crossings.size() < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(crossings.size());
  for (const auto& c : crossings) {
    const double x = 1.0 / c.L_small;
    sx += x;
    sy += c.T;
    sxx += x * x;
    sxy += x * c.T;
  }
  const double den = n * sxx - sx * sx;
  return den == 0.0 ? 0.0 : (n * sxy - sx * sy) / den;
}

double collapse_loss(const ScalingSeries& series, double Tc, double nu, double eta, int degree, bool scale_ordinate) {
  const int n = static_cast<int>(series.points.size());
  if (n < degree + 2)
    throw Error(ErrorCode::insufficient_data, "collapse needs more points than polynomial coefficients");
  Eigen::VectorXd mu(n), y(n);
  for (int i = 0; i < n; ++i) {
    const ScalingPoint& p = series.points[i];
    const double L = static_cast<double>(p.L);
    mu[i] = (p.T - Tc) * std::pow(L, 1.0 / nu);
    y[i] = scale_ordinate ? p.value * std::pow(L, eta) : p.value;
  }
  const double ybar = y.mean();
  const double s_tot = (y.array() - ybar).square().sum();
  if (s_tot == 0.0) return 0.0;

  // standardize the abscissa so the Vandermonde matrix stays well conditioned
  const double centre = mu.mean();
  const double spread = std::max((mu.array() - centre).abs().maxCoeff(), 1e-300);
  Eigen::MatrixXd V(n, degree + 1);
  for (int i = 0; i < n; ++i) {
    const double z = (mu[i] - centre) / spread;
    double pw = 1.0;
    for (int k = 0; k <= degree; ++k) {
      V(i, k) = pw;
      pw *= z;
    }
  }
  const Eigen::VectorXd coef = V.colPivHouseholderQr().solve(y);
  const double s_res = (V * coef - y).squaredNorm();
  return s_res / s_tot;
}

CollapseFit collapse_fit(const ScalingSeries& series, double eta, RngStream& rng, const CollapseOptions& options) {
  return fit_from_starts(series, eta, rng, options, {});
}

CollapseFit bootstrap_collapse(const ScalingSeries& series, std::pair<double, double> eta_range, RngStream& rng,
                               const BootstrapOptions& options) {
  if (options.n_repeats < 2) throw Error(ErrorCode::invalid_parameter, "bootstrap needs at least two repeats");
  if (eta_range.second < eta_range.first) throw Error(ErrorCode::invalid_parameter, "eta range is reversed");
  const double eta_mid = 0.5 * (eta_range.first + eta_range.second);
  const CollapseFit base = collapse_fit(series, eta_mid, rng, options.collapse);

  std::vector<double> start;
  if (!options.collapse.fixed_Tc) start.push_back(base.Tc);
  start.push_back(std::log(base.nu));
  if (options.collapse.fit_eta) start.push_back(base.eta);

  CollapseOptions per = options.collapse;
  per.n_restarts = std::max(1, options.restarts_per_repeat);

  std::vector<double> tc, nu, eta, chi2;
  int failed = 0;
  for (int k = 0; k < options.n_repeats; ++k) {
    RngStream r(rng.seed(), stream_id({rng.stream(), 0xb007u, static_cast<std::uint64_t>(k)}));
    const double e = eta_range.first + r.uniform() * (eta_range.second - eta_range.first);
    ScalingSeries perturbed = series;
    for (auto& p : perturbed.points) p.value += p.error * r.normal();
    std::vector<double> s = start;
    if (options.collapse.fit_eta) s.back() = e;
    try {
      const CollapseFit f = fit_from_starts(perturbed, e, r, per, {s});
      tc.push_back(f.Tc);
      nu.push_back(f.nu);
      eta.push_back(f.eta);
      chi2.push_back(f.chi2);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::fit_failed) throw;
      ++failed;
    }
  }
  if (failed > options.max_failure_fraction * options.n_repeats)
    throw Error(ErrorCode::fit_failed, std::to_string(failed) + " of " + std::to_string(options.n_repeats) +
                                           " bootstrap fits failed to converge");

  CollapseFit out = base;
  out.Tc_dist = summarize(std::move(tc));
  out.nu_dist = summarize(std::move(nu));
  out.eta_dist = summarize(std::move(eta));
  out.chi2_dist = summarize(std::move(chi2));
  out.Tc = out.Tc_dist.mean;
  out.nu = out.nu_dist.mean;
  out.eta = out.eta_dist.mean;
  out.n_repeats = options.n_repeats;
  out.n_failed = failed;
  return out;
}

CollapseFit tee_collapse(const ScalingSeries& series, std::pair<double, double> nu_range, RngStream& rng,
                         std::optional<double> Tc, CollapseOptions options) {
  if (series.points.empty()) throw Error(ErrorCode::insufficient_data, "empty TEE series");
  options.nu_range = nu_range;
  options.fixed_Tc = Tc;
  options.fit_eta = false;
  options.scale_ordinate = false;
  return collapse_fit(series, 0.0, rng, options);
}

double tee_ansatz(double x, double nu, double a, double b) {
  const double e = std::exp(-b * std::pow(x, 1.0 / nu));
  return std::numbers::ln2 * (1.0 - std::log1p(a * e) / std::log1p(a));
}

namespace {

struct AnsatzData {
  const std::vector<double>* x;
  const std::vector<double>* gamma;
  double nu;
};

int ansatz_residuals(const gsl_vector* p, void* data, gsl_vector* f) {
  const auto* d = static_cast<const AnsatzData*>(data);
  const double a = gsl_vector_get(p, 0);
  const double b = gsl_vector_get(p, 1);
  for (std::size_t i = 0; i < d->x->size(); ++i) {
    double r = tee_ansatz((*d->x)[i], d->nu, a, b) - (*d->gamma)[i];
    if (!std::isfinite(r) || a <= 0.0) r = 1e3;
    gsl_vector_set(f, i, r);
  }
  return GSL_SUCCESS;
}

}  // namespace

AnsatzFit tee_ansatz_fit(const std::vector<double>& x, const std::vector<double>& gamma, double nu, double a0,
                         double b0) {
  if (x.size() != gamma.size()) throw Error(ErrorCode::invalid_parameter, "x and gamma lengths differ");
  if (x.size() < 2) throw Error(ErrorCode::insufficient_data, "ansatz fit needs at least two points");
  if (!(nu > 0.0)) throw Error(ErrorCode::invalid_parameter, "nu must be positive");
  quiet_gsl();

  AnsatzData data{&x, &gamma, nu};
  gsl_multifit_nlinear_fdf fdf{};
  fdf.f = ansatz_residuals;
  fdf.df = nullptr;  // finite-difference Jacobian
  fdf.fvv = nullptr;
  fdf.n = x.size();
  fdf.p = 2;
  fdf.params = &data;

  gsl_multifit_nlinear_parameters params = gsl_multifit_nlinear_default_parameters();
  gsl_multifit_nlinear_workspace* w =
      gsl_multifit_nlinear_alloc(gsl_multifit_nlinear_trust, &params, x.size(), 2);
  gsl_vector* p0 = gsl_vector_alloc(2);
  gsl_vector_set(p0, 0, a0);
  gsl_vector_set(p0, 1, b0);
  gsl_multifit_nlinear_init(p0, &fdf, w);
  int info = 0;
  const int status = gsl_multifit_nlinear_driver(500, 1e-14, 1e-14, 1e-14, nullptr, nullptr, &info, w);

  AnsatzFit fit;
  fit.a = gsl_vector_get(w->x, 0);
  fit.b = gsl_vector_get(w->x, 1);
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) ss += gsl_vector_get(w->f, i) * gsl_vector_get(w->f, i);
  fit.residual = ss;
  fit.iterations = static_cast<int>(gsl_multifit_nlinear_niter(w));
  gsl_vector_free(p0);
  gsl_multifit_nlinear_free(w);

  if (status != GSL_SUCCESS && status != GSL_ENOPROG)
    throw Error(ErrorCode::fit_failed, std::string("ansatz fit did not converge: ") + gsl_strerror(status));
  if (!std::isfinite(fit.a) || !std::isfinite(fit.b) || fit.a <= 0.0)
    throw Error(ErrorCode::fit_failed, "ansatz fit left the admissible region (a > 0)");
  return fit;
}

nlohmann::json to_json(const CollapseFit& fit) {
  auto dist = [](const ParameterSummary& s) { return nlohmann::json{{"mean", s.mean}, {"std", s.std}}; };
  nlohmann::json j{{"Tc", fit.Tc},
                   {"nu", fit.nu},
                   {"eta", fit.eta},
                   {"chi2", fit.chi2},
                   {"degree", fit.degree},
                   {"eta_fitted", fit.eta_fitted},
                   {"Tc_fixed", fit.Tc_fixed}};
  if (fit.n_repeats > 0) {
    j["bootstrap"] = {{"n_repeats", fit.n_repeats},
                      {"n_failed", fit.n_failed},
                      {"Tc", dist(fit.Tc_dist)},
                      {"nu", dist(fit.nu_dist)},
                      {"eta", dist(fit.eta_dist)},
                      {"chi2", dist(fit.chi2_dist)}};
  }
  return j;
}

nlohmann::json to_json(const std::vector<Crossing>& crossings) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : crossings) j.push_back({{"L", c.L_small}, {"L2", c.L_large}, {"T", c.T}, {"y", c.y}});
  return j;
}

std::vector<std::array<double, 5>> rescaled_points(const ScalingSeries& series, const CollapseFit& fit) {
  std::vector<std::array<double, 5>> rows;
  for (const auto& p : series.points) {
    const double L = static_cast<double>(p.L);
    const double s = std::pow(L, fit.eta);
    rows.push_back({L, p.T, (p.T - fit.Tc) * std::pow(L, 1.0 / fit.nu), p.value * s, p.error * s});
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace tmc
