#include <doctest.h>

#include <cmath>
#include <numbers>

#include "tmc/analysis.hpp"
#include "tmc/error.hpp"

using namespace tmc;

namespace {

constexpr double kTc = 0.951;
constexpr double kNu = 1.44;
constexpr double kEta = 0.16;

double scaling_fn(double mu) { return 0.45 + 0.35 * std::tanh(0.9 * mu); }

// y = L^-eta f((T - Tc) L^(1/nu)) on a uniform temperature grid
ScalingSeries synthetic(double noise, std::uint64_t seed, std::vector<int> sizes = {4, 8, 16}) {
  ScalingSeries s;
  s.observable = "T_l";
  RngStream rng(seed, 0);
  for (int L : sizes)
    for (int k = 0; k <= 20; ++k) {
      const double T = 0.85 + 0.01 * k;
      const double y = std::pow(L, -kEta) * scaling_fn((T - kTc) * std::pow(L, 1.0 / kNu));
      const double err = noise * y;
      s.points.push_back({L, T, y + err * rng.normal(), noise > 0.0 ? err : 0.0});
    }
  return s;
}

ScalingSeries synthetic_tee(double nu_tilde) {
  ScalingSeries s;
  s.observable = "gamma";
  for (int L : {5, 10, 20})
    for (int k = 0; k <= 20; ++k) {
      const double T = 0.25 + 0.05 * k;
      const double g = std::numbers::ln2 * 0.5 * (1.0 - std::tanh(1.5 * (T - kTc) * std::pow(L, 1.0 / nu_tilde)));
      s.points.push_back({L, T, g, 0.0});
    }
  return s;
}

}  // namespace

TEST_CASE("series helpers") {
  const ScalingSeries s = synthetic(0.0, 1);
  CHECK(s.sizes() == std::vector<int>{4, 8, 16});
  CHECK(s.of_size(8).points.size() == 21);
  const auto pairs = doubling_pairs(s);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0] == std::pair<int, int>{4, 8});
  CHECK(pairs[1] == std::pair<int, int>{8, 16});
}

TEST_CASE("crossings of synthetic curves sit at the critical temperature") {
  const ScalingSeries s = synthetic(0.0, 1);
  const auto crossings = find_crossings(s, kEta, doubling_pairs(s));
  REQUIRE(crossings.size() == 2);
  for (const Crossing& c : crossings) {
    CHECK(std::abs(c.T - kTc) <= 1e-3);
    CHECK(c.y == doctest::Approx(scaling_fn(0.0)).epsilon(1e-3));
  }
  CHECK(std::abs(crossing_drift_slope(crossings)) < 0.05);

  // pair order does not matter
  const auto swapped = find_crossings(s, kEta, {{8, 4}, {16, 8}});
  for (std::size_t i = 0; i < crossings.size(); ++i) {
    CHECK(swapped[i].T == crossings[i].T);
    CHECK(swapped[i].y == crossings[i].y);
    CHECK(swapped[i].L_small == crossings[i].L_small);
  }
}

TEST_CASE("crossings with a wrong eta drift") {
  const ScalingSeries s = synthetic(0.0, 1, {4, 8, 16, 32});
  const auto good = find_crossings(s, kEta, doubling_pairs(s));
  const auto bad = find_crossings(s, 0.22, doubling_pairs(s));
  CHECK(std::abs(crossing_drift_slope(bad)) > 5.0 * std::abs(crossing_drift_slope(good)));
}

TEST_CASE("identical or non-crossing curves are refused") {
  ScalingSeries s;
  for (int L : {4, 8})
    for (int k = 0; k < 5; ++k) s.points.push_back({L, 0.9 + 0.02 * k, 0.3 + 0.1 * k, 0.01});
  try {
    find_crossings(s, 0.0, {{4, 8}});
    FAIL("expected no_crossing");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::no_crossing);
  }
  ScalingSeries shifted = s;
  for (auto& p : shifted.points)
    if (p.L == 8) p.value += 0.05;
  CHECK_THROWS_AS(find_crossings(shifted, 0.0, {{4, 8}}), Error);
  CHECK_THROWS_AS(find_crossings(s, 0.0, {{4, 16}}), Error);
}

TEST_CASE("collapse loss is invariant under affine rescaling of the values") {
  const ScalingSeries s = synthetic(0.01, 2);
  const double base = collapse_loss(s, 0.94, 1.3, kEta, 4);
  for (auto [a, b] : {std::pair{3.0, 0.0}, std::pair{0.2, 0.0}, std::pair{-7.5, 0.0}}) {
    ScalingSeries t = s;
    for (auto& p : t.points) p.value = a * p.value + b;
    CHECK(collapse_loss(t, 0.94, 1.3, kEta, 4) == doctest::Approx(base).epsilon(1e-10));
  }
  // a common offset survives the L^eta prefactor only when eta = 0
  ScalingSeries t = s;
  for (auto& p : t.points) p.value = 2.0 * p.value + 5.0;
  CHECK(collapse_loss(t, 0.94, 1.3, 0.0, 4) == doctest::Approx(collapse_loss(s, 0.94, 1.3, 0.0, 4)).epsilon(1e-10));
}

TEST_CASE("exact polynomial data collapse with zero loss") {
  ScalingSeries s;
  for (int L : {4, 8, 16})
    for (int k = 0; k <= 10; ++k) {
      const double T = 0.9 + 0.01 * k;
      const double mu = (T - kTc) * std::pow(L, 1.0 / kNu);
      const double f = 0.2 + 0.5 * mu - 0.3 * mu * mu + 0.1 * mu * mu * mu;
      s.points.push_back({L, T, f * std::pow(L, -kEta), 0.0});
    }
  CHECK(collapse_loss(s, kTc, kNu, kEta, 3) <= 1e-10);
  CHECK(collapse_loss(s, kTc, kNu, kEta, 4) <= 1e-10);
  CHECK(collapse_loss(s, kTc + 0.02, kNu, kEta, 3) > 1e-6);
}

TEST_CASE("zero-noise collapse recovers the exponents") {
  const ScalingSeries s = synthetic(0.0, 3);
  RngStream rng(3, 0);
  const CollapseFit fit = collapse_fit(s, kEta, rng);
  INFO("Tc " << fit.Tc << " nu " << fit.nu << " chi2 " << fit.chi2);
  CHECK(std::abs(fit.Tc - kTc) <= 0.02 * kTc);
  CHECK(std::abs(fit.nu - kNu) <= 0.02 * kNu);
  CHECK(fit.chi2 < 1e-4);
  CHECK(fit.chi2 >= 0.0);
  CHECK(fit.degree == 4);
}

TEST_CASE("collapse preconditions") {
  RngStream rng(4, 0);
  ScalingSeries one = synthetic(0.0, 3, {8});
  try {
    collapse_fit(one, kEta, rng);
    FAIL("expected insufficient sizes");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::insufficient_sizes);
  }
  CHECK_THROWS_AS(collapse_fit(ScalingSeries{}, kEta, rng), Error);
  CollapseOptions o;
  o.degree = 0;
  CHECK_THROWS_AS(collapse_fit(synthetic(0.0, 3), kEta, rng, o), Error);
}

TEST_CASE("bootstrap with no noise and a point eta range collapses to a point") {
  const ScalingSeries s = synthetic(0.0, 5);
  RngStream rng(5, 0);
  BootstrapOptions o;
  o.n_repeats = 20;
  const CollapseFit fit = bootstrap_collapse(s, {kEta, kEta}, rng, o);
  CHECK(fit.n_repeats == 20);
  CHECK(fit.Tc_dist.samples.size() == 20);
  CHECK(fit.Tc_dist.std < 1e-6);
  CHECK(fit.nu_dist.std < 1e-5);
  CHECK(fit.eta_dist.std < 1e-15);
  CHECK(fit.eta == doctest::Approx(kEta).epsilon(1e-15));
}

TEST_CASE("noisy bootstrap brackets the truth") {
  const ScalingSeries s = synthetic(0.01, 6);
  RngStream rng(6, 0);
  BootstrapOptions o;
  o.n_repeats = 300;
  const CollapseFit fit = bootstrap_collapse(s, {kEta - 0.02, kEta + 0.02}, rng, o);
  INFO("Tc " << fit.Tc << " +- " << fit.Tc_dist.std << " nu " << fit.nu << " +- " << fit.nu_dist.std);
  CHECK(fit.Tc_dist.std > 0.0);
  CHECK(std::abs(fit.Tc - kTc) <= 2.0 * fit.Tc_dist.std);
  CHECK(std::abs(fit.nu - kNu) <= 2.0 * fit.nu_dist.std);
  CHECK(fit.eta_dist.mean == doctest::Approx(kEta).epsilon(0.05));
  CHECK(fit.n_failed <= 15);

  // same seed, same distribution
  RngStream again(6, 0);
  const CollapseFit repeat = bootstrap_collapse(s, {kEta - 0.02, kEta + 0.02}, again, o);
  CHECK(repeat.Tc_dist.samples == fit.Tc_dist.samples);

  BootstrapOptions few;
  few.n_repeats = 1;
  CHECK_THROWS_AS(bootstrap_collapse(s, {0.1, 0.2}, rng, few), Error);
}

TEST_CASE("abscissa-only collapse of a TEE-like family") {
  const ScalingSeries s = synthetic_tee(3.2);
  RngStream rng(7, 0);
  const CollapseFit fixed = tee_collapse(s, {1.0, 8.0}, rng, kTc);
  CHECK(fixed.Tc_fixed);
  CHECK(fixed.Tc == kTc);
  CHECK(std::abs(fixed.nu - 3.2) <= 0.05 * 3.2);
  CHECK(fixed.eta == 0.0);

  const CollapseFit free = tee_collapse(s, {1.0, 8.0}, rng);
  CHECK_FALSE(free.Tc_fixed);
  CHECK(std::abs(free.nu - 3.2) <= 0.05 * 3.2);
  CHECK(std::abs(free.Tc - kTc) <= 0.02);

  try {
    tee_collapse(ScalingSeries{}, {1.0, 8.0}, rng);
    FAIL("expected insufficient data");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::insufficient_data);
  }
}

TEST_CASE("TEE ansatz limits and recovery") {
  CHECK(tee_ansatz(0.0, 1.44, 1.0, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::abs(tee_ansatz(0.0, 1.44, 2.5, 0.7)) < 1e-15);
  CHECK(tee_ansatz(1e4, 1.44, 1.0, 1.0) == doctest::Approx(std::numbers::ln2).epsilon(1e-14));

  std::vector<double> x, g;
  for (int i = 0; i < 25; ++i) {
    x.push_back(0.1 + 0.25 * i);
    g.push_back(tee_ansatz(x.back(), 1.44, 1.0, 1.0));
  }
  const AnsatzFit fit = tee_ansatz_fit(x, g, 1.44, 3.0, 0.4);
  CHECK(std::abs(fit.a - 1.0) <= 1e-6);
  CHECK(std::abs(fit.b - 1.0) <= 1e-6);
  CHECK(fit.residual < 1e-20);

  CHECK_THROWS_AS(tee_ansatz_fit({1.0}, {0.5}, 1.44), Error);
  CHECK_THROWS_AS(tee_ansatz_fit({1.0, 2.0}, {0.5}, 1.44), Error);
}

TEST_CASE("report helpers") {
  const ScalingSeries s = synthetic(0.0, 8);
  RngStream rng(8, 0);
  const CollapseFit fit = collapse_fit(s, kEta, rng);
  const nlohmann::json j = to_json(fit);
  CHECK(j.at("Tc").get<double>() == fit.Tc);
  CHECK_FALSE(j.contains("bootstrap"));
  const auto rows = rescaled_points(s, fit);
  CHECK(rows.size() == s.points.size());
  for (const auto& r : rows) CHECK(r[3] == doctest::Approx(scaling_fn(r[2])).epsilon(0.02));
}
