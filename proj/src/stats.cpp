#include "tmc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tmc/error.hpp"

namespace tmc {

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : values) s += std::exp(v - mx);
  return mx + std::log(s);
}

double log_mean_exp(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::insufficient_samples, "empty sample");
  return log_sum_exp(values) - std::log(static_cast<double>(values.size()));
}

std::vector<double> log_mean_exp_leave_one_out(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw Error(ErrorCode::insufficient_samples, "jackknife needs at least two samples");
  const double mx = *std::max_element(values.begin(), values.end());
  std::vector<double> e(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += (e[i] = std::exp(values[i] - mx));
  const double log_m = std::log(static_cast<double>(n - 1));
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double rest = total - e[i];
    if (rest >= 0.5 * total) {
      out[i] = mx + std::log(rest) - log_m;
      continue;
    }
    // e[i] dominates the sum; subtracting it would cancel, so rebuild the rest.
    std::vector<double> others;
    others.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) others.push_back(values[j]);
    out[i] = log_mean_exp(others);
  }
  return out;
}

MeanError mean_and_sem(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw Error(ErrorCode::insufficient_samples, "need at least two samples");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n))};
}

double jackknife_error(std::span<const double> leave_one_out) {
  const std::size_t n = leave_one_out.size();
  if (n < 2) throw Error(ErrorCode::insufficient_samples, "jackknife needs at least two samples");
  double mean = 0.0;
  for (double v : leave_one_out) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : leave_one_out) ss += (v - mean) * (v - mean);
  return std::sqrt(ss * static_cast<double>(n - 1) / static_cast<double>(n));
}

}  // namespace tmc
