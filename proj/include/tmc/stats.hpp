#pragma once

#include <span>
#include <vector>

namespace tmc {

double log_sum_exp(std::span<const double> values);

// log of the mean of exp(values)
double log_mean_exp(std::span<const double> values);

// Delete-one estimates of log_mean_exp, stable in O(n).
std::vector<double> log_mean_exp_leave_one_out(std::span<const double> values);

struct MeanError {
  double mean = 0.0;
  double error = 0.0;
};

MeanError mean_and_sem(std::span<const double> values);

// Jackknife standard error from delete-one estimates.
double jackknife_error(std::span<const double> leave_one_out);

}  // namespace tmc
