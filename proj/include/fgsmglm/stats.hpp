#pragma once

#include <vector>

namespace fgsmglm {

/// Two-sample Kolmogorov-Smirnov statistic sup_x |F1(x) - F2(x)|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

/// Linear-interpolated quantile of an unsorted sample, q in [0, 1].
double quantile(std::vector<double> values, double q);

double median(std::vector<double> values);

/// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Slope of log(y) against log(x); requires positive entries.
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace fgsmglm
