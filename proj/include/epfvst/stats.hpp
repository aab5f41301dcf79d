#pragma once

#include <span>

namespace epfvst::stats {

/// Median of a sample (mean of the two central order statistics for even n).
/// Throws std::invalid_argument on an empty sample.
double median(std::span<const double> x);

/// Median absolute deviation about `center` (unadjusted).
double mad(std::span<const double> x, double center);

double student_t_cdf(double x, double nu);
double student_t_quantile(double p, double nu);

double normal_cdf(double x);
double normal_quantile(double p);

/// Upper tail probability P(X > x) for a chi-squared variable.
double chi_squared_sf(double x, double dof);

}  // namespace epfvst::stats
