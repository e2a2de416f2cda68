#pragma once

#include <cmath>
#include <numbers>

namespace semimix::stats {

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Inverse standard normal CDF: rational approximation refined by two Halley
// steps on erfc, accurate to a few ulps over (1e-300, 1 - 1e-16).
double normal_quantile(double p);

// Density of Student's t with nu degrees of freedom.
double student_t_pdf(double t, double nu);
double student_t_log_pdf(double t, double nu);

// E[(Z - m)_+] and E[(m - Z)_+] for Z ~ N(0, 1).
inline double normal_upper_partial(double m) {
  return normal_pdf(m) - m * normal_cdf(-m);
}
inline double normal_lower_partial(double m) {
  return m * normal_cdf(m) + normal_pdf(m);
}

}  // namespace semimix::stats
