#pragma once

#include <cmath>
#include <functional>

namespace calibdr {

inline double expit(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + e^x) without overflow for large |x|.
inline double log1pexp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double norm_pdf(double x);
double norm_cdf(double x);

// Inverse standard normal CDF, rational approximation accurate to ~1e-15
// over p in (0,1). Throws std::domain_error outside the open interval.
double norm_quantile(double p);

// Adaptive Simpson quadrature of f over [a,b] to absolute tolerance tol.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-12);

}  // namespace calibdr
