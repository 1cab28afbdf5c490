#pragma once

#include "serialmon/quadrature.hpp"

// Scalar special functions. All are pure and thread-safe; invalid
// arguments raise DomainError, numerical failure raises NumericError.
namespace serialmon::specfun {

/// ln Gamma(a) for a > 0 (Lanczos approximation).
double log_gamma(double a);

/// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
double reg_lower_gamma(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), without cancellation.
double reg_upper_gamma(double a, double x);

/// Inverse of P(a, .): the x >= 0 with P(a, x) = p. p must lie in [0, 1).
double inv_reg_lower_gamma(double a, double p);

/// Modified Bessel function of the third kind K_nu(x), from
/// K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt.
double bessel_k(double nu, double x, const QuadratureSpec& spec = {});

/// ln K_nu(x); stays finite where K_nu itself under- or overflows.
double log_bessel_k(double nu, double x, const QuadratureSpec& spec = {});

/// Standard normal CDF.
double std_normal_cdf(double x);

/// Inverse standard normal CDF for p in (0, 1).
double std_normal_quantile(double p);

}  // namespace serialmon::specfun
