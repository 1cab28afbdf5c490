#pragma once

#include <functional>

namespace serialmon {

/// Tolerances for adaptive Gauss-Kronrod integration.
struct QuadratureSpec {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  int max_subdivisions = 200;

  /// Throws DomainError unless tolerances are positive and max_subdivisions >= 8.
  void validate() const;
};

struct QuadratureResult {
  double value = 0.0;
  double abs_error = 0.0;
  int subdivisions = 0;
};

using Integrand = std::function<double(double)>;

/// Globally adaptive G7-K15 integration of f over [a, b].
/// Throws NumericError when the error target is not met within the
/// subdivision budget.
QuadratureResult integrate(const Integrand& f, double a, double b,
                           const QuadratureSpec& spec = {});

/// Integral of f over [a, inf) via t = a + scale * u / (1 - u).
/// `scale` should be on the order of the integrand's decay length.
QuadratureResult integrate_to_infinity(const Integrand& f, double a, double scale,
                                       const QuadratureSpec& spec = {});

}  // namespace serialmon
