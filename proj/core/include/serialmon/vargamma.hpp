#pragma once

#include "serialmon/quadrature.hpp"

namespace serialmon::vargamma {

/// Variance-gamma law with location c, spread sigma_bar, asymmetry theta and
/// shape lambda.
struct VarGammaParams {
  double location = 0.0;
  double spread = 1.0;
  double asymmetry = 0.0;
  double shape = 1.0;

  void validate() const;
  /// Order of the Bessel function in the density, 1/lambda - 1/2.
  [[nodiscard]] double bessel_order() const { return 1.0 / shape - 0.5; }
};

/// Law of z_k - z_{k-1} for independent chi-square(s) test measures:
/// {0, sqrt(4s), 0, 2/s}. Requires s >= 2.
VarGammaParams vg_from_sensor_count(int sensors);

/// Density. Finite at the location when the Bessel order is positive; for
/// order <= 0 the location is an integrable singularity and SingularityError
/// is thrown there.
double vg_pdf(const VarGammaParams& params, double x, const QuadratureSpec& spec = {});

/// Distribution function by adaptive quadrature of vg_pdf, split at the location.
double vg_cdf(const VarGammaParams& params, double x, const QuadratureSpec& spec = {});

/// Inverse distribution function by bisection; p in (0, 1).
double vg_quantile(const VarGammaParams& params, double p, const QuadratureSpec& spec = {});

/// Threshold tau_d with P(|d_k| > tau_d) = psi_des for the attack-free law.
double magnitude_threshold(int sensors, double psi_des);

}  // namespace serialmon::vargamma
