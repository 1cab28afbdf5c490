#include "serialmon/vargamma.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "serialmon/errors.hpp"
#include "serialmon/specfun.hpp"

namespace serialmon::vargamma {
namespace {

// Decay rate of the density on the side `side` (+1 right, -1 left) of the location.
double tail_rate(const VarGammaParams& p, double side) {
  const double s2 = p.spread * p.spread;
  const double b = std::sqrt(2.0 * s2 / p.shape + p.asymmetry * p.asymmetry) / s2;
  return b - side * p.asymmetry / s2;
}

// int_{u0}^{inf} pdf(c + side * u) du.
double tail_mass(const VarGammaParams& p, double side, double u0, const QuadratureSpec& spec) {
  const double rate = tail_rate(p, side);
  const double scale = std::max(1.0, p.bessel_order() + 0.5) / rate;
  auto density = [&](double u) { return vg_pdf(p, p.location + side * u, spec); };

  double mass = 0.0;
  double start = u0;
  if (u0 < scale) {
    // u = w^2 flattens the |u|^(order) behaviour at the location.
    auto substituted = [&](double w) {
      if (w == 0.0) {
        return 0.0;
      }
      return 2.0 * w * density(w * w);
    };
    mass += integrate(substituted, std::sqrt(u0), std::sqrt(scale), spec).value;
    start = scale;
  }
  mass += integrate_to_infinity(density, start, scale, spec).value;
  return mass;
}

}  // namespace

void VarGammaParams::validate() const {
  if (!(spread > 0.0) || !std::isfinite(spread)) {
    throw DomainError("VarGammaParams: spread must be positive");
  }
  if (!(shape > 0.0) || !std::isfinite(shape)) {
    throw DomainError("VarGammaParams: shape must be positive");
  }
  if (!std::isfinite(location) || !std::isfinite(asymmetry)) {
    throw DomainError("VarGammaParams: location and asymmetry must be finite");
  }
}

VarGammaParams vg_from_sensor_count(int sensors) {
  if (sensors < 2) {
    throw DomainError("vg_from_sensor_count: need s >= 2 (s = 1 has a log singularity), got " +
                      std::to_string(sensors));
  }
  const double s = sensors;
  return {0.0, std::sqrt(4.0 * s), 0.0, 2.0 / s};
}

double vg_pdf(const VarGammaParams& params, double x, const QuadratureSpec& spec) {
  params.validate();
  if (std::isnan(x)) throw DomainError("vg_pdf: x is NaN");
  const double lambda = params.shape;
  const double s2 = params.spread * params.spread;
  const double order = params.bessel_order();
  const double root = std::sqrt(2.0 * s2 / lambda + params.asymmetry * params.asymmetry);
  const double u = std::abs(x - params.location);

  // ln of 2 / (sigma sqrt(2 pi) lambda^(1/lambda) Gamma(1/lambda)) * root^(-order)
  const double log_front = std::log(2.0) - std::log(params.spread) -
                           0.5 * std::log(2.0 * std::numbers::pi) - std::log(lambda) / lambda -
                           specfun::log_gamma(1.0 / lambda) - order * std::log(root);

  const double arg = u * root / s2;
  // Below this argument the small-x form of K is exact to double precision
  // for orders >= 1, and direct evaluation would overflow.
  const bool near_location = u == 0.0 || (order >= 1.0 && arg < 1e-6);
  if (near_location) {
    if (order <= 0.0) {
      throw SingularityError(
          "vg_pdf: density is singular at the location for Bessel order <= 0; "
          "integrate around x = c instead of evaluating it");
    }
    // |u|^order K_order(b |u|) -> Gamma(order) 2^(order-1) b^(-order) as u -> 0.
    const double b = root / s2;
    return std::exp(log_front + specfun::log_gamma(order) + (order - 1.0) * std::log(2.0) -
                    order * std::log(b));
  }
  if (std::isinf(u)) return 0.0;

  const double log_density = log_front + params.asymmetry * (x - params.location) / s2 +
                             order * std::log(u) +
                             specfun::log_bessel_k(std::abs(order), arg, spec);
  return std::exp(log_density);
}

double vg_cdf(const VarGammaParams& params, double x, const QuadratureSpec& spec) {
  params.validate();
  if (std::isnan(x)) throw DomainError("vg_cdf: x is NaN");
  if (x == INFINITY) return 1.0;
  if (x == -INFINITY) return 0.0;
  double value;
  if (x >= params.location) {
    value = 1.0 - tail_mass(params, +1.0, x - params.location, spec);
  } else {
    value = tail_mass(params, -1.0, params.location - x, spec);
  }
  return std::clamp(value, 0.0, 1.0);
}

double vg_quantile(const VarGammaParams& params, double p, const QuadratureSpec& spec) {
  params.validate();
  if (!(p > 0.0 && p < 1.0)) throw DomainError("vg_quantile: p must lie in (0, 1)");

  double lo = params.location - params.spread;
  double hi = params.location + params.spread;
  double width = params.spread;
  while (vg_cdf(params, lo, spec) > p) {
    width *= 2.0;
    lo = params.location - width;
    if (!std::isfinite(lo)) throw NumericError("vg_quantile: cannot bracket lower side");
  }
  width = params.spread;
  while (vg_cdf(params, hi, spec) < p) {
    width *= 2.0;
    hi = params.location + width;
    if (!std::isfinite(hi)) throw NumericError("vg_quantile: cannot bracket upper side");
  }
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (vg_cdf(params, mid, spec) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double magnitude_threshold(int sensors, double psi_des) {
  if (!(psi_des > 0.0 && psi_des < 1.0)) {
    throw DomainError("magnitude_threshold: psi_des must lie in (0, 1)");
  }
  return vg_quantile(vg_from_sensor_count(sensors), 1.0 - 0.5 * psi_des);
}

}  // namespace serialmon::vargamma
