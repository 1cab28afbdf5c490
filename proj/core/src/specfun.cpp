#include "serialmon/specfun.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "serialmon/errors.hpp"

namespace serialmon::specfun {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxIter = 1000;

// Series for P(a, x), good for x < a + 1.
double lower_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) {
      return sum * std::exp(-x + a * std::log(x) - log_gamma(a));
    }
  }
  throw NumericError("reg_lower_gamma: series did not converge");
}

// Continued fraction for Q(a, x) (modified Lentz), good for x >= a + 1.
double upper_continued_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) {
      return std::exp(-x + a * std::log(x) - log_gamma(a)) * h;
    }
  }
  throw NumericError("reg_upper_gamma: continued fraction did not converge");
}

void check_gamma_args(double a, double x, const char* who) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw DomainError(std::string(who) + ": shape a must be positive and finite");
  }
  if (!(x >= 0.0) || std::isnan(x)) {
    throw DomainError(std::string(who) + ": x must be nonnegative");
  }
}

}  // namespace

double log_gamma(double a) {
  if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("log_gamma: argument must be positive");
  if (a == 1.0 || a == 2.0) return 0.0;
  // Lanczos, g = 7, n = 9.
  static constexpr std::array<double, 9> coeff = {
      0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
      771.32342877765313,      -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
  if (a < 0.5) {
    // Reflection keeps the approximation in its accurate range.
    return std::log(std::numbers::pi / std::sin(std::numbers::pi * a)) - log_gamma(1.0 - a);
  }
  const double z = a - 1.0;
  double sum = coeff[0];
  for (int i = 1; i < 9; ++i) sum += coeff[i] / (z + i);
  const double t = z + 7.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t + std::log(sum);
}

double reg_lower_gamma(double a, double x) {
  check_gamma_args(a, x, "reg_lower_gamma");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return lower_series(a, x);
  return 1.0 - upper_continued_fraction(a, x);
}

double reg_upper_gamma(double a, double x) {
  check_gamma_args(a, x, "reg_upper_gamma");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - lower_series(a, x);
  return upper_continued_fraction(a, x);
}

double inv_reg_lower_gamma(double a, double p) {
  if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("inv_reg_lower_gamma: a must be positive");
  if (p == 1.0) throw DomainError("inv_reg_lower_gamma: p = 1 has an unbounded inverse");
  if (!(p >= 0.0 && p < 1.0)) throw DomainError("inv_reg_lower_gamma: p must lie in [0, 1)");
  if (p == 0.0) return 0.0;

  double lo = 0.0;
  double hi = a + 20.0 * std::sqrt(a) + 20.0;
  while (reg_lower_gamma(a, hi) < p) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw NumericError("inv_reg_lower_gamma: cannot bracket root");
  }

  const double lg = log_gamma(a);
  double x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 500; ++iter) {
    const double f = reg_lower_gamma(a, x) - p;
    if (f == 0.0) return x;
    if (f < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    if (hi - lo <= 4.0 * kEps * std::max(1.0, hi)) return 0.5 * (lo + hi);

    const double deriv = std::exp((a - 1.0) * std::log(x) - x - lg);
    double next = x - f / deriv;
    // Newton steps leaving the bracket (or stalling) fall back to bisection.
    if (!(deriv > 0.0) || !std::isfinite(next) || next <= lo || next >= hi) {
      next = 0.5 * (lo + hi);
    }
    if (std::abs(next - x) <= 2.0 * kEps * std::max(1.0, x)) return next;
    x = next;
  }
  throw NumericError("inv_reg_lower_gamma: no convergence");
}

double log_bessel_k(double nu, double x, const QuadratureSpec& spec) {
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("bessel_k: x must be positive");
  if (!(nu >= 0.0) || !std::isfinite(nu)) throw DomainError("bessel_k: order must be nonnegative");
  if (x < 1e-6 && nu >= 1.0) {
    throw NumericError("bessel_k: overflow, K_nu(x) is near-singular for x < 1e-6 and nu >= 1");
  }

  // Work with the log of the dominant factor, g(t) = -x cosh t + nu t,
  // normalized by its maximum at t* = asinh(nu / x).
  auto g = [&](double t) { return -x * std::cosh(t) + nu * t; };
  const double t_peak = nu > 0.0 ? std::asinh(nu / x) : 0.0;
  const double g_peak = g(t_peak);

  // Truncate where the integrand has dropped below 1e-18 of its peak.
  const double log_cut = std::log(1e-18);
  double step = 1.0;
  while (g(t_peak + step) - g_peak > log_cut) step *= 2.0;
  double lo = t_peak + 0.5 * step;
  double hi = t_peak + step;
  if (step == 1.0) lo = t_peak;
  for (int i = 0; i < 40; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) - g_peak > log_cut) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double t_max = hi;

  auto integrand = [&](double t) {
    return std::exp(g(t) - g_peak) * 0.5 * (1.0 + std::exp(-2.0 * nu * t));
  };
  QuadratureSpec scaled = spec;
  scaled.abs_tol = std::min(spec.abs_tol, spec.rel_tol * 1e-3);
  double total = 0.0;
  if (t_peak > 0.0) total += integrate(integrand, 0.0, t_peak, scaled).value;
  total += integrate(integrand, t_peak, t_max, scaled).value;
  return g_peak + std::log(total);
}

double bessel_k(double nu, double x, const QuadratureSpec& spec) {
  const double log_value = log_bessel_k(nu, x, spec);
  const double value = std::exp(log_value);
  if (!std::isfinite(value)) throw NumericError("bessel_k: result overflows double");
  return value;
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("std_normal_quantile: p must lie in (0, 1)");
  if (p == 0.5) return 0.0;

  // Acklam's rational approximation followed by one Halley refinement.
  static constexpr std::array<double, 6> a = {-3.969683028665376e+01, 2.209460984245205e+02,
                                              -2.759285104469687e+02, 1.383577518672690e+02,
                                              -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b = {-5.447609879822406e+01, 1.615858368580409e+02,
                                              -1.556989798598866e+02, 6.680131188771972e+01,
                                              -1.328068155288572e+01};
  static constexpr std::array<double, 6> c = {-7.784894002430293e-03, -3.223964580411365e-01,
                                              -2.400758277161838e+00, -2.549732539343734e+00,
                                              4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr std::array<double, 4> d = {7.784695709041462e-03, 3.224671290700398e-01,
                                              2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  for (int i = 0; i < 2; ++i) {
    // Upper-tail residual avoids cancellation for p near 1.
    const double e = x > 0.0 ? (1.0 - p) - 0.5 * std::erfc(x / std::numbers::sqrt2)
                             : std_normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

}  // namespace serialmon::specfun
