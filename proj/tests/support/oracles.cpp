#include "oracles.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace oracle {
namespace {

constexpr std::array<double, 5> kNodes = {0.1488743389816312, 0.4333953941292472, 0.6794095682990244,
                                          0.8650633666889845, 0.9739065285171717};
constexpr std::array<double, 5> kWeights = {0.2955242247147529, 0.2692667193099963, 0.2190863625159820,
                                            0.1494513491505806, 0.0666713443086881};

double chi_square_pdf(int s, double t) {
  if (t <= 0.0) return (s == 2 && t == 0.0) ? 0.5 : 0.0;
  const double h = 0.5 * s;
  return std::exp((h - 1.0) * std::log(t) - 0.5 * t - h * std::log(2.0) - std::lgamma(h));
}

}  // namespace

double gauss_legendre(const std::function<double(double)>& f, double a, double b, int panels) {
  const double width = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * width;
    const double half = 0.5 * width;
    double sum = 0.0;
    for (std::size_t i = 0; i < kNodes.size(); ++i) {
      sum += kWeights[i] * (f(mid - half * kNodes[i]) + f(mid + half * kNodes[i]));
    }
    total += sum * half;
  }
  return total;
}

double bessel_k_half_integer(int n, double x) {
  double prev = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x);  // K_{-1/2} = K_{1/2}
  double cur = prev;                                                       // K_{1/2}
  for (int k = 0; k < n; ++k) {
    const double nu = k + 0.5;
    const double next = prev + 2.0 * nu / x * cur;
    prev = cur;
    cur = next;
  }
  return cur;
}

double bessel_k_quadrature(double nu, double x) {
  // Upper limit where x cosh t - nu t exceeds its minimum by 60.
  const double t_peak = std::asinh(nu / x);
  auto g = [&](double t) { return -x * std::cosh(t) + nu * t; };
  const double peak = g(t_peak);
  double t_max = t_peak + 1.0;
  while (g(t_max) > peak - 60.0) t_max *= 1.5;
  auto f = [&](double t) { return std::exp(g(t) - peak) * 0.5 * (1.0 + std::exp(-2.0 * nu * t)); };
  const double split = std::max(t_peak, 1e-3);
  const double left = gauss_legendre(f, 0.0, split, 400);
  const double right = gauss_legendre(f, split, t_max, 4000);
  return std::exp(peak) * (left + right);
}

double reg_lower_gamma_quadrature(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double upper = std::pow(x, a);
  auto f = [&](double u) { return std::exp(-std::pow(u, 1.0 / a)); };
  // Panels graded geometrically toward u = 0, where u^{1/a} is not smooth.
  double total = 0.0;
  double hi = upper;
  for (int j = 0; j < 80; ++j) {
    const double lo = 0.5 * hi;
    total += gauss_legendre(f, lo, hi, 8);
    hi = lo;
  }
  total += hi;  // f ~ 1 on the remaining sliver
  return total / std::tgamma(a + 1.0);
}

double chi_square_difference_pdf(int s, double x) {
  // f_D(x) = int f(t) f(t - |x|) dt over t > |x|; substitute t = |x| + u^2 to
  // remove the endpoint behaviour of f near 0.
  const double ax = std::abs(x);
  auto integrand = [&](double u) {
    const double w = u * u;
    return chi_square_pdf(s, ax + w) * chi_square_pdf(s, w) * 2.0 * u;
  };
  return gauss_legendre(integrand, 0.0, 20.0, 2000);
}

double laplace_pdf(double x, double scale) { return std::exp(-std::abs(x) / scale) / (2.0 * scale); }

double laplace_cdf(double x, double scale) {
  return x < 0.0 ? 0.5 * std::exp(x / scale) : 1.0 - 0.5 * std::exp(-x / scale);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double bisect_increasing(const std::function<double(double)>& f, double target, double lo, double hi,
                         double tol) {
  for (int i = 0; i < 400 && hi - lo > tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Discrete zoh_series(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double t, int terms) {
  const auto n = a.rows();
  Eigen::MatrixXd exp_a = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd integral = Eigen::MatrixXd::Identity(n, n) * t;
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
  double factorial = 1.0;
  for (int k = 1; k < terms; ++k) {
    power = power * a;
    factorial *= k;
    exp_a += power * std::pow(t, k) / factorial;
    integral += power * std::pow(t, k + 1) / (factorial * (k + 1));
  }
  return {exp_a, integral * b};
}

Eigen::MatrixXd riccati_iterate(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c, const Eigen::MatrixXd& q,
                                const Eigen::MatrixXd& r, long iterations) {
  Eigen::MatrixXd p = q;
  for (long i = 0; i < iterations; ++i) {
    const Eigen::MatrixXd s = c * p * c.transpose() + r;
    p = a * (p - p * c.transpose() * s.inverse() * c * p) * a.transpose() + q;
  }
  return p;
}

}  // namespace oracle
