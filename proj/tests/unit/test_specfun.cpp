#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "serialmon/errors.hpp"
#include "serialmon/rng.hpp"
#include "serialmon/specfun.hpp"

namespace sf = serialmon::specfun;

TEST(LogGamma, ClosedForms) {
  EXPECT_EQ(sf::log_gamma(1.0), 0.0);
  EXPECT_NEAR(sf::log_gamma(0.5), 0.5723649429247001, 1e-13);
  EXPECT_NEAR(sf::log_gamma(6.0), std::log(120.0), 1e-13);
}

TEST(LogGamma, MatchesStdLgammaOnRange) {
  for (double a = 0.5; a <= 50.0; a += 0.37) {
    EXPECT_NEAR(sf::log_gamma(a), std::lgamma(a), 1e-13 * std::max(1.0, std::abs(std::lgamma(a)))) << a;
  }
}

TEST(LogGamma, RejectsNonPositive) {
  EXPECT_THROW(sf::log_gamma(0.0), serialmon::DomainError);
  EXPECT_THROW(sf::log_gamma(-1.5), serialmon::DomainError);
}

TEST(RegLowerGamma, ClosedForms) {
  EXPECT_NEAR(sf::reg_lower_gamma(1.0, std::log(5.0)), 0.8, 1e-14);
  EXPECT_EQ(sf::reg_lower_gamma(1.0, 0.0), 0.0);
}

TEST(RegLowerGamma, AgreesWithQuadratureOracle) {
  EXPECT_NEAR(sf::reg_lower_gamma(2.5, 3.1), oracle::reg_lower_gamma_quadrature(2.5, 3.1), 1e-12);
}

TEST(RegLowerGamma, UpperIsComplement) {
  for (double a : {0.5, 1.0, 3.0, 12.0}) {
    for (double x : {0.1, 1.0, 5.0, 20.0}) {
      EXPECT_NEAR(sf::reg_lower_gamma(a, x) + sf::reg_upper_gamma(a, x), 1.0, 1e-14);
    }
  }
}

TEST(RegLowerGamma, RejectsInvalid) {
  EXPECT_THROW(sf::reg_lower_gamma(0.0, 1.0), serialmon::DomainError);
  EXPECT_THROW(sf::reg_lower_gamma(1.0, -1.0), serialmon::DomainError);
}

TEST(InvRegLowerGamma, ClosedForms) {
  EXPECT_NEAR(sf::inv_reg_lower_gamma(1.0, 0.8), -std::log(0.2), 1e-10);
  EXPECT_EQ(sf::inv_reg_lower_gamma(1.0, 0.0), 0.0);
}

TEST(InvRegLowerGamma, MatchesBisectionOnOracle) {
  const double x = oracle::bisect_increasing([](double t) { return oracle::reg_lower_gamma_quadrature(3.0, t); },
                                             0.5, 0.0, 20.0, 1e-12);
  EXPECT_NEAR(sf::inv_reg_lower_gamma(3.0, 0.5), x, 1e-9);
}

TEST(InvRegLowerGamma, RejectsInvalid) {
  EXPECT_THROW(sf::inv_reg_lower_gamma(1.0, 1.0), serialmon::DomainError);
  EXPECT_THROW(sf::inv_reg_lower_gamma(1.0, -0.1), serialmon::DomainError);
  EXPECT_THROW(sf::inv_reg_lower_gamma(0.0, 0.5), serialmon::DomainError);
}

TEST(BesselK, HalfIntegerClosedForms) {
  EXPECT_NEAR(sf::bessel_k(0.5, 1.0), 0.4610685044478946, 1e-12);
  const double k32 = std::sqrt(std::numbers::pi / 4.0) * std::exp(-2.0) * 1.5;
  EXPECT_NEAR(sf::bessel_k(1.5, 2.0) / k32, 1.0, 1e-10);
}

TEST(BesselK, OrderZeroAgainstTighterQuadrature) {
  const double ref = oracle::bessel_k_quadrature(0.0, 1.0);
  EXPECT_NEAR(sf::bessel_k(0.0, 1.0) / ref, 1.0, 1e-10);
}

TEST(BesselK, RelativeAccuracyOnStatedGrid) {
  for (double nu : {0.0, 0.3, 1.0, 2.2, 3.7, 5.0}) {
    for (double x : {1e-3, 0.05, 0.7, 3.0, 12.0, 50.0}) {
      const double ref = oracle::bessel_k_quadrature(nu, x);
      EXPECT_NEAR(sf::bessel_k(nu, x) / ref, 1.0, 1e-9) << "nu=" << nu << " x=" << x;
    }
  }
}

TEST(BesselK, LogFormStaysFiniteWhereValueUnderflows) {
  const double v = sf::log_bessel_k(0.5, 800.0);
  EXPECT_NEAR(v, 0.5 * std::log(std::numbers::pi / 1600.0) - 800.0, 1e-9);
}

TEST(BesselK, Errors) {
  EXPECT_THROW(sf::bessel_k(0.5, 0.0), serialmon::DomainError);
  EXPECT_THROW(sf::bessel_k(-1.0, 1.0), serialmon::DomainError);
  EXPECT_THROW(sf::bessel_k(1.0, 1e-7), serialmon::NumericError);
}

TEST(NormalQuantile, KnownValues) {
  EXPECT_EQ(sf::std_normal_quantile(0.5), 0.0);
  const double ref = oracle::bisect_increasing(oracle::normal_cdf, 0.975, 0.0, 5.0, 1e-14);
  EXPECT_NEAR(sf::std_normal_quantile(0.975), ref, 1e-9);
  EXPECT_NEAR(ref, 1.959963984540054, 1e-9);
  EXPECT_NEAR(sf::std_normal_quantile(0.00135), -3.0, 1e-3);
}

TEST(NormalQuantile, InvertsOracleCdf) {
  for (double p = 1e-6; p < 1.0; p = p < 0.01 ? p * 3 : p + 0.0137) {
    const double x = sf::std_normal_quantile(p);
    const double back = oracle::bisect_increasing(oracle::normal_cdf, p, -8.0, 8.0, 1e-14);
    EXPECT_NEAR(x, back, 1e-9) << p;
  }
}

TEST(NormalQuantile, RejectsEndpoints) {
  EXPECT_THROW(sf::std_normal_quantile(0.0), serialmon::DomainError);
  EXPECT_THROW(sf::std_normal_quantile(1.0), serialmon::DomainError);
}

// Properties over random and gridded arguments.

TEST(SpecfunProperty, RegLowerGammaIncreasingInX) {
  serialmon::NoiseSource rng(101);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform(0.2, 30.0);
    const double x1 = rng.uniform(0.0, 60.0);
    const double x2 = x1 + rng.uniform(1e-3, 5.0);
    EXPECT_LE(sf::reg_lower_gamma(a, x1), sf::reg_lower_gamma(a, x2)) << a << " " << x1 << " " << x2;
    if (sf::reg_lower_gamma(a, x2) < 1.0 - 1e-12 && sf::reg_lower_gamma(a, x1) > 1e-300) {
      EXPECT_LT(sf::reg_lower_gamma(a, x1), sf::reg_lower_gamma(a, x2));
    }
  }
}

TEST(SpecfunProperty, InverseGammaRoundTrip) {
  for (double a : {0.5, 1.0, 2.0, 5.0}) {
    for (double p = 0.01; p < 0.995; p += 0.01) {
      const double x = sf::inv_reg_lower_gamma(a, p);
      EXPECT_NEAR(sf::reg_lower_gamma(a, x), p, 1e-10) << a << " " << p;
      EXPECT_NEAR(sf::inv_reg_lower_gamma(a, sf::reg_lower_gamma(a, x)), x, 1e-9 * std::max(1.0, x));
    }
  }
}

TEST(SpecfunProperty, HalfIntegerBesselMatchesIntegral) {
  for (int n = 0; n <= 4; ++n) {
    for (double x : {0.01, 0.3, 1.0, 4.0, 20.0}) {
      const double ref = oracle::bessel_k_half_integer(n, x);
      EXPECT_NEAR(sf::bessel_k(n + 0.5, x) / ref, 1.0, 1e-9) << n << " " << x;
    }
  }
}

TEST(SpecfunProperty, BesselPositiveAndDecreasing) {
  for (double nu : {0.0, 0.5, 1.7, 4.0}) {
    double prev = sf::bessel_k(nu, 0.01);
    for (double x = 0.05; x < 40.0; x *= 1.4) {
      const double cur = sf::bessel_k(nu, x);
      EXPECT_GT(cur, 0.0);
      EXPECT_LT(cur, prev) << nu << " " << x;
      prev = cur;
    }
  }
}

TEST(SpecfunProperty, NormalQuantileOddSymmetry) {
  for (double p = 0.001; p < 0.5; p += 0.0123) {
    EXPECT_NEAR(sf::std_normal_quantile(p), -sf::std_normal_quantile(1.0 - p), 1e-12);
  }
}
