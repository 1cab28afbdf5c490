#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "serialmon/detect.hpp"
#include "serialmon/errors.hpp"
#include "serialmon/feasible_set.hpp"
#include "serialmon/plant.hpp"
#include "serialmon/redteam.hpp"
#include "serialmon/rng.hpp"

using namespace serialmon;
using namespace serialmon::redteam;
using detect::DetectorBank;
using detect::DetectorId;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kTau2 = 3.2188758248682006;

detect::DetectorConfig bank_config() {
  detect::DetectorConfig c;
  c.cusum = {2.1, 1.23};
  c.cusign_limit = 5;
  return c;
}

StealthSettings settings() {
  StealthSettings s;
  s.sigma_sqrt = MatrixXd::Identity(2, 2);
  s.z_cap = default_z_cap(2);
  return s;
}

struct RunStats {
  int steps = 0;
  int violations = 0;
  int bd_alarms = 0;
  int magnitude_alarms = 0;
  int magnitude_updates = 0;
  int sign_switches = 0;
  int sign_updates = 0;
  std::array<bool, detect::kDetectorCount> detected{};
};

// Drives a bank directly with r = delta (Sigma = I).
template <typename Draw>
RunStats drive(DetectorBank& bank, int steps, Draw draw) {
  RunStats out;
  for (int k = 0; k < steps; ++k) {
    const DeltaSample s = draw();
    const auto o = bank.step(s.delta.delta, k);
    ++out.steps;
    out.violations += s.feasibility_violation;
    out.bd_alarms += o[DetectorId::kBadData].alarm;
    if (o[DetectorId::kSerialMagnitude].updated) {
      ++out.magnitude_updates;
      out.magnitude_alarms += o[DetectorId::kSerialMagnitude].alarm;
      ++out.sign_updates;
      out.sign_switches += o[DetectorId::kSerialSign].alarm;
    }
  }
  for (auto id : detect::kAllDetectors) {
    out.detected[static_cast<std::size_t>(id)] = bank.monitor(id).detected();
  }
  return out;
}

}  // namespace

TEST(AttackVector, NullsResidualToDelta) {
  const auto m = plant::discretize_ugv({});
  const auto est = plant::solve_dare(m);
  plant::Plant p(m, est, VectorXd::Zero(3));
  NoiseSource rng(1);
  for (int k = 0; k < 100; ++k) p.advance(VectorXd::Zero(2), VectorXd::Zero(2), rng);
  for (double c : {0.0, kTau2, 0.37, 12.5}) {
    const auto noise = p.draw_noise(rng);
    const auto delta = delta_with_norm(rng, 2, c);
    EXPECT_NEAR(delta.squared_norm(), c, 1e-12);
    const VectorXd xi = attack_vector(delta, p.estimation_error(), noise.measurement, m.C,
                                      est.residual_cov_sqrt);
    const auto s = p.advance(VectorXd::Zero(2), xi, noise);
    const double z = detect::test_measure(s.r, est.residual_cov_inv);
    EXPECT_NEAR(z, c, 1e-9);
  }
}

TEST(AttackVector, BoundaryIsNotABadDataAlarm) {
  const detect::BadDataDetector bd(kTau2);
  NoiseSource rng(2);
  const auto d = delta_with_norm(rng, 2, kTau2);
  EXPECT_FALSE(bd.step(d.delta.dot(d.delta) * (1.0 - 1e-15)));
}

TEST(ZeroAlarm, NeverAlarmsAndRateDecaysBelowLower) {
  DetectorBank bank(bank_config(), MatrixXd::Identity(2, 2));
  NoiseSource rng(3);
  const auto stats = drive(bank, 10000, [&] {
    auto d = zero_alarm_delta(rng, 2, kTau2);
    EXPECT_LE(d.squared_norm(), kTau2 + 1e-12);
    return DeltaSample{d, false};
  });
  EXPECT_EQ(stats.bd_alarms, 0);
  const auto& m = bank.monitor(DetectorId::kBadData);
  EXPECT_LT(m.rate(), m.bounds().lower);
  // Exact decay: 0.2 (1 - 1/ell)^k first drops below the lower bound at this step.
  const auto t = *m.detection_time();
  EXPECT_LT(0.2 * std::pow(0.99, static_cast<double>(t + 1)), m.bounds().lower);
  EXPECT_GE(0.2 * std::pow(0.99, static_cast<double>(t)), m.bounds().lower);
}

TEST(HiddenBd, MatchesAlphaAndStallsMagnitude) {
  DetectorBank bank(bank_config(), MatrixXd::Identity(2, 2));
  NoiseSource rng(4);
  const auto stats =
      drive(bank, 100000, [&] { return DeltaSample{hidden_bd_delta(rng, 2, kTau2, 0.2), false}; });
  EXPECT_NEAR(static_cast<double>(stats.bd_alarms) / stats.steps, 0.2, 0.01);
  EXPECT_EQ(stats.magnitude_alarms, 0);
  EXPECT_TRUE(bank.monitor(DetectorId::kSerialMagnitude).detected());
}

TEST(HiddenBd, TwoPointSupport) {
  NoiseSource rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double z = hidden_bd_delta(rng, 2, kTau2, 0.2).squared_norm();
    const bool lo = std::abs(z - 0.95 * kTau2) < 1e-12;
    const bool hi = std::abs(z - 1.05 * kTau2) < 1e-12;
    EXPECT_TRUE(lo || hi) << z;
  }
}

TEST(FeasibleSetTest, Algebra) {
  const auto a = FeasibleSet::range(0.0, 2.0).unite(FeasibleSet::range(5.0, 6.0));
  EXPECT_DOUBLE_EQ(a.measure(), 3.0);
  EXPECT_TRUE(a.contains(1.0));
  EXPECT_FALSE(a.contains(3.0));
  const auto b = a.intersect(FeasibleSet::range(1.5, 5.5));
  ASSERT_EQ(b.intervals().size(), 2u);
  EXPECT_DOUBLE_EQ(b.measure(), 1.0);
  EXPECT_TRUE(FeasibleSet::range(2.0, 1.0).empty());
  const auto merged = FeasibleSet::range(0.0, 1.0).unite(FeasibleSet::range(1.0, 2.0));
  EXPECT_EQ(merged.intervals().size(), 1u);
  NoiseSource rng(6);
  for (int i = 0; i < 1000; ++i) EXPECT_TRUE(b.contains(b.sample(rng)));
  const auto point = FeasibleSet::range(4.0, 4.0);
  EXPECT_EQ(point.sample(rng), 4.0);
  EXPECT_THROW(FeasibleSet().sample(rng), NumericError);
}

TEST(Resolver, ForcedBeatsGoalBeatsPreferAndReportsViolation) {
  NoiseSource rng(7);
  const auto full = FeasibleSet::range(0.0, 10.0);
  Decision force{FeasibleSet::range(0.0, 1.0), FeasibleSet::range(1.0, 10.0), Decision::Stance::kForce, true};
  Decision goal{FeasibleSet::range(5.0, 10.0), FeasibleSet::range(0.0, 5.0), Decision::Stance::kGoal, true};
  Decision prefer{FeasibleSet::range(0.5, 0.6), FeasibleSet::range(0.0, 0.5), Decision::Stance::kPrefer, true};
  const std::vector<Decision> ds{force, goal, prefer};
  for (int i = 0; i < 200; ++i) {
    const auto r = resolve_decisions(ds, FeasibleSet::range(0.0, 10.0), full, rng);
    EXPECT_FALSE(r.violation);
    EXPECT_GE(r.z, 0.5);
    EXPECT_LE(r.z, 0.6);
  }
  Decision clash{FeasibleSet::range(8.0, 9.0), FeasibleSet::range(0.0, 8.0), Decision::Stance::kForce, true};
  const std::vector<Decision> conflict{force, clash};
  const auto r = resolve_decisions(conflict, full, full, rng);
  EXPECT_TRUE(r.violation);
  EXPECT_TRUE(full.contains(r.z));
}

TEST(Resolver, PreferredBandWhenUnconstrained) {
  NoiseSource rng(8);
  const auto band = FeasibleSet::range(3.0, 3.5);
  const auto r = resolve_decisions({}, band, FeasibleSet::range(0.0, 10.0), rng);
  EXPECT_TRUE(band.contains(r.z));
}

TEST(Resolver, ChiSquareLawStaysInSet) {
  NoiseSource rng(9);
  const auto set = FeasibleSet::range(0.0, 0.5).unite(FeasibleSet::range(7.0, 9.0));
  int high = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto r = resolve_decisions({}, set, set, rng, SamplingLaw::kChiSquare, 2);
    ASSERT_TRUE(set.contains(r.z));
    high += r.z > 5.0;
  }
  // chi-square(2) mass: [0, 0.5] ~ 0.221, [7, 9] ~ 0.019.
  EXPECT_NEAR(high / 2000.0, 0.019 / 0.240, 0.03);
}

TEST(Pattern, FoolsMagnitudeAndSlowsSignSwitches) {
  DetectorBank bank(bank_config(), MatrixXd::Identity(2, 2));
  NoiseSource rng(10);
  PatternState state(3);
  EmulationCarry carry;
  const auto s = settings();
  const auto stats = drive(bank, 100000, [&] { return pattern_delta(rng, bank, state, carry, s); });
  EXPECT_NEAR(static_cast<double>(stats.bd_alarms) / stats.steps, 0.2, 0.02);
  EXPECT_NEAR(static_cast<double>(stats.magnitude_alarms) / stats.magnitude_updates, 0.2, 0.02);
  const double switch_rate = static_cast<double>(stats.sign_switches) / stats.sign_updates;
  EXPECT_NEAR(switch_rate, 1.0 / 3.0, 0.03);
  EXPECT_LT(switch_rate, detect::sign_bounds(100, 3.0).lower);
  EXPECT_EQ(stats.violations, 0);
}

TEST(Pattern, SignDetectedSoonAfterOnset) {
  DetectorBank bank(bank_config(), MatrixXd::Identity(2, 2));
  NoiseSource rng(11);
  PatternState state(3);
  EmulationCarry carry;
  const auto s = settings();
  drive(bank, 5000, [&] { return pattern_delta(rng, bank, state, carry, s); });
  EXPECT_TRUE(bank.monitor(DetectorId::kSerialSign).detected());
  EXPECT_FALSE(bank.monitor(DetectorId::kSerialMagnitude).detected());
  EXPECT_FALSE(bank.monitor(DetectorId::kBadData).detected());
}

TEST(Bias, DetectedByMagnitudeOnly) {
  DetectorBank bank(bank_config(), MatrixXd::Identity(2, 2));
  NoiseSource rng(12);
  EmulationCarry carry;
  const auto s = settings();
  const auto stats = drive(bank, 20000, [&] { return bias_delta(rng, bank, carry, s); });
  EXPECT_NEAR(static_cast<double>(stats.bd_alarms) / stats.steps, 0.2, 0.02);
  EXPECT_EQ(stats.violations, 0);
  EXPECT_TRUE(stats.detected[static_cast<std::size_t>(DetectorId::kSerialMagnitude)]);
  for (auto id : {DetectorId::kBadData, DetectorId::kCusum, DetectorId::kCusign, DetectorId::kSerialSign}) {
    EXPECT_FALSE(stats.detected[static_cast<std::size_t>(id)]) << detect::detector_name(id);
  }
}

TEST(SerialEvading, LookAheadHonouredAndUndetected) {
  DetectorBank bank(bank_config(), MatrixXd::Identity(2, 2));
  NoiseSource rng(13);
  const auto s = settings();
  const double tau_d = bank.serial().threshold();
  int violations = 0;
  const int steps = 50000;
  for (int k = 0; k < steps; ++k) {
    const bool mag_active = bank.serial().next_step_active() && bank.serial().previous_z();
    const auto& mag = bank.monitor(DetectorId::kSerialMagnitude);
    const auto& sign = bank.monitor(DetectorId::kSerialSign);
    const bool no_alarm_forced = mag_active && mag.alarm_would_exceed_upper();
    const bool alarm_forced = mag_active && mag.silence_would_cross_lower();
    const bool keep_forced = mag_active && bank.serial().stored_sign() != 0 && sign.alarm_would_exceed_upper();
    const double z_prev = bank.serial().previous_z().value_or(0.0);
    const int stored = bank.serial().stored_sign();
    const auto sample = serial_evading_delta(rng, bank, s);
    violations += sample.feasibility_violation;
    const double z = sample.delta.squared_norm();
    if (!sample.feasibility_violation) {
      if (no_alarm_forced) {
        ASSERT_LE(std::abs(z - z_prev), tau_d + 1e-9) << k;
      }
      if (alarm_forced) {
        ASSERT_GT(std::abs(z - z_prev), tau_d) << k;
      }
      if (keep_forced && stored > 0) {
        ASSERT_GE(z, z_prev) << k;
      }
      if (keep_forced && stored < 0) {
        ASSERT_LE(z, z_prev) << k;
      }
    }
    bank.step(sample.delta.delta, k);
  }
  EXPECT_LT(violations, steps / 100);
  for (auto id : detect::kAllDetectors) {
    EXPECT_FALSE(bank.monitor(id).detected()) << detect::detector_name(id);
  }
}

TEST(AttackPlanTest, ValidationAndParsing) {
  AttackPlan p;
  p.kind = AttackKind::kBias;
  p.start = 10;
  p.end = 5;
  EXPECT_THROW(p.validate(), ConfigError);
  p.end = 20;
  EXPECT_NO_THROW(p.validate());
  EXPECT_TRUE(p.active(10));
  EXPECT_FALSE(p.active(20));
  p.epsilon = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  EXPECT_EQ(parse_attack_kind("serial_evading"), AttackKind::kSerialEvading);
  EXPECT_EQ(attack_kind_name(AttackKind::kHiddenBadData), "hidden_bd");
  EXPECT_THROW(parse_attack_kind("nope"), ConfigError);
  EXPECT_EQ(parse_sampling_law("chi_square"), SamplingLaw::kChiSquare);
  EXPECT_THROW(parse_sampling_law("gauss"), ConfigError);
}

TEST(AttackerTest, InactiveOutsideInterval) {
  const auto m = plant::discretize_ugv({});
  const auto est = plant::solve_dare(m);
  DetectorBank bank(bank_config(), est.residual_cov_inv);
  AttackPlan plan;
  plan.kind = AttackKind::kZeroAlarm;
  plan.start = 5;
  plan.end = 10;
  auto s = settings();
  s.sigma_sqrt = est.residual_cov_sqrt;
  Attacker attacker(plan, 42, m.C, s);
  const auto off = attacker.next(4, VectorXd::Zero(3), VectorXd::Zero(2), bank);
  EXPECT_FALSE(off.active);
  EXPECT_TRUE(off.xi.isZero(0.0));
  const auto on = attacker.next(5, VectorXd::Zero(3), VectorXd::Zero(2), bank);
  EXPECT_TRUE(on.active);
  EXPECT_TRUE(on.xi.isApprox(est.residual_cov_sqrt * on.delta.delta));
}
