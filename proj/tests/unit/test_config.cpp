#include <string>

#include <gtest/gtest.h>

#include "serialmon/config.hpp"
#include "serialmon/errors.hpp"

using namespace serialmon;

namespace {

const char* kMinimal = R"({"sim": {"steps": 10}})";

void expect_config_error(const std::string& text, const std::string& fragment) {
  try {
    parse_scenario(text).validate();
    ADD_FAILURE() << "no error for " << text;
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(Config, MinimalDefaultsToUgv) {
  const auto s = parse_scenario(kMinimal);
  EXPECT_EQ(s.steps, 10);
  EXPECT_EQ(s.model.states(), 3);
  EXPECT_EQ(s.model.sensors(), 2);
  EXPECT_EQ(s.detector.sensors, 2);
  EXPECT_DOUBLE_EQ(s.detector.cusum.bias, 2.1);
  EXPECT_EQ(s.detector.cusum.threshold, 0.0);
  EXPECT_EQ(s.detector.cusign_limit, 0);
  EXPECT_TRUE(s.attacks.empty());
  EXPECT_EQ(s.seeds, std::vector<std::uint64_t>{s.seed});
  EXPECT_NO_THROW(s.validate());
}

TEST(Config, ExplicitMatricesAndComments) {
  const auto s = parse_scenario(R"({
    // static two-sensor plant
    "plant": {"A": [[0.5, 0], [0, 0.5]], "B": [[1], [0]], "C": [[1, 0], [0, 1]],
              "Q": 0.01, "R": [[0.1, 0], [0, 0.1]], "ts": 0.1},
    "controller": {"K": [[0, 0]], "ref": [0, 0]},
    "detector": {"cusum": {"tau": 1.5}, "cusign": {"T": 4}},
    "sim": {"steps": 5, "seed": 9, "x0": [1, 2]}
  })");
  EXPECT_EQ(s.model.states(), 2);
  EXPECT_DOUBLE_EQ(s.model.Q(1, 1), 0.01);
  EXPECT_DOUBLE_EQ(s.model.Q(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(s.detector.cusum.threshold, 1.5);
  EXPECT_EQ(s.detector.cusign_limit, 4);
  EXPECT_DOUBLE_EQ(s.initial_state(1), 2.0);
  EXPECT_NO_THROW(s.validate());
}

TEST(Config, AttacksAndSeeds) {
  const auto s = parse_scenario(R"({
    "attacks": [{"kind": "bias", "start": 2, "end": 5, "seed": 77},
                {"kind": "pattern", "start": 5, "end": 9, "pattern": {"period": 2}},
                {"kind": "none"}],
    "redteam": {"sampling": "chi_square", "z_cap": 20},
    "sim": {"steps": 10}
  })");
  ASSERT_EQ(s.attacks.size(), 2u);
  EXPECT_EQ(s.attacks[1].pattern_period, 2);
  ASSERT_EQ(s.attack_seeds.size(), 2u);
  EXPECT_EQ(*s.attack_seeds[0], 77u);
  EXPECT_FALSE(s.attack_seeds[1]);
  EXPECT_EQ(s.sampling, redteam::SamplingLaw::kChiSquare);
  EXPECT_DOUBLE_EQ(*s.z_cap, 20.0);
}

TEST(Config, ActionableErrors) {
  expect_config_error("{", "");
  expect_config_error("[]", "object");
  expect_config_error(R"({"sim": {}})", "sim.steps");
  expect_config_error(R"({"sim": {"steps": 10}, "detectr": {}})", "detectr");
  expect_config_error(R"({"sim": {"steps": 10}, "detector": {"ell": 5}})", "ell");
  expect_config_error(R"({"sim": {"steps": 10}, "detector": {"alpha": 1.5}})", "alpha");
  expect_config_error(R"({"sim": {"steps": 10}, "detector": {"z": 3, "beta": 0.01}})", "beta");
  expect_config_error(R"({"sim": {"steps": 10}, "attack": {"kind": "laser"}})", "laser");
  expect_config_error(R"({"sim": {"steps": 10}, "attack": {"kind": "bias", "start": 5, "end": 20}})", "exceeds sim.steps");
  expect_config_error(
      R"({"sim": {"steps": 10}, "attacks": [{"kind": "bias", "start": 0, "end": 6},
                                             {"kind": "pattern", "start": 5, "end": 8}]})",
      "overlap");
  expect_config_error(R"({"sim": {"steps": 10}, "plant": {"ugv": {"m": -1}}})", "m");
  expect_config_error(R"({"sim": {"steps": 10}, "plant": {"A": [[1]], "B": [[1]], "C": [[1, 0]], "Q": 1, "R": 1}})",
                      "plant");
  expect_config_error(R"({"sim": {"steps": -1}})", "steps");
  expect_config_error(R"({"sim": {"steps": 1.5}})", "steps");
  expect_config_error(R"({"sim": {"steps": 10}, "redteam": {"sampling": "gauss"}})", "sampling");
}

TEST(Config, LoadMissingFile) { EXPECT_THROW(load_scenario("/nonexistent/x.json"), ConfigError); }

TEST(Config, SetValueCreatesAndOverrides) {
  const std::string base = R"({"detector": {"ell": 100, "z": 3}, "sim": {"steps": 10}})";
  const auto a = parse_scenario(set_config_value(base, "detector.ell", 50));
  EXPECT_DOUBLE_EQ(a.detector.ell, 50);
  const auto b = parse_scenario(set_config_value(base, "detector.cusum.b", 2.5));
  EXPECT_DOUBLE_EQ(b.detector.cusum.bias, 2.5);
  const auto c = parse_scenario(set_config_value(base, "detector.beta", 0.05));
  EXPECT_NEAR(c.detector.z_score, 1.959963984540054, 1e-9);
  const auto d = parse_scenario(set_config_value(base, "sim.steps", 20));
  EXPECT_EQ(d.steps, 20);
  EXPECT_THROW(set_config_value(base, "sim.steps", 2.5), ConfigError);
  EXPECT_THROW(set_config_value("[1]", "detector.ell", 1), ConfigError);
  EXPECT_THROW(set_config_value(R"({"detector": 3})", "detector.ell", 1), ConfigError);
}

TEST(Config, SweepableKeys) {
  EXPECT_TRUE(is_sweepable_key("detector.ell"));
  EXPECT_TRUE(is_sweepable_key("detector.beta"));
  EXPECT_TRUE(is_sweepable_key("attack.epsilon"));
  EXPECT_FALSE(is_sweepable_key("sim.seed"));
  EXPECT_FALSE(is_sweepable_key("bogus"));
}
