#include "serialmon/config.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "serialmon/errors.hpp"

namespace serialmon {
namespace {

using nlohmann::json;

std::string join(std::string_view prefix, std::string_view key) {
  return prefix.empty() ? std::string(key) : std::string(prefix) + "." + std::string(key);
}

void reject_unknown(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      std::string list;
      for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
      throw ConfigError(join(where, key) + ": unknown key (expected one of: " + list + ")");
    }
  }
}

const json* child(const json& obj, std::string_view key) {
  auto it = obj.find(std::string(key));
  return it == obj.end() ? nullptr : &*it;
}

const json& expect_object(const json& v, const std::string& where) {
  if (!v.is_object()) throw ConfigError(where + ": expected an object");
  return v;
}

double get_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  return v.get<double>();
}

std::int64_t get_integer(const json& v, const std::string& where) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == static_cast<double>(static_cast<std::int64_t>(d))) return static_cast<std::int64_t>(d);
  }
  throw ConfigError(where + ": expected an integer");
}

std::uint64_t get_seed(const json& v, const std::string& where) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  const auto i = get_integer(v, where);
  if (i < 0) throw ConfigError(where + ": seed must be non-negative");
  return static_cast<std::uint64_t>(i);
}

std::string get_string(const json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError(where + ": expected a string");
  return v.get<std::string>();
}

template <class T, class Getter>
void read_opt(const json& obj, std::string_view prefix, std::string_view key, T& out, Getter get) {
  if (const json* v = child(obj, key)) out = static_cast<T>(get(*v, join(prefix, key)));
}

Eigen::MatrixXd get_matrix(const json& v, const std::string& where) {
  if (v.is_number()) return Eigen::MatrixXd::Constant(1, 1, v.get<double>());
  if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(v.size());
  Eigen::Index cols = -1;
  Eigen::MatrixXd m;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = v[static_cast<std::size_t>(i)];
    const std::string rw = where + "[" + std::to_string(i) + "]";
    if (!row.is_array() || row.empty()) throw ConfigError(rw + ": expected a non-empty array");
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      m.resize(rows, cols);
    } else if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError(rw + ": ragged matrix row");
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = get_number(row[static_cast<std::size_t>(j)], rw + "[" + std::to_string(j) + "]");
    }
  }
  return m;
}

Eigen::VectorXd get_vector(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected a non-empty array");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = get_number(v[i], where + "[" + std::to_string(i) + "]");
  }
  return out;
}

struct PlantSection {
  plant::PlantModel model;
  bool is_ugv = false;
};

PlantSection parse_plant(const json* node) {
  PlantSection out;
  if (node == nullptr) {
    out.model = plant::discretize_ugv({});
    out.is_ugv = true;
    return out;
  }
  const json& p = expect_object(*node, "plant");
  reject_unknown(p, "plant", {"ugv", "A", "B", "C", "Q", "R", "ts"});
  if (const json* ugv = child(p, "ugv")) {
    if (child(p, "A") || child(p, "B") || child(p, "C")) {
      throw ConfigError("plant: give either plant.ugv or plant.{A,B,C,Q,R}, not both");
    }
    expect_object(*ugv, "plant.ugv");
    reject_unknown(*ugv, "plant.ugv", {"m", "iz", "w", "br", "bl", "ts", "q", "r_v", "r_theta"});
    plant::UgvParams params;
    const std::string w = "plant.ugv";
    read_opt(*ugv, w, "m", params.mass, get_number);
    read_opt(*ugv, w, "iz", params.yaw_inertia, get_number);
    read_opt(*ugv, w, "w", params.width, get_number);
    read_opt(*ugv, w, "br", params.rolling_resistance, get_number);
    read_opt(*ugv, w, "bl", params.turning_resistance, get_number);
    read_opt(*ugv, w, "ts", params.sample_time, get_number);
    read_opt(*ugv, w, "q", params.process_noise, get_number);
    read_opt(*ugv, w, "r_v", params.velocity_noise, get_number);
    read_opt(*ugv, w, "r_theta", params.heading_noise, get_number);
    params.validate();
    out.model = plant::discretize_ugv(params);
    out.is_ugv = true;
    return out;
  }
  for (const char* key : {"A", "B", "C", "Q", "R"}) {
    if (!child(p, key)) throw ConfigError(std::string("plant.") + key + ": missing (or give plant.ugv)");
  }
  out.model.A = get_matrix(p["A"], "plant.A");
  out.model.B = get_matrix(p["B"], "plant.B");
  out.model.C = get_matrix(p["C"], "plant.C");
  // A scalar noise covariance means that multiple of the identity.
  auto covariance = [](const json& v, Eigen::Index n, const std::string& where) -> Eigen::MatrixXd {
    if (v.is_number()) return v.get<double>() * Eigen::MatrixXd::Identity(n, n);
    return get_matrix(v, where);
  };
  out.model.Q = covariance(p["Q"], out.model.A.rows(), "plant.Q");
  out.model.R = covariance(p["R"], out.model.C.rows(), "plant.R");
  read_opt(p, "plant", "ts", out.model.sample_time, get_number);
  return out;
}

void parse_detector(const json* node, detect::DetectorConfig& cfg) {
  cfg.cusum.bias = cfg.sensors + 0.1;
  cfg.cusum.threshold = 0.0;
  cfg.cusign_limit = 0;
  if (node == nullptr) return;
  const json& d = expect_object(*node, "detector");
  reject_unknown(d, "detector",
                 {"alpha", "psi_des_M", "ell", "z", "beta", "cusum", "cusign", "warmup", "tau_d"});
  const std::string w = "detector";
  read_opt(d, w, "alpha", cfg.alpha, get_number);
  read_opt(d, w, "psi_des_M", cfg.psi_des, get_number);
  read_opt(d, w, "ell", cfg.ell, get_number);
  read_opt(d, w, "warmup", cfg.warmup, get_integer);
  if (child(d, "z") && child(d, "beta")) throw ConfigError("detector: give either z or beta, not both");
  read_opt(d, w, "z", cfg.z_score, get_number);
  if (const json* beta = child(d, "beta")) {
    const double b = get_number(*beta, "detector.beta");
    if (!(b > 0.0 && b < 1.0)) throw ConfigError("detector.beta must lie in (0, 1)");
    cfg.z_score = detect::z_score_from_beta(b);
  }
  if (const json* tau_d = child(d, "tau_d")) cfg.tau_d = get_number(*tau_d, "detector.tau_d");
  if (const json* c = child(d, "cusum")) {
    expect_object(*c, "detector.cusum");
    reject_unknown(*c, "detector.cusum", {"b", "tau", "rate"});
    read_opt(*c, "detector.cusum", "b", cfg.cusum.bias, get_number);
    read_opt(*c, "detector.cusum", "tau", cfg.cusum.threshold, get_number);
    read_opt(*c, "detector.cusum", "rate", cfg.cusum_rate, get_number);
    if (child(*c, "tau") && !(cfg.cusum.threshold > 0.0)) {
      throw ConfigError("detector.cusum.tau must be positive (omit it to calibrate)");
    }
  }
  if (const json* c = child(d, "cusign")) {
    expect_object(*c, "detector.cusign");
    reject_unknown(*c, "detector.cusign", {"T", "rate"});
    read_opt(*c, "detector.cusign", "T", cfg.cusign_limit, get_integer);
    read_opt(*c, "detector.cusign", "rate", cfg.cusign_rate, get_number);
    if (child(*c, "T") && cfg.cusign_limit < 1) {
      throw ConfigError("detector.cusign.T must be >= 1 (omit it to calibrate)");
    }
  }
}

void parse_attack(const json& a, const std::string& where, Scenario& s) {
  expect_object(a, where);
  reject_unknown(a, where, {"kind", "start", "end", "epsilon", "pattern", "seed"});
  redteam::AttackPlan plan;
  if (const json* kind = child(a, "kind")) {
    try {
      plan.kind = redteam::parse_attack_kind(get_string(*kind, where + ".kind"));
    } catch (const ConfigError& e) {
      throw ConfigError(where + ".kind: " + e.what());
    }
  } else {
    throw ConfigError(where + ".kind: missing");
  }
  read_opt(a, where, "start", plan.start, get_integer);
  read_opt(a, where, "end", plan.end, get_integer);
  read_opt(a, where, "epsilon", plan.epsilon, get_number);
  if (const json* p = child(a, "pattern")) {
    expect_object(*p, where + ".pattern");
    reject_unknown(*p, where + ".pattern", {"period"});
    read_opt(*p, where + ".pattern", "period", plan.pattern_period, get_integer);
  }
  std::optional<std::uint64_t> seed;
  if (const json* v = child(a, "seed")) seed = get_seed(*v, where + ".seed");
  if (plan.kind == redteam::AttackKind::kNone) return;
  s.attacks.push_back(plan);
  s.attack_seeds.push_back(seed);
}

void parse_sim(const json* node, Scenario& s) {
  if (node == nullptr) throw ConfigError("sim: missing (need at least sim.steps)");
  const json& sim = expect_object(*node, "sim");
  reject_unknown(sim, "sim", {"steps", "seed", "seeds", "x0", "calibration_samples"});
  if (!child(sim, "steps")) throw ConfigError("sim.steps: missing");
  read_opt(sim, "sim", "steps", s.steps, get_integer);
  read_opt(sim, "sim", "seed", s.seed, get_seed);
  read_opt(sim, "sim", "calibration_samples", s.calibration_samples, get_integer);
  if (const json* seeds = child(sim, "seeds")) {
    if (!seeds->is_array()) throw ConfigError("sim.seeds: expected an array");
    for (std::size_t i = 0; i < seeds->size(); ++i) {
      s.seeds.push_back(get_seed((*seeds)[i], "sim.seeds[" + std::to_string(i) + "]"));
    }
  }
  if (const json* x0 = child(sim, "x0")) s.initial_state = get_vector(*x0, "sim.x0");
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
}

}  // namespace

void Scenario::validate() const {
  model.validate();
  if (steps < 0) throw ConfigError("sim.steps must be >= 0");
  if (calibration_samples < 1000) throw ConfigError("sim.calibration_samples must be >= 1000");
  if (initial_state.size() != model.states()) {
    throw ConfigError("sim.x0: expected " + std::to_string(model.states()) + " entries");
  }
  if (controller.gain.rows() != model.inputs() || controller.gain.cols() != model.states()) {
    throw ConfigError("controller.K: expected " + std::to_string(model.inputs()) + "x" +
                      std::to_string(model.states()));
  }
  if (controller.reference.size() != model.states()) {
    throw ConfigError("controller.ref: expected " + std::to_string(model.states()) + " entries");
  }
  detect::DetectorConfig probe = detector;
  if (!(probe.cusum.threshold > 0.0)) probe.cusum.threshold = 1.0;
  if (probe.cusign_limit < 1) probe.cusign_limit = 1;
  probe.validate();
  if (probe.sensors != model.sensors()) throw ConfigError("detector: sensor count does not match plant.C");
  if (z_cap && !(*z_cap > 0.0)) throw ConfigError("redteam.z_cap must be positive");
  if (attack_seeds.size() != attacks.size()) throw ConfigError("attack: seed list out of sync");
  for (std::size_t i = 0; i < attacks.size(); ++i) {
    const auto& a = attacks[i];
    a.validate();
    if (a.end > steps) {
      throw ConfigError("attack[" + std::to_string(i) + "]: interval [" + std::to_string(a.start) + ", " +
                        std::to_string(a.end) + ") exceeds sim.steps = " + std::to_string(steps));
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (a.start < attacks[j].end && attacks[j].start < a.end) {
        throw ConfigError("attack[" + std::to_string(i) + "]: overlaps attack[" + std::to_string(j) + "]");
      }
    }
  }
}

Scenario parse_scenario(std::string_view text) {
  const json root = parse_json(text);
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown(root, "", {"name", "plant", "controller", "detector", "attack", "attacks", "redteam", "sim"});

  Scenario s;
  read_opt(root, "", "name", s.name, get_string);
  const PlantSection plant_section = parse_plant(child(root, "plant"));
  s.model = plant_section.model;
  s.model.validate();

  if (const json* c = child(root, "controller")) {
    expect_object(*c, "controller");
    reject_unknown(*c, "controller", {"K", "ref"});
    s.controller.gain = child(*c, "K") ? get_matrix((*c)["K"], "controller.K")
                        : plant_section.is_ugv ? plant::default_ugv_controller().gain
                                               : Eigen::MatrixXd::Zero(s.model.inputs(), s.model.states());
    s.controller.reference = child(*c, "ref") ? get_vector((*c)["ref"], "controller.ref")
                                              : Eigen::VectorXd::Zero(s.model.states());
  } else if (plant_section.is_ugv) {
    s.controller = plant::default_ugv_controller();
  } else {
    s.controller.gain = Eigen::MatrixXd::Zero(s.model.inputs(), s.model.states());
    s.controller.reference = Eigen::VectorXd::Zero(s.model.states());
  }

  s.detector.sensors = static_cast<int>(s.model.sensors());
  parse_detector(child(root, "detector"), s.detector);

  if (child(root, "attack") && child(root, "attacks")) {
    throw ConfigError("config: give either attack or attacks, not both");
  }
  if (const json* a = child(root, "attack")) parse_attack(*a, "attack", s);
  if (const json* list = child(root, "attacks")) {
    if (!list->is_array()) throw ConfigError("attacks: expected an array");
    for (std::size_t i = 0; i < list->size(); ++i) {
      parse_attack((*list)[i], "attacks[" + std::to_string(i) + "]", s);
    }
  }
  if (const json* r = child(root, "redteam")) {
    expect_object(*r, "redteam");
    reject_unknown(*r, "redteam", {"sampling", "z_cap"});
    if (const json* law = child(*r, "sampling")) {
      s.sampling = redteam::parse_sampling_law(get_string(*law, "redteam.sampling"));
    }
    if (const json* cap = child(*r, "z_cap")) s.z_cap = get_number(*cap, "redteam.z_cap");
  }

  s.initial_state = Eigen::VectorXd::Zero(s.model.states());
  parse_sim(child(root, "sim"), s);
  if (s.seeds.empty()) s.seeds.push_back(s.seed);
  s.validate();
  return s;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Scenario load_scenario(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_scenario(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

namespace {

constexpr std::array<std::string_view, 21> kSweepable = {
    "detector.alpha",   "detector.psi_des_M", "detector.ell",      "detector.z",
    "detector.beta",    "detector.warmup",    "detector.tau_d",    "detector.cusum.b",
    "detector.cusum.tau", "detector.cusum.rate", "detector.cusign.T", "detector.cusign.rate",
    "attack.epsilon",   "attack.start",       "attack.end",        "attack.pattern.period",
    "sim.steps",        "redteam.z_cap",     "plant.ugv.ts",
    "plant.ugv.m",      "plant.ugv.iz"};

bool integral_key(std::string_view key) {
  return key == "detector.warmup" || key == "detector.cusign.T" || key == "attack.start" ||
         key == "attack.end" || key == "attack.pattern.period" || key == "sim.steps";
}

}  // namespace

bool is_sweepable_key(std::string_view key) {
  return std::find(kSweepable.begin(), kSweepable.end(), key) != kSweepable.end();
}

std::string set_config_value(std::string_view text, std::string_view key, double value) {
  if (!is_sweepable_key(key)) throw ConfigError("sweep axis '" + std::string(key) + "' is not a sweepable key");
  json root = parse_json(text);
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  json* node = &root;
  std::string_view rest = key;
  while (true) {
    const auto dot = rest.find('.');
    const std::string part(rest.substr(0, dot));
    if (dot == std::string_view::npos) {
      if (integral_key(key)) {
        if (value != static_cast<double>(static_cast<std::int64_t>(value))) {
          throw ConfigError(std::string(key) + ": sweep value must be an integer");
        }
        (*node)[part] = static_cast<std::int64_t>(value);
      } else {
        (*node)[part] = value;
      }
      break;
    }
    json& next = (*node)[part];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) throw ConfigError(std::string(key) + ": '" + part + "' is not an object");
    node = &next;
    rest = rest.substr(dot + 1);
  }
  // z and beta are alternatives; the swept one wins.
  if (key == "detector.beta") root["detector"].erase("z");
  if (key == "detector.z") root["detector"].erase("beta");
  return root.dump();
}

}  // namespace serialmon
