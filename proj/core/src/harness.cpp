#include "serialmon/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <limits>
#include <thread>

#include <json.hpp>

#include "serialmon/errors.hpp"
#include "serialmon/rng.hpp"
#include "serialmon/trace.hpp"
#include "serialmon/vargamma.hpp"

namespace serialmon::harness {
namespace {

using detect::DetectorId;
using nlohmann::json;

std::vector<double> chi_square_samples(int sensors, std::int64_t samples, std::uint64_t seed) {
  NoiseSource rng(seed);
  std::vector<double> z(static_cast<std::size_t>(samples));
  for (auto& v : z) {
    double sum = 0.0;
    for (int i = 0; i < sensors; ++i) {
      const double n = rng.normal();
      sum += n * n;
    }
    v = sum;
  }
  return z;
}

double cusum_rate_on(std::span<const double> z, const detect::CusumParams& params) {
  detect::CusumDetector cusum(params);
  std::int64_t alarms = 0;
  for (double v : z) alarms += cusum.step(v) ? 1 : 0;
  return static_cast<double>(alarms) / static_cast<double>(z.size());
}

// Residual signs, `sensors` per step, row after row.
std::vector<signed char> residual_signs(const Eigen::MatrixXd& sigma_sqrt, std::int64_t samples,
                                        std::uint64_t seed) {
  NoiseSource rng(seed);
  const Eigen::Index s = sigma_sqrt.rows();
  std::vector<signed char> signs;
  signs.reserve(static_cast<std::size_t>(samples * s));
  for (std::int64_t k = 0; k < samples; ++k) {
    const Eigen::VectorXd r = sigma_sqrt * rng.normal_vector(s);
    for (Eigen::Index i = 0; i < s; ++i) signs.push_back(static_cast<signed char>(detect::sign_of(r(i))));
  }
  return signs;
}

double cusign_rate_on(std::span<const signed char> signs, Eigen::Index sensors, int limit) {
  std::vector<int> sums(static_cast<std::size_t>(sensors), 0);
  std::int64_t alarms = 0;
  const std::size_t steps = signs.size() / static_cast<std::size_t>(sensors);
  for (std::size_t k = 0; k < steps; ++k) {
    bool alarm = false;
    for (Eigen::Index i = 0; i < sensors; ++i) {
      int& acc = sums[static_cast<std::size_t>(i)];
      acc += signs[k * static_cast<std::size_t>(sensors) + static_cast<std::size_t>(i)];
      if (std::abs(acc) >= limit) {
        alarm = true;
        acc = 0;
      }
    }
    alarms += alarm ? 1 : 0;
  }
  return static_cast<double>(alarms) / static_cast<double>(steps);
}

json optional_json(const std::optional<std::int64_t>& v) { return v ? json(*v) : json(nullptr); }
json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json report_json(const CalibrationReport& r) {
  json j = {{"detector", r.detector},       {"target", r.target},
            {"achieved", r.achieved},       {"tolerance", r.tolerance},
            {"within_tolerance", r.within_tolerance}, {"samples", r.samples},
            {"iterations", r.iterations},   {"threshold", r.threshold}};
  if (r.detector == "cusum") j["bias"] = r.bias;
  if (!r.candidates.empty()) {
    json list = json::array();
    for (const auto& [t, rate] : r.candidates) list.push_back({{"T", t}, {"rate", rate}});
    j["candidates"] = list;
  }
  return j;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out + "\"";
}

struct PhaseAccumulator {
  std::array<std::int64_t, detect::kDetectorCount> updates{};
  std::array<std::int64_t, detect::kDetectorCount> alarms{};
  std::array<std::int64_t, detect::kDetectorCount> inside{};
  std::array<double, detect::kDetectorCount> rate_sum{};
};

}  // namespace

double cusum_alarm_rate(int sensors, const detect::CusumParams& params, std::int64_t samples,
                        std::uint64_t seed) {
  if (samples < 1) throw DomainError("cusum_alarm_rate: samples must be >= 1");
  const auto z = chi_square_samples(sensors, samples, seed);
  return cusum_rate_on(z, params);
}

double cusign_alarm_rate(const Eigen::MatrixXd& sigma_sqrt, int limit, std::int64_t samples,
                         std::uint64_t seed) {
  if (samples < 1) throw DomainError("cusign_alarm_rate: samples must be >= 1");
  if (limit < 1) throw DomainError("cusign_alarm_rate: limit must be >= 1");
  const auto signs = residual_signs(sigma_sqrt, samples, seed);
  return cusign_rate_on(signs, sigma_sqrt.rows(), limit);
}

std::string CalibrationReport::to_json() const { return report_json(*this).dump(2); }

CalibrationReport calibrate_cusum(int sensors, double bias, double target, std::int64_t samples,
                                  std::uint64_t seed, double tolerance) {
  if (!(target > 0.0 && target < 1.0)) throw DomainError("calibrate_cusum: target must lie in (0, 1)");
  if (!(bias > 0.0)) throw DomainError("calibrate_cusum: bias must be positive");
  if (samples < 1000) throw DomainError("calibrate_cusum: need at least 1000 samples");
  const auto z = chi_square_samples(sensors, samples, seed);
  auto rate = [&](double tau) { return cusum_rate_on(z, {bias, std::max(tau, 1e-12)}); };

  CalibrationReport report;
  report.detector = "cusum";
  report.target = target;
  report.tolerance = tolerance;
  report.samples = samples;
  report.bias = bias;

  double lo = 0.0;
  const double max_rate = rate(lo);
  if (max_rate < target - tolerance) {
    throw NumericError("calibrate_cusum: target " + std::to_string(target) +
                       " is unreachable; the largest rate (tau_c -> 0) is " + std::to_string(max_rate) +
                       " for b = " + std::to_string(bias));
  }
  double hi = 1.0;
  while (rate(hi) > target) {
    hi *= 2.0;
    if (hi > 1e6) throw NumericError("calibrate_cusum: could not bracket the target rate");
  }
  int iterations = 0;
  while (hi - lo > 1e-10 * std::max(1.0, hi) && iterations < 200) {
    const double mid = 0.5 * (lo + hi);
    if (rate(mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
    ++iterations;
  }
  const double rate_lo = rate(lo);
  const double rate_hi = rate(hi);
  const bool use_lo = std::abs(rate_lo - target) < std::abs(rate_hi - target) && lo > 0.0;
  report.threshold = use_lo ? lo : hi;
  report.achieved = use_lo ? rate_lo : rate_hi;
  report.iterations = iterations;
  report.within_tolerance = std::abs(report.achieved - target) <= tolerance;
  return report;
}

CalibrationReport calibrate_cusign(const Eigen::MatrixXd& sigma_sqrt, double target,
                                   std::int64_t samples, std::uint64_t seed, double tolerance,
                                   int max_limit) {
  if (!(target > 0.0 && target < 1.0)) throw DomainError("calibrate_cusign: target must lie in (0, 1)");
  if (samples < 1000) throw DomainError("calibrate_cusign: need at least 1000 samples");
  const auto signs = residual_signs(sigma_sqrt, samples, seed);
  CalibrationReport report;
  report.detector = "cusign";
  report.target = target;
  report.tolerance = tolerance;
  report.samples = samples;

  double best_gap = std::numeric_limits<double>::infinity();
  for (int limit = 1; limit <= max_limit; ++limit) {
    const double rate = cusign_rate_on(signs, sigma_sqrt.rows(), limit);
    report.candidates.emplace_back(limit, rate);
    ++report.iterations;
    if (limit == 1 && rate < target - tolerance) {
      throw NumericError("calibrate_cusign: target " + std::to_string(target) +
                         " is unreachable; T = 1 already gives " + std::to_string(rate));
    }
    const double gap = std::abs(rate - target);
    if (gap < best_gap) {
      best_gap = gap;
      report.threshold = limit;
      report.achieved = rate;
    }
    if (rate < target) break;  // rates only fall from here
  }
  report.within_tolerance = best_gap <= tolerance;
  return report;
}

CalibrationReport calibrate_bad_data(int sensors, double alpha) {
  CalibrationReport report;
  report.detector = "bd";
  report.target = alpha;
  report.achieved = alpha;
  report.within_tolerance = true;
  report.threshold = detect::chi_square_threshold(sensors, alpha);
  return report;
}

CalibratedScenario calibrate_scenario(const Scenario& scenario) {
  CalibratedScenario out{scenario, {}};
  auto& det = out.scenario.detector;
  const bool need_cusum = !(det.cusum.threshold > 0.0);
  const bool need_cusign = det.cusign_limit < 1;
  if (!need_cusum && !need_cusign) return out;

  const std::uint64_t master = split_seed(scenario.seed, SeedStream::kCalibration);
  if (need_cusum) {
    auto report = calibrate_cusum(det.sensors, det.cusum.bias, det.cusum_rate,
                                  scenario.calibration_samples, split_seed(master, 1));
    det.cusum.threshold = report.threshold;
    out.reports.push_back(std::move(report));
  }
  if (need_cusign) {
    const auto estimator = plant::solve_dare(scenario.model);
    auto report = calibrate_cusign(estimator.residual_cov_sqrt, det.cusign_rate,
                                   scenario.calibration_samples, split_seed(master, 2));
    det.cusign_limit = static_cast<int>(report.threshold);
    out.reports.push_back(std::move(report));
  }
  return out;
}

std::vector<Phase> scenario_phases(const Scenario& scenario) {
  std::vector<redteam::AttackPlan> plans = scenario.attacks;
  std::sort(plans.begin(), plans.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  std::vector<Phase> phases;
  auto add = [&](std::string label, std::int64_t begin, std::int64_t end) {
    if (end > begin) phases.push_back(Phase{std::move(label), begin, end, 0, {}});
  };
  std::int64_t cursor = 0;
  for (const auto& p : plans) {
    add("none", cursor, p.start);
    add(std::string(redteam::attack_kind_name(p.kind)), p.start, p.end);
    cursor = p.end;
  }
  add("none", cursor, scenario.steps);
  return phases;
}

RunSummary run_scenario(const Scenario& input, const RunOptions& options) {
  auto calibrated = calibrate_scenario(input);
  const Scenario& sc = calibrated.scenario;
  sc.validate();

  auto estimator = plant::solve_dare(sc.model);
  estimator.xhat = sc.initial_state;
  detect::DetectorBank bank(sc.detector, estimator.residual_cov_inv);
  plant::Plant plant(sc.model, estimator, sc.initial_state);
  NoiseSource plant_noise(split_seed(sc.seed, SeedStream::kPlantNoise));

  const int sensors = sc.detector.sensors;
  redteam::StealthSettings settings;
  settings.sigma_sqrt = estimator.residual_cov_sqrt;
  settings.z_cap = sc.z_cap ? *sc.z_cap : redteam::default_z_cap(sensors);
  settings.law = sc.sampling;
  std::vector<redteam::Attacker> attackers;
  const std::uint64_t attack_master = split_seed(sc.seed, SeedStream::kAttack);
  for (std::size_t i = 0; i < sc.attacks.size(); ++i) {
    const std::uint64_t seed = sc.attack_seeds[i] ? *sc.attack_seeds[i] : split_seed(attack_master, i);
    attackers.emplace_back(sc.attacks[i], seed, sc.model.C, settings);
  }

  RunSummary summary;
  summary.scenario = sc.name;
  summary.seed = sc.seed;
  summary.steps = sc.steps;
  summary.tau_z = bank.bad_data().threshold();
  summary.tau_d = bank.serial().threshold();
  summary.cusum = sc.detector.cusum;
  summary.cusign_limit = sc.detector.cusign_limit;
  summary.calibration = calibrated.reports;
  summary.phases = scenario_phases(sc);
  for (auto id : detect::kAllDetectors) {
    auto& d = summary.detectors[static_cast<std::size_t>(id)];
    d.bounds = bank.monitor(id).bounds();
    d.expected_rate = bank.monitor(id).expected_rate();
  }

  std::optional<TraceWriter> trace;
  if (options.trace) trace.emplace(*options.trace, sc.model.states());
  std::optional<PlotDataWriter> plot;
  if (options.plot_data) plot.emplace(*options.plot_data, bank, options.plot_stride);

  std::vector<PhaseAccumulator> acc(summary.phases.size());
  std::array<std::int64_t, detect::kDetectorCount> free_updates{};
  std::array<double, detect::kDetectorCount> free_rate_sum{};
  const Eigen::MatrixXd whitener = estimator.residual_cov_sqrt.inverse();
  std::vector<Eigen::VectorXd> white;
  std::vector<std::int64_t> white_k;

  std::size_t phase = 0;
  TraceRecord record;
  for (std::int64_t k = 0; k < sc.steps; ++k) {
    while (phase + 1 < summary.phases.size() && k >= summary.phases[phase].end) ++phase;

    const Eigen::VectorXd u = sc.controller.input(plant.estimate());
    const plant::NoiseDraw noise = plant.draw_noise(plant_noise);
    Eigen::VectorXd xi = Eigen::VectorXd::Zero(sensors);
    std::optional<redteam::Attacker::Output> attack;
    for (auto& attacker : attackers) {
      if (!attacker.plan().active(k)) continue;
      attack = attacker.next(k, plant.estimation_error(), noise.measurement, bank);
      xi = attack->xi;
      break;
    }
    const plant::SimStep sim = plant.advance(u, xi, noise);
    const detect::BankOutput out = bank.step(sim.r, k);

    auto& pa = acc[phase];
    if (attack) {
      ++summary.attacked_steps;
      if (attack->feasibility_violation) {
        ++summary.feasibility_violations;
        ++summary.phases[phase].feasibility_violations;
      }
    } else {
      white.push_back(whitener * sim.r);
      white_k.push_back(k);
    }
    for (std::size_t i = 0; i < detect::kDetectorCount; ++i) {
      const auto& v = out.verdicts[i];
      if (!v.updated) continue;
      auto& stats = summary.phases[phase].detectors[i];
      if (pa.updates[i] == 0) {
        stats.min_rate = stats.max_rate = v.rate;
      } else {
        stats.min_rate = std::min(stats.min_rate, v.rate);
        stats.max_rate = std::max(stats.max_rate, v.rate);
      }
      ++pa.updates[i];
      pa.alarms[i] += v.alarm ? 1 : 0;
      pa.inside[i] += v.in_bounds ? 1 : 0;
      pa.rate_sum[i] += v.rate;
      if (!v.in_bounds && !stats.first_exit) stats.first_exit = k;
      if (!attack) {
        ++free_updates[i];
        free_rate_sum[i] += v.rate;
      }
    }

    if (trace || plot || options.observer) {
      if (options.observer) options.observer(StepView{sim, out, attack ? &*attack : nullptr});
      if (trace || plot) {
        record.k = k;
        record.z = out.z;
        record.d = out.d;
        record.has_difference = out.has_difference;
        for (std::size_t i = 0; i < detect::kDetectorCount; ++i) {
          record.detectors[i] = {out.verdicts[i].alarm, out.verdicts[i].rate, out.verdicts[i].detected};
        }
        record.x = sim.x;
        record.xhat = sim.xhat;
        record.xi_norm = sim.xi.norm();
        record.feasibility_violation = attack && attack->feasibility_violation;
        if (trace) trace->write(record);
        if (plot) plot->write(record);
      }
    }
  }

  for (std::size_t p = 0; p < summary.phases.size(); ++p) {
    for (std::size_t i = 0; i < detect::kDetectorCount; ++i) {
      auto& stats = summary.phases[p].detectors[i];
      const auto n = acc[p].updates[i];
      if (n == 0) continue;
      stats.mean_rate = acc[p].rate_sum[i] / static_cast<double>(n);
      stats.alarm_fraction = static_cast<double>(acc[p].alarms[i]) / static_cast<double>(n);
      stats.in_bounds_fraction = static_cast<double>(acc[p].inside[i]) / static_cast<double>(n);
    }
  }
  for (auto id : detect::kAllDetectors) {
    const auto i = static_cast<std::size_t>(id);
    summary.detectors[i].detection_time = bank.monitor(id).detection_time();
    if (free_updates[i] > 0) {
      summary.detectors[i].attack_free_mean_rate = free_rate_sum[i] / static_cast<double>(free_updates[i]);
    }
  }

  // Lag-1 autocorrelation over consecutive attack-free steps.
  if (white.size() >= 3) {
    const Eigen::Index s = white.front().size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(s);
    for (const auto& w : white) mean += w;
    mean /= static_cast<double>(white.size());
    Eigen::VectorXd num = Eigen::VectorXd::Zero(s);
    Eigen::VectorXd den = Eigen::VectorXd::Zero(s);
    for (std::size_t t = 0; t < white.size(); ++t) {
      const Eigen::VectorXd c = white[t] - mean;
      den += c.cwiseProduct(c);
      if (t + 1 < white.size() && white_k[t + 1] == white_k[t] + 1) {
        num += c.cwiseProduct(white[t + 1] - mean);
      }
    }
    for (Eigen::Index i = 0; i < s; ++i) {
      const double rho = den(i) > 0.0 ? num(i) / den(i) : 0.0;
      summary.residual_lag1_autocorrelation.push_back(rho);
      if (white.size() >= 100 && std::abs(rho) > 0.05) summary.residual_whiteness_warning = true;
    }
  }
  return summary;
}

std::string RunSummary::to_json() const {
  json j;
  j["trace_schema"] = kTraceSchemaVersion;
  j["scenario"] = scenario;
  j["seed"] = seed;
  j["steps"] = steps;
  j["thresholds"] = {{"tau_z", tau_z},
                     {"tau_d", tau_d},
                     {"cusum_b", cusum.bias},
                     {"cusum_tau", cusum.threshold},
                     {"cusign_T", cusign_limit}};
  json cal = json::array();
  for (const auto& r : calibration) cal.push_back(report_json(r));
  j["calibration"] = cal;
  json dets = json::object();
  for (auto id : detect::kAllDetectors) {
    const auto& d = detectors[static_cast<std::size_t>(id)];
    dets[std::string(detect::detector_name(id))] = {
        {"expected_rate", d.expected_rate},
        {"lower_bound", d.bounds.lower},
        {"upper_bound", d.bounds.upper},
        {"detected", d.detection_time.has_value()},
        {"detection_time", optional_json(d.detection_time)},
        {"attack_free_mean_rate", optional_json(d.attack_free_mean_rate)}};
  }
  j["detectors"] = dets;
  json ph = json::array();
  for (const auto& p : phases) {
    json pd = json::object();
    for (auto id : detect::kAllDetectors) {
      const auto& s = p.detectors[static_cast<std::size_t>(id)];
      pd[std::string(detect::detector_name(id))] = {{"min_rate", s.min_rate},
                                                    {"max_rate", s.max_rate},
                                                    {"mean_rate", s.mean_rate},
                                                    {"alarm_fraction", s.alarm_fraction},
                                                    {"in_bounds_fraction", s.in_bounds_fraction},
                                                    {"first_exit", optional_json(s.first_exit)}};
    }
    ph.push_back({{"label", p.label},
                  {"begin", p.begin},
                  {"end", p.end},
                  {"feasibility_violations", p.feasibility_violations},
                  {"detectors", pd}});
  }
  j["phases"] = ph;
  j["attacked_steps"] = attacked_steps;
  j["feasibility_violations"] = feasibility_violations;
  j["residual_lag1_autocorrelation"] = residual_lag1_autocorrelation;
  j["residual_whiteness_warning"] = residual_whiteness_warning;
  return j.dump(2);
}

std::vector<SweepRow> sweep(std::string_view base_config, std::string_view axis,
                            std::span<const double> values, unsigned threads) {
  if (values.empty()) return {};
  const Scenario base = parse_scenario(base_config);
  if (!is_sweepable_key(axis)) throw ConfigError("sweep: '" + std::string(axis) + "' is not a sweepable key");

  std::vector<SweepRow> rows;
  for (double v : values) {
    for (auto seed : base.seeds) rows.push_back(SweepRow{v, seed, std::nullopt, {}});
  }
  const std::string text(base_config);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      auto& row = rows[i];
      try {
        Scenario sc = parse_scenario(set_config_value(text, axis, row.value));
        sc.seed = row.seed;
        row.summary = run_scenario(sc);
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(rows.size()));
  std::vector<std::future<void>> pool;
  for (unsigned t = 0; t < threads; ++t) pool.push_back(std::async(std::launch::async, worker));
  for (auto& f : pool) f.get();
  return rows;
}

void write_sweep_csv(std::ostream& out, std::string_view axis, std::span<const SweepRow> rows) {
  std::string line = "axis,value,seed,status,error";
  for (auto id : detect::kAllDetectors) {
    const std::string name(detect::detector_name(id));
    line += "," + name + "_detected," + name + "_detection_time," + name + "_mean_rate";
  }
  line += ",feasibility_violations\n";
  out << line;
  for (const auto& row : rows) {
    line.clear();
    line += axis;
    line += ',';
    append_number(line, row.value);
    line += ',' + std::to_string(row.seed);
    line += row.summary ? ",ok," : ",error," + csv_quote(row.error);
    for (auto id : detect::kAllDetectors) {
      if (!row.summary) {
        line += ",,,";
        continue;
      }
      const auto& d = (*row.summary)[id];
      line += d.detection_time ? ",1," + std::to_string(*d.detection_time) : ",0,";
      line += ',';
      if (d.attack_free_mean_rate) append_number(line, *d.attack_free_mean_rate);
    }
    line += ',';
    if (row.summary) line += std::to_string(row.summary->feasibility_violations);
    line += '\n';
    out << line;
  }
}

}  // namespace serialmon::harness
