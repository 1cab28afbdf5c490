#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "serialmon/config.hpp"
#include "serialmon/errors.hpp"
#include "serialmon/harness.hpp"
#include "serialmon/plant.hpp"
#include "serialmon/rng.hpp"
#include "serialmon/trace.hpp"
#include "serialmon/vargamma.hpp"

namespace fs = std::filesystem;
using namespace serialmon;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumeric = 2;

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

double parse_double(const std::string& text, const std::string& what) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw ConfigError(what + ": '" + text + "' is not a number");
  return v;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size() && !text.empty()) {
    const auto comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!item.empty()) out.push_back(parse_double(item, "--values"));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

struct Grid {
  double lo;
  double hi;
  int n;
};

Grid parse_grid(const std::string& text) {
  const auto a = text.find(':');
  const auto b = a == std::string::npos ? std::string::npos : text.find(':', a + 1);
  if (b == std::string::npos) throw ConfigError("--grid: expected lo:hi:n, got '" + text + "'");
  Grid g{parse_double(text.substr(0, a), "--grid lo"), parse_double(text.substr(a + 1, b - a - 1), "--grid hi"),
         0};
  const std::string n = text.substr(b + 1);
  const auto res = std::from_chars(n.data(), n.data() + n.size(), g.n);
  if (res.ec != std::errc() || res.ptr != n.data() + n.size() || g.n < 1) {
    throw ConfigError("--grid: n must be a positive integer");
  }
  if (!(g.hi >= g.lo)) throw ConfigError("--grid: need lo <= hi");
  return g;
}

int run_simulate(const std::string& config, const fs::path& out_dir, bool plot, std::int64_t stride) {
  const Scenario scenario = load_scenario(config);
  fs::create_directories(out_dir);
  std::ofstream trace = open_output(out_dir / "trace.csv");
  std::ofstream plot_file;
  harness::RunOptions options;
  options.trace = &trace;
  if (plot) {
    plot_file = open_output(out_dir / "plot_data.csv");
    options.plot_data = &plot_file;
    options.plot_stride = stride;
  }
  const auto summary = harness::run_scenario(scenario, options);
  open_output(out_dir / "summary.json") << summary.to_json() << '\n';
  std::cout << "wrote " << (out_dir / "trace.csv").string() << " and " << (out_dir / "summary.json").string()
            << '\n';
  for (auto id : detect::kAllDetectors) {
    const auto& d = summary[id];
    std::cout << "  " << detect::detector_name(id) << ": "
              << (d.detection_time ? "detected at k=" + std::to_string(*d.detection_time) : "not detected")
              << '\n';
  }
  return 0;
}

int run_calibrate(const std::string& detector, double target, const std::string& config,
                  std::int64_t samples, std::uint64_t seed) {
  Scenario scenario = config.empty() ? parse_scenario(R"({"sim": {"steps": 0}})") : load_scenario(config);
  const int sensors = scenario.detector.sensors;
  harness::CalibrationReport report;
  if (detector == "bd") {
    report = harness::calibrate_bad_data(sensors, target);
  } else if (detector == "cusum") {
    report = harness::calibrate_cusum(sensors, scenario.detector.cusum.bias, target, samples, seed);
  } else {
    const auto estimator = plant::solve_dare(scenario.model);
    report = harness::calibrate_cusign(estimator.residual_cov_sqrt, target, samples, seed);
  }
  std::cout << report.to_json() << '\n';
  return 0;
}

int run_dist(int s, const std::string& grid_text, const std::string& out_path) {
  const Grid grid = parse_grid(grid_text);
  const auto params = vargamma::vg_from_sensor_count(s);
  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_path.empty()) {
    file = open_output(out_path);
    out = &file;
  }
  std::string line = "x,pdf,cdf\n";
  for (int i = 0; i < grid.n; ++i) {
    const double x = grid.n == 1 ? grid.lo : grid.lo + (grid.hi - grid.lo) * i / (grid.n - 1);
    append_number(line, x);
    line += ',';
    append_number(line, vargamma::vg_pdf(params, x));
    line += ',';
    append_number(line, vargamma::vg_cdf(params, x));
    line += '\n';
  }
  *out << line;
  return 0;
}

int run_sweep(const std::string& config, const std::string& axis, const std::string& values,
              const std::string& out_path, unsigned threads) {
  const std::string text = read_text_file(config);
  const auto list = parse_list(values);
  const auto rows = harness::sweep(text, axis, list, threads);
  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_path.empty()) {
    file = open_output(out_path);
    out = &file;
  }
  harness::write_sweep_csv(*out, axis, rows);
  int failures = 0;
  for (const auto& row : rows) {
    if (!row.error.empty()) {
      ++failures;
      std::cerr << "run value=" << row.value << " seed=" << row.seed << " failed: " << row.error << '\n';
    }
  }
  return failures == 0 ? 0 : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serial test-measure monitoring of a Kalman-filtered plant under sensor attacks"};
  app.require_subcommand(1);

  std::string config;
  std::string out_dir;
  bool emit_plot = false;
  std::int64_t plot_stride = 50;
  auto* simulate = app.add_subcommand("simulate", "Run a scenario and write trace.csv and summary.json");
  simulate->add_option("--config", config, "Scenario file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", out_dir, "Output directory")->required();
  simulate->add_flag("--emit-plot-data", emit_plot, "Also write downsampled plot_data.csv");
  simulate->add_option("--plot-stride", plot_stride, "Keep every n-th step in plot_data.csv")
      ->check(CLI::PositiveNumber);

  std::string detector;
  double target = 0.0;
  std::string cal_config;
  std::int64_t samples = 1'000'000;
  std::uint64_t seed = 1;
  auto* calibrate = app.add_subcommand("calibrate", "Calibrate a detector threshold to an alarm rate");
  calibrate->add_option("--detector", detector, "bd, cusum or cusign")
      ->required()
      ->check(CLI::IsMember({"bd", "cusum", "cusign"}));
  calibrate->add_option("--target", target, "Target alarm rate in (0, 1)")->required()->check(CLI::Range(0.0, 1.0));
  calibrate->add_option("--config", cal_config, "Scenario file providing the plant (default UGV)")
      ->check(CLI::ExistingFile);
  calibrate->add_option("--samples", samples, "Monte Carlo samples")->check(CLI::Range(1000, 100'000'000));
  calibrate->add_option("--seed", seed, "Monte Carlo seed");

  int sensors = 2;
  std::string grid;
  std::string dist_out;
  auto* dist = app.add_subcommand("dist", "Tabulate the attack-free law of z_k - z_{k-1} as x,pdf,cdf");
  dist->add_option("--s", sensors, "Number of sensors")->required()->check(CLI::Range(2, 1000));
  dist->add_option("--grid", grid, "lo:hi:n")->required();
  dist->add_option("--out", dist_out, "CSV file (default stdout)");

  std::string sweep_config;
  std::string axis;
  std::string values;
  std::string sweep_out;
  unsigned threads = 0;
  auto* sweep = app.add_subcommand("sweep", "Run a scenario over values of one config key");
  sweep->add_option("--config", sweep_config, "Base scenario file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--axis", axis, "Dotted config key, e.g. detector.ell")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_option("--out", sweep_out, "CSV file (default stdout)");
  sweep->add_option("--threads", threads, "Worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*simulate) return run_simulate(config, out_dir, emit_plot, plot_stride);
    if (*calibrate) return run_calibrate(detector, target, cal_config, samples, seed);
    if (*dist) return run_dist(sensors, grid, dist_out);
    if (*sweep) return run_sweep(sweep_config, axis, values, sweep_out, threads);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  }
  return 0;
}
