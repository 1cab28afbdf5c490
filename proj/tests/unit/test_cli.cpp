#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(SERIALMON_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("serialmon_cli_" + std::to_string(::getpid())) / name;
  fs::create_directories(dir);
  return dir;
}

std::string read(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kSmall = R"({"detector": {"cusum": {"tau": 1.23}, "cusign": {"T": 5}}, "sim": {"steps": 300, "seed": 4}})";

}  // namespace

TEST(Cli, SimulateWritesOutputs) {
  const auto dir = scratch("simulate");
  write(dir / "s.json", kSmall);
  ASSERT_EQ(run("simulate --config " + (dir / "s.json").string() + " --out " + (dir / "out").string() +
                " --emit-plot-data --plot-stride 10"),
            0);
  EXPECT_TRUE(fs::exists(dir / "out" / "trace.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "plot_data.csv"));
  EXPECT_NE(read(dir / "out" / "summary.json").find("\"trace_schema\""), std::string::npos);
}

TEST(Cli, DistTable) {
  const auto dir = scratch("dist");
  ASSERT_EQ(run("dist --s 2 --grid -5:5:11 --out " + (dir / "d.csv").string()), 0);
  const auto text = read(dir / "d.csv");
  EXPECT_EQ(text.rfind("x,pdf,cdf\n", 0), 0u);
  const auto row = text.find("\n0,");
  ASSERT_NE(row, std::string::npos);
  const double pdf0 = std::stod(text.substr(row + 3));
  EXPECT_NEAR(pdf0, 0.25, 1e-12);
}

TEST(Cli, CalibrateAndSweep) {
  const auto dir = scratch("sweep");
  EXPECT_EQ(run("calibrate --detector bd --target 0.2"), 0);
  EXPECT_EQ(run("calibrate --detector cusum --target 0.2 --samples 20000"), 0);
  write(dir / "s.json", kSmall);
  ASSERT_EQ(run("sweep --config " + (dir / "s.json").string() + " --axis detector.ell --values 50,100 --out " +
                (dir / "sw.csv").string()),
            0);
  const auto text = read(dir / "sw.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("errors");
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("simulate --config /nonexistent.json --out x"), 1);
  write(dir / "bad.json", R"({"sim": {"steps": 10}, "detector": {"ell": 2}})");
  EXPECT_EQ(run("simulate --config " + (dir / "bad.json").string() + " --out " + (dir / "o").string()), 1);
  EXPECT_EQ(run("dist --s 2 --grid 1:2"), 1);
  EXPECT_EQ(run("sweep --config " + (dir / "bad.json").string() + " --axis nope --values 1"), 1);
  EXPECT_EQ(run("calibrate --detector cusum --target 0.99 --samples 5000"), 2);
  write(dir / "ok.json", kSmall);
  EXPECT_EQ(run("sweep --config " + (dir / "ok.json").string() + " --axis detector.ell --values 5"), 2);
}
