#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "serialmon/detect.hpp"

namespace serialmon {

/// Bumped whenever the trace column layout changes.
inline constexpr int kTraceSchemaVersion = 1;

struct DetectorSample {
  bool alarm = false;
  double rate = 0.0;
  bool detected = false;
};

/// One simulation step as written to the trace.
struct TraceRecord {
  std::int64_t k = 0;
  double z = 0.0;
  double d = 0.0;
  bool has_difference = false;
  std::array<DetectorSample, detect::kDetectorCount> detectors{};
  Eigen::VectorXd x;
  Eigen::VectorXd xhat;
  double xi_norm = 0.0;
  bool feasibility_violation = false;
};

/// Column names in file order for a plant with `states` states:
/// k, z, d, then {alarm, rate, detected} per detector, x0.., xhat0.., xi_norm,
/// feasibility_violation. d is empty on steps without a previous z.
std::vector<std::string> trace_columns(Eigen::Index states);

/// Shortest round-trip decimal text of `v` (locale independent).
void append_number(std::string& out, double v);

/// CSV trace writer with one header row.
class TraceWriter {
 public:
  TraceWriter(std::ostream& out, Eigen::Index states);
  void write(const TraceRecord& record);

 private:
  std::ostream& out_;
  Eigen::Index states_;
  std::string line_;
};

/// Downsampled rate series with the detection bounds, for plotting.
class PlotDataWriter {
 public:
  PlotDataWriter(std::ostream& out, const detect::DetectorBank& bank, std::int64_t stride);
  void write(const TraceRecord& record);

 private:
  std::ostream& out_;
  std::array<detect::RateBounds, detect::kDetectorCount> bounds_{};
  std::int64_t stride_;
  std::string line_;
};

}  // namespace serialmon
