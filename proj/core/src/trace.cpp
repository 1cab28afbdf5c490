#include "serialmon/trace.hpp"

#include <charconv>
#include <cmath>

#include "serialmon/errors.hpp"

namespace serialmon {

std::vector<std::string> trace_columns(Eigen::Index states) {
  std::vector<std::string> cols = {"k", "z", "d"};
  for (auto id : detect::kAllDetectors) {
    const std::string name(detect::detector_name(id));
    cols.push_back(name + "_alarm");
    cols.push_back(name + "_rate");
    cols.push_back(name + "_detected");
  }
  for (Eigen::Index i = 0; i < states; ++i) cols.push_back("x" + std::to_string(i));
  for (Eigen::Index i = 0; i < states; ++i) cols.push_back("xhat" + std::to_string(i));
  cols.push_back("xi_norm");
  cols.push_back("feasibility_violation");
  return cols;
}

void append_number(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

namespace {

void append_int(std::string& out, std::int64_t v) {
  char buf[24];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

void write_header(std::ostream& out, const std::vector<std::string>& cols) {
  std::string line;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) line += ',';
    line += cols[i];
  }
  line += '\n';
  out << line;
}

}  // namespace

TraceWriter::TraceWriter(std::ostream& out, Eigen::Index states) : out_(out), states_(states) {
  write_header(out_, trace_columns(states_));
}

void TraceWriter::write(const TraceRecord& r) {
  if (r.x.size() != states_ || r.xhat.size() != states_) {
    throw DomainError("TraceWriter: state dimension changed mid-trace");
  }
  line_.clear();
  append_int(line_, r.k);
  line_ += ',';
  append_number(line_, r.z);
  line_ += ',';
  if (r.has_difference) append_number(line_, r.d);
  for (const auto& det : r.detectors) {
    line_ += det.alarm ? ",1," : ",0,";
    append_number(line_, det.rate);
    line_ += det.detected ? ",1" : ",0";
  }
  for (Eigen::Index i = 0; i < states_; ++i) {
    line_ += ',';
    append_number(line_, r.x(i));
  }
  for (Eigen::Index i = 0; i < states_; ++i) {
    line_ += ',';
    append_number(line_, r.xhat(i));
  }
  line_ += ',';
  append_number(line_, r.xi_norm);
  line_ += r.feasibility_violation ? ",1\n" : ",0\n";
  out_ << line_;
}

PlotDataWriter::PlotDataWriter(std::ostream& out, const detect::DetectorBank& bank, std::int64_t stride)
    : out_(out), stride_(stride) {
  if (stride_ < 1) throw DomainError("PlotDataWriter: stride must be >= 1");
  std::vector<std::string> cols = {"k", "z", "d"};
  for (auto id : detect::kAllDetectors) {
    bounds_[static_cast<std::size_t>(id)] = bank.monitor(id).bounds();
    const std::string name(detect::detector_name(id));
    cols.push_back(name + "_rate");
    cols.push_back(name + "_lower");
    cols.push_back(name + "_upper");
  }
  write_header(out_, cols);
}

void PlotDataWriter::write(const TraceRecord& r) {
  if (r.k % stride_ != 0) return;
  line_.clear();
  append_int(line_, r.k);
  line_ += ',';
  append_number(line_, r.z);
  line_ += ',';
  if (r.has_difference) append_number(line_, r.d);
  for (std::size_t i = 0; i < r.detectors.size(); ++i) {
    line_ += ',';
    append_number(line_, r.detectors[i].rate);
    line_ += ',';
    append_number(line_, bounds_[i].lower);
    line_ += ',';
    append_number(line_, bounds_[i].upper);
  }
  line_ += '\n';
  out_ << line_;
}

}  // namespace serialmon
