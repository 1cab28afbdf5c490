#pragma once

#include <vector>

#include "serialmon/rng.hpp"

namespace serialmon::redteam {

/// Finite union of closed intervals on the real line.
class FeasibleSet {
 public:
  struct Interval {
    double lo;
    double hi;
  };

  FeasibleSet() = default;
  /// [lo, hi]; empty when hi < lo.
  static FeasibleSet range(double lo, double hi);

  [[nodiscard]] FeasibleSet intersect(const FeasibleSet& other) const;
  [[nodiscard]] FeasibleSet unite(const FeasibleSet& other) const;

  [[nodiscard]] bool empty() const { return intervals_.empty(); }
  [[nodiscard]] double measure() const;
  [[nodiscard]] bool contains(double x) const;
  [[nodiscard]] const std::vector<Interval>& intervals() const { return intervals_; }

  /// Uniform draw weighted by length; degenerate sets pick one of their points.
  double sample(NoiseSource& rng) const;

 private:
  void normalize();
  std::vector<Interval> intervals_;
};

}  // namespace serialmon::redteam
