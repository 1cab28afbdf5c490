#include "serialmon/feasible_set.hpp"

#include <algorithm>

#include "serialmon/errors.hpp"

namespace serialmon::redteam {

FeasibleSet FeasibleSet::range(double lo, double hi) {
  FeasibleSet set;
  if (hi >= lo) set.intervals_.push_back({lo, hi});
  return set;
}

void FeasibleSet::normalize() {
  std::sort(intervals_.begin(), intervals_.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> merged;
  for (const auto& iv : intervals_) {
    if (!merged.empty() && iv.lo <= merged.back().hi) {
      merged.back().hi = std::max(merged.back().hi, iv.hi);
    } else {
      merged.push_back(iv);
    }
  }
  intervals_ = std::move(merged);
}

FeasibleSet FeasibleSet::intersect(const FeasibleSet& other) const {
  FeasibleSet out;
  for (const auto& a : intervals_) {
    for (const auto& b : other.intervals_) {
      const double lo = std::max(a.lo, b.lo);
      const double hi = std::min(a.hi, b.hi);
      if (hi >= lo) out.intervals_.push_back({lo, hi});
    }
  }
  out.normalize();
  return out;
}

FeasibleSet FeasibleSet::unite(const FeasibleSet& other) const {
  FeasibleSet out = *this;
  out.intervals_.insert(out.intervals_.end(), other.intervals_.begin(), other.intervals_.end());
  out.normalize();
  return out;
}

double FeasibleSet::measure() const {
  double total = 0.0;
  for (const auto& iv : intervals_) total += iv.hi - iv.lo;
  return total;
}

bool FeasibleSet::contains(double x) const {
  return std::any_of(intervals_.begin(), intervals_.end(),
                     [x](const Interval& iv) { return x >= iv.lo && x <= iv.hi; });
}

double FeasibleSet::sample(NoiseSource& rng) const {
  if (intervals_.empty()) throw NumericError("FeasibleSet::sample: empty set");
  const double total = measure();
  if (total <= 0.0) {
    const auto pick = static_cast<std::size_t>(rng.uniform() * static_cast<double>(intervals_.size()));
    return intervals_[std::min(pick, intervals_.size() - 1)].lo;
  }
  double target = rng.uniform() * total;
  for (const auto& iv : intervals_) {
    const double length = iv.hi - iv.lo;
    if (target <= length) return std::min(iv.hi, iv.lo + target);
    target -= length;
  }
  return intervals_.back().hi;
}

}  // namespace serialmon::redteam
