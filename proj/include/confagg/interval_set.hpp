#pragma once

#include <limits>
#include <vector>

#include <json.hpp>

namespace confagg {

// One real interval with individually open or closed endpoints. Infinite
// endpoints are always open. Empty intervals are never stored inside an
// IntervalSet; a degenerate [a,a] point is representable here but dropped by
// IntervalSet normalization (it has Lebesgue measure zero).
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_open = true;
  bool hi_open = true;

  bool empty() const {
    if (lo > hi) return true;
    if (lo == hi) return lo_open || hi_open;
    return false;
  }
  bool contains(double y) const {
    if (y < lo || y > hi) return false;
    if (y == lo && lo_open) return false;
    if (y == hi && hi_open) return false;
    return true;
  }
  double length() const { return hi - lo; }
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

// Finite union of disjoint, non-adjacent intervals, sorted by lower endpoint.
// Values are immutable after construction; all operations are pure.
class IntervalSet {
 public:
  IntervalSet() = default;
  // Normalizes: drops empty and degenerate parts, sorts, merges every pair of
  // parts that overlap or touch without leaving a one-point gap.
  explicit IntervalSet(std::vector<Interval> parts);

  static IntervalSet whole_line();

  const std::vector<Interval>& parts() const { return parts_; }
  bool empty() const { return parts_.empty(); }

  bool contains(double y) const;
  // Sum of part lengths; +infinity as soon as any endpoint is infinite.
  double measure() const;
  bool unbounded() const;

  nlohmann::json to_json() const;
  static IntervalSet from_json(const nlohmann::json& j);

  friend bool operator==(const IntervalSet&, const IntervalSet&);

 private:
  std::vector<Interval> parts_;
};

IntervalSet union_of(const IntervalSet& a, const IntervalSet& b);

}  // namespace confagg
