#include "confagg/interval_set.hpp"

#include <algorithm>
#include <cmath>

namespace confagg {

namespace {

// Two normalized intervals with a.lo <= b.lo can be merged unless there is a
// genuine gap between them. Touching endpoints leave the single point {a.hi}
// uncovered only when both sides are open there.
bool mergeable(const Interval& a, const Interval& b) {
  if (b.lo < a.hi) return true;
  if (b.lo == a.hi) return !(a.hi_open && b.lo_open);
  return false;
}

}  // namespace

IntervalSet::IntervalSet(std::vector<Interval> parts) {
  std::erase_if(parts, [](const Interval& iv) { return iv.empty() || iv.lo == iv.hi; });
  std::sort(parts.begin(), parts.end(), [](const Interval& a, const Interval& b) {
    if (a.lo != b.lo) return a.lo < b.lo;
    return !a.lo_open && b.lo_open;  // closed endpoint starts first
  });
  for (auto& iv : parts) {
    if (std::isinf(iv.lo)) iv.lo_open = true;
    if (std::isinf(iv.hi)) iv.hi_open = true;
    if (!parts_.empty() && mergeable(parts_.back(), iv)) {
      Interval& prev = parts_.back();
      if (iv.hi > prev.hi) {
        prev.hi = iv.hi;
        prev.hi_open = iv.hi_open;
      } else if (iv.hi == prev.hi && !iv.hi_open) {
        prev.hi_open = false;
      }
    } else {
      parts_.push_back(iv);
    }
  }
}

IntervalSet IntervalSet::whole_line() {
  return IntervalSet({Interval{kNegInf, kPosInf, true, true}});
}

bool IntervalSet::contains(double y) const {
  // First part whose lower endpoint is beyond y; y can only belong to the
  // part preceding it.
  auto it = std::partition_point(parts_.begin(), parts_.end(),
                                 [y](const Interval& iv) { return iv.lo <= y; });
  if (it == parts_.begin()) return false;
  return std::prev(it)->contains(y);
}

double IntervalSet::measure() const {
  double total = 0.0;
  for (const auto& iv : parts_) total += iv.length();
  return total;
}

bool IntervalSet::unbounded() const {
  return !parts_.empty() && (std::isinf(parts_.front().lo) || std::isinf(parts_.back().hi));
}

IntervalSet union_of(const IntervalSet& a, const IntervalSet& b) {
  std::vector<Interval> all = a.parts();
  all.insert(all.end(), b.parts().begin(), b.parts().end());
  return IntervalSet(std::move(all));
}

bool operator==(const IntervalSet& a, const IntervalSet& b) {
  if (a.parts_.size() != b.parts_.size()) return false;
  for (std::size_t i = 0; i < a.parts_.size(); ++i) {
    const Interval &x = a.parts_[i], &y = b.parts_[i];
    if (x.lo != y.lo || x.hi != y.hi || x.lo_open != y.lo_open || x.hi_open != y.hi_open)
      return false;
  }
  return true;
}

namespace {

nlohmann::json endpoint_to_json(double v) {
  if (v == kNegInf) return "-inf";
  if (v == kPosInf) return "inf";
  return v;
}

double endpoint_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "-inf") return kNegInf;
    if (s == "inf") return kPosInf;
    throw nlohmann::json::type_error::create(302, "bad interval endpoint \"" + s + "\"", &j);
  }
  return j.get<double>();
}

}  // namespace

nlohmann::json IntervalSet::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& iv : parts_)
    out.push_back({endpoint_to_json(iv.lo), endpoint_to_json(iv.hi), iv.lo_open, iv.hi_open});
  return out;
}

IntervalSet IntervalSet::from_json(const nlohmann::json& j) {
  std::vector<Interval> parts;
  for (const auto& rec : j)
    parts.push_back(Interval{endpoint_from_json(rec.at(0)), endpoint_from_json(rec.at(1)),
                             rec.at(2).get<bool>(), rec.at(3).get<bool>()});
  return IntervalSet(std::move(parts));
}

}  // namespace confagg
