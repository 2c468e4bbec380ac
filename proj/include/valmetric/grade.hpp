#pragma once

// Four-level model quality grading of a rating on [0, 1].

#include <array>
#include <string>

#include "valmetric/error.hpp"

namespace valmetric {

struct Grade {
  int rank;           ///< 1 (best) .. 4
  std::string label;  ///< Excellent / Good / Fair / Poor
  friend bool operator==(const Grade&, const Grade&) = default;
};

/// Band thresholds, ascending: Poor <= t[0] < Fair <= t[1] < Good <= t[2] < Excellent.
struct GradeTable {
  std::array<double, 3> thresholds{0.58, 0.8, 0.94};
  std::array<std::string, 4> labels{"Excellent", "Good", "Fair", "Poor"};

  bool valid() const {
    return 0.0 < thresholds[0] && thresholds[0] < thresholds[1] && thresholds[1] < thresholds[2] &&
           thresholds[2] < 1.0;
  }
};

inline Grade grade(double rating, const GradeTable& table = {}) {
  if (!(rating >= 0.0 && rating <= 1.0))
    fail(ErrorKind::OutOfRange, "rating " + std::to_string(rating) + " outside [0,1]");
  const auto& th = table.thresholds;
  if (rating > th[2]) return {1, table.labels[0]};
  if (rating > th[1]) return {2, table.labels[1]};
  if (rating > th[0]) return {3, table.labels[2]};
  return {4, table.labels[3]};
}

}  // namespace valmetric
