#pragma once

// Dynamic time warping with a Sakoe-Chiba band and L1 local cost.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace valmetric {

struct DtwResult {
  double cost = 0.0;
  /// Index pairs (i into x, j into y) from (0,0) to (n-1, m-1).
  std::vector<std::pair<std::size_t, std::size_t>> path;
};

/// Minimum summed |x_i - y_j| over monotone, continuous paths with steps
/// (1,0), (0,1), (1,1) and |i - j| <= window. For unequal lengths the band
/// is widened to |n - m| so the end cell stays reachable.
inline DtwResult dtw_align(std::span<const double> x, std::span<const double> y, std::size_t window) {
  const std::size_t n = x.size();
  const std::size_t m = y.size();
  assert(n > 0 && m > 0);
  const std::size_t diff = n > m ? n - m : m - n;
  const std::size_t w = std::max(window, diff);
  constexpr double inf = std::numeric_limits<double>::infinity();

  // Row i stores columns [lo(i), hi(i)] at offset j - lo(i).
  auto lo = [&](std::size_t i) { return i > w ? i - w : 0; };
  auto hi = [&](std::size_t i) { return std::min(m - 1, i + w); };
  const std::size_t width = 2 * w + 1;
  std::vector<double> acc(n * width, inf);
  auto cell = [&](std::size_t i, std::size_t j) -> double& { return acc[i * width + (j - lo(i))]; };
  auto get = [&](std::size_t i, std::size_t j) -> double {
    if (j < lo(i) || j > hi(i)) return inf;
    return acc[i * width + (j - lo(i))];
  };

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = lo(i); j <= hi(i); ++j) {
      const double local = std::abs(x[i] - y[j]);
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else {
        best = inf;
        if (i > 0 && j > 0) best = std::min(best, get(i - 1, j - 1));
        if (i > 0) best = std::min(best, get(i - 1, j));
        if (j > 0) best = std::min(best, get(i, j - 1));
      }
      cell(i, j) = local + best;
    }
  }

  DtwResult out;
  out.cost = get(n - 1, m - 1);
  assert(std::isfinite(out.cost));

  // Backtrack preferring the diagonal on ties.
  std::size_t i = n - 1, j = m - 1;
  out.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double d = get(i - 1, j - 1);
      const double up = get(i - 1, j);
      const double left = get(i, j - 1);
      if (d <= up && d <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    out.path.emplace_back(i, j);
  }
  std::reverse(out.path.begin(), out.path.end());
  return out;
}

}  // namespace valmetric
