#pragma once

#include <algorithm>
#include <cmath>

#include "nmfcpd/common.hpp"

namespace nmfcpd::io {

struct ShiftedSeries {
  Matrix values;
  double shift = 0.0;
};

/// Adds the same constant to every entry so the minimum becomes exactly 0
/// when any entry was negative; already non-negative input passes through
/// unchanged. Centered column statistics (covariance, correlation) are
/// invariant under the shift.
inline ShiftedSeries shift_nonneg(const Matrix& raw) {
  for (Index j = 0; j < raw.cols(); ++j) {
    for (Index i = 0; i < raw.rows(); ++i) {
      if (!std::isfinite(raw(i, j))) {
        throw ingest_error("non-finite entry at row " + std::to_string(i + 1) + ", column " +
                           std::to_string(j + 1));
      }
    }
  }
  ShiftedSeries out;
  const double min_entry = raw.minCoeff();
  out.shift = std::max(0.0, -min_entry);
  out.values = raw.array() + out.shift;
  return out;
}

}  // namespace nmfcpd::io
