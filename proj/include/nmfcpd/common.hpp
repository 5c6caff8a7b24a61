#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nmfcpd {

using Matrix = Eigen::MatrixXd;
using IntMatrix = Eigen::MatrixXi;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Reconstruction loss used throughout: squared Euclidean distance or
/// generalized Kullback-Leibler divergence.
enum class LossKind { Euclidean, KL };

inline const char* to_string(LossKind kind) {
  return kind == LossKind::Euclidean ? "euclidean" : "kl";
}

// Error taxonomy maps onto CLI exit codes: config_error -> 2,
// ingest_error -> 3, numerical_error -> 4.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct config_error : error {
  using error::error;
};

struct ingest_error : error {
  using error::error;
};

struct numerical_error : error {
  long iteration = -1;
  explicit numerical_error(const std::string& what, long iter = -1)
      : error(what), iteration(iter) {}
};

/// KL divergence is undefined where X_ij > 0 and (WH)_ij == 0.
struct divergence_error : numerical_error {
  using numerical_error::numerical_error;
};

/// T x p data matrix, rows = time points, columns = variables.
/// Construction enforces the entry-wise invariants once; slices taken from a
/// valid matrix stay valid, so hot paths operate on plain Matrix blocks.
class TimeSeriesMatrix {
 public:
  explicit TimeSeriesMatrix(Matrix values) : values_(std::move(values)) {
    if (values_.rows() < 2 || values_.cols() < 2) {
      throw config_error("time series must have at least 2 rows and 2 columns, got " +
                         std::to_string(values_.rows()) + "x" + std::to_string(values_.cols()));
    }
    for (Index j = 0; j < values_.cols(); ++j) {
      for (Index i = 0; i < values_.rows(); ++i) {
        const double v = values_(i, j);
        if (!std::isfinite(v)) {
          throw ingest_error("non-finite entry at row " + std::to_string(i + 1) + ", column " +
                             std::to_string(j + 1));
        }
        if (v < 0.0) {
          throw config_error("negative entry at row " + std::to_string(i + 1) + ", column " +
                             std::to_string(j + 1) + "; apply the non-negativity shift first");
        }
      }
    }
  }

  const Matrix& values() const { return values_; }
  Index rows() const { return values_.rows(); }
  Index cols() const { return values_.cols(); }

 private:
  Matrix values_;
};

}  // namespace nmfcpd
