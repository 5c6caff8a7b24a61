#pragma once

#include <cstdint>
#include <optional>

#include "nmfcpd/common.hpp"
#include "nmfcpd/nmf.hpp"

namespace nmfcpd {

/// Tuning knobs for the full detection pipeline. Paper-scale defaults; the
/// desk preset trades statistical headroom for runtime on a workstation.
struct DetectorConfig {
  long delta = 50;        // minimum distance between candidate change points
  int n_run = 100;        // restarts per fit_best during search / rank selection
  int n_reps = 1000;      // refit repetitions per candidate (observed and null)
  double alpha = 0.001;   // one-sided Welch test level
  LossKind loss = LossKind::KL;
  std::optional<int> rank;  // fixed factorization rank; empty = select automatically
  std::uint64_t seed = 1;
  int rank_min = 2;
  int rank_max = 15;      // clipped to min(T, p) - 1 at run time
  int max_iter = 2000;
  double rel_tol = 1e-4;
  int refit_fits_per_rep = 1;          // restarts inside each refit repetition
  bool fresh_null_permutation = true;  // re-permute the segment every repetition
  bool null_calibrated_guard = true;   // also require the observed mean to be
                                       // extreme within the permutation-null sample
  int network_runs = 100;              // adjacency runs per consensus matrix

  static DetectorConfig paper_preset() { return DetectorConfig{}; }

  static DetectorConfig desk_preset() {
    DetectorConfig c;
    c.n_run = 20;
    c.n_reps = 100;
    c.rank_max = 8;
    return c;
  }

  nmf::FitSettings fit_settings() const { return {n_run, max_iter, rel_tol, seed}; }

  void validate() const {
    if (delta < 2) throw config_error("delta must be >= 2");
    if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("alpha must lie in (0, 1)");
    if (n_run < 1) throw config_error("n_run must be >= 1");
    if (n_reps < 1) throw config_error("n_reps must be >= 1");
    if (rank && *rank < 1) throw config_error("rank must be >= 1");
    if (rank_min < 2) throw config_error("rank_min must be >= 2");
    if (rank_max < rank_min) throw config_error("rank_max must be >= rank_min");
    if (max_iter < 1) throw config_error("max_iter must be >= 1");
    if (!(rel_tol > 0.0)) throw config_error("rel_tol must be > 0");
    if (refit_fits_per_rep < 1) throw config_error("refit_fits_per_rep must be >= 1");
    if (network_runs < 1) throw config_error("network_runs must be >= 1");
  }
};

}  // namespace nmfcpd
