#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nmfcpd/common.hpp"
#include "nmfcpd/config.hpp"
#include "nmfcpd/network.hpp"
#include "nmfcpd/preprocess.hpp"
#include "nmfcpd/rank.hpp"
#include "nmfcpd/search.hpp"
#include "nmfcpd/stats.hpp"

namespace nmfcpd::pipeline {

struct DetectionResult {
  std::vector<long> confirmed;  // confirmed change points, ascending, 1-based
  infer::ConfirmedSet confirmation;
  search::CandidateSet candidates;
  int rank_used = 0;
  bool rank_was_selected = false;
  std::optional<ranksel::RankSearchResult> rank_search;
  double shift = 0.0;
  long rows = 0;
  long cols = 0;
  DetectorConfig config;
};

/// Runs the full detection pass: non-negativity shift, rank resolution,
/// recursive candidate discovery, permutation-null confirmation.
inline DetectionResult detect(const Matrix& Y_raw, const DetectorConfig& config) {
  config.validate();
  const long T = Y_raw.rows();
  const long p = Y_raw.cols();
  if (T <= 2 * config.delta) {
    throw config_error("series length " + std::to_string(T) +
                       " must exceed 2*delta = " + std::to_string(2 * config.delta));
  }

  DetectionResult result;
  result.config = config;
  result.rows = T;
  result.cols = p;

  const io::ShiftedSeries shifted = io::shift_nonneg(Y_raw);
  result.shift = shifted.shift;
  const TimeSeriesMatrix Y(shifted.values);

  DetectorConfig effective = config;
  if (config.rank) {
    if (*config.rank >= std::min(T, p)) {
      throw config_error("rank must be < min(T, p)");
    }
    result.rank_used = *config.rank;
  } else {
    const int r_max = std::min<long>(config.rank_max, std::min(T, p) - 1);
    if (r_max < config.rank_min) {
      throw config_error("input too small for the configured rank range");
    }
    nmf::FitSettings fs = config.fit_settings();
    result.rank_search = ranksel::find_optimal_rank(Y, config.loss, fs, config.rank_min, r_max);
    result.rank_used = result.rank_search->r_opt;
    result.rank_was_selected = true;
  }
  effective.rank = result.rank_used;

  result.candidates =
      search::discover_candidates(Y, config.delta, result.rank_used, config.loss,
                                  config.fit_settings());
  result.confirmation = infer::confirm_candidates(Y, result.candidates.points, effective);
  result.confirmed = result.confirmation.points;
  return result;
}

struct NetworkRequest {
  std::optional<int> clusters;   // cut the consensus tree at K0
  std::optional<double> lambda;  // threshold the consensus matrix
};

struct SegmentNetwork {
  long lo = 0, hi = 0;  // rows covered, 1-based inclusive
  bool skipped = false;  // degenerate segment (< 2 rows)
  net::ConsensusMatrix consensus;
  std::optional<net::ClusterCut> cut;
  std::optional<IntMatrix> thresholded;
  std::optional<double> cut_density;
  std::optional<double> threshold_density;
};

/// Estimates one consensus network per stationary segment between confirmed
/// change points (boundaries {1, c..., T}).
inline std::vector<SegmentNetwork> segment_networks(const TimeSeriesMatrix& Y,
                                                    const std::vector<long>& confirmed,
                                                    const NetworkRequest& request,
                                                    const DetectorConfig& config) {
  config.validate();
  if (!config.rank) throw config_error("segment_networks requires a resolved rank");
  if (!request.clusters && !request.lambda) {
    throw config_error("network estimation needs a cluster count or a threshold");
  }
  if (request.lambda && !(*request.lambda >= 0.0 && *request.lambda <= 1.0)) {
    throw config_error("lambda must lie in [0, 1]");
  }

  std::vector<long> bounds;
  bounds.push_back(0);
  for (long q : confirmed) bounds.push_back(q);
  bounds.push_back(Y.rows());

  std::vector<SegmentNetwork> nets;
  const std::uint64_t master = derive_seed(config.seed, seed_stream::kNetwork);
  for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
    SegmentNetwork sn;
    sn.lo = bounds[s] + 1;
    sn.hi = bounds[s + 1];
    const long rows = sn.hi - sn.lo + 1;
    if (rows < 2) {
      sn.skipped = true;
      nets.push_back(std::move(sn));
      continue;
    }
    const Matrix segment = Y.values().middleRows(sn.lo - 1, rows);
    sn.consensus = net::consensus(segment, *config.rank, config.loss, config.network_runs,
                                  derive_seed(master, static_cast<std::uint64_t>(s)),
                                  config.max_iter, config.rel_tol);
    if (request.clusters) {
      sn.cut = net::cluster_cut(sn.consensus.C, *request.clusters);
      sn.cut_density = net::graph_density(sn.cut->adjacency);
    }
    if (request.lambda) {
      sn.thresholded = net::threshold_adjacency(sn.consensus.C, *request.lambda);
      sn.threshold_density = net::graph_density(*sn.thresholded);
    }
    nets.push_back(std::move(sn));
  }
  return nets;
}

}  // namespace nmfcpd::pipeline
