#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nmfcpd/common.hpp"
#include "nmfcpd/rng.hpp"

namespace nmfcpd::sim {

/// Between-cluster covariance regime: Uniform = constant 0.20 off-cluster,
/// Decay = 0.20^|i-j| off-cluster. Within-cluster off-diagonal is 0.75, unit
/// diagonal.
enum class CovStructure { Uniform, Decay };

struct CovarianceSpec {
  int p = 0;
  std::vector<int> labels;  // cluster id per variable
  CovStructure structure = CovStructure::Uniform;
};

struct SigmaResult {
  Matrix sigma;
  double ridge = 0.0;  // added to the diagonal when the raw matrix was near-singular
};

/// Adds the smallest diagonal ridge that lifts the minimum eigenvalue above
/// 1e-8; returns 0 when the matrix is already safely positive definite.
inline double ensure_positive_definite(Matrix& sigma) {
  Eigen::SelfAdjointEigenSolver<Matrix> eigs(sigma, Eigen::EigenvaluesOnly);
  if (eigs.info() != Eigen::Success) {
    throw numerical_error("eigendecomposition failed while validating covariance");
  }
  const double min_eig = eigs.eigenvalues().minCoeff();
  if (min_eig > 1e-8) return 0.0;
  const double ridge = 1e-8 - min_eig + 1e-12;
  sigma.diagonal().array() += ridge;
  return ridge;
}

/// Builds the block covariance for a spec. If the smallest eigenvalue is
/// <= 1e-8 the minimal diagonal ridge restoring positive definiteness is
/// added and reported.
inline SigmaResult build_sigma(const CovarianceSpec& spec) {
  if (spec.p < 2) throw config_error("covariance spec needs p >= 2");
  if (static_cast<int>(spec.labels.size()) != spec.p) {
    throw config_error("covariance spec labels must have length p");
  }

  SigmaResult result;
  Matrix& sigma = result.sigma;
  sigma.resize(spec.p, spec.p);
  for (int i = 0; i < spec.p; ++i) {
    for (int j = 0; j < spec.p; ++j) {
      if (i == j) {
        sigma(i, j) = 1.0;
      } else if (spec.labels[static_cast<std::size_t>(i)] == spec.labels[static_cast<std::size_t>(j)]) {
        sigma(i, j) = 0.75;
      } else if (spec.structure == CovStructure::Uniform) {
        sigma(i, j) = 0.20;
      } else {
        sigma(i, j) = std::pow(0.20, std::abs(i - j));
      }
    }
  }

  result.ridge = ensure_positive_definite(sigma);
  return result;
}

struct SegmentSpec {
  long length = 0;
  CovarianceSpec covariance;
};

struct SimulationScenario {
  int id = 0;
  long T = 0;
  int p = 0;
  std::vector<long> change_points;    // 1-based last index of each segment but the final
  std::vector<SegmentSpec> segments;  // one per stationary block
  std::string notes;
};

namespace detail {

inline std::vector<int> balanced_labels(int p, int k) {
  std::vector<int> labels(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>((static_cast<long>(i) * k) / p);
  return labels;
}

inline std::vector<int> reshuffled(const std::vector<int>& labels, SplitMix64& rng) {
  const auto perm = rng.permutation(labels.size());
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[perm[i]];
  return out;
}

inline std::vector<std::size_t> members_of(const std::vector<int>& labels, int k) {
  std::vector<std::size_t> m;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == k) m.push_back(i);
  return m;
}

/// Dissolves cluster `k`, assigning its members alternately to the two other
/// clusters in index order; the starting side comes from one seed bit.
inline std::vector<int> merge_cluster_into_two(const std::vector<int>& labels, int k, int a,
                                               int b, SplitMix64& rng) {
  std::vector<int> out = labels;
  const bool start_with_a = (rng.next() & 1u) == 0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] != k) continue;
    const bool to_a = (pos % 2 == 0) == start_with_a;
    out[i] = to_a ? a : b;
    ++pos;
  }
  return out;
}

/// Moves a random half of each cluster's members to the other cluster.
inline std::vector<int> swap_half(const std::vector<int>& labels, SplitMix64& rng) {
  std::vector<int> out = labels;
  for (int k = 0; k <= 1; ++k) {
    auto members = members_of(labels, k);
    // Half the vertices, chosen at random.
    const auto perm = rng.permutation(members.size());
    const std::size_t n_move = members.size() / 2;
    for (std::size_t i = 0; i < n_move; ++i) out[members[perm[i]]] = 1 - k;
  }
  return out;
}

/// Moves the lowest-index third of each cluster into a new cluster `fresh`.
inline std::vector<int> carve_third(const std::vector<int>& labels, int fresh) {
  std::vector<int> out = labels;
  for (int k = 0; k <= 1; ++k) {
    auto members = members_of(labels, k);
    const std::size_t n_move = members.size() / 3;
    for (std::size_t i = 0; i < n_move; ++i) out[members[i]] = fresh;
  }
  return out;
}

}  // namespace detail

/// Materializes one of the five scenario blueprints. `p_override` and
/// `T_override` rescale the canonical dimensions (change points scale
/// proportionally with T). Label reshuffles are drawn from the seed.
inline SimulationScenario make_scenario(int id, std::uint64_t seed,
                                        std::optional<int> p_override = std::nullopt,
                                        std::optional<long> T_override = std::nullopt) {
  SplitMix64 rng(derive_seed(seed, seed_stream::kScenarioLabels));
  SimulationScenario sc;
  sc.id = id;

  long T = 0;
  int p = 0;
  std::vector<long> points;
  CovStructure structure = CovStructure::Uniform;

  switch (id) {
    case 1: T = 200; p = 400; points = {}; structure = CovStructure::Uniform; break;
    case 2: T = 200; p = 400; points = {100}; structure = CovStructure::Uniform; break;
    case 3: T = 400; p = 600; points = {100, 200, 300}; structure = CovStructure::Uniform; break;
    case 4: T = 600; p = 800; points = {200, 400}; structure = CovStructure::Decay; break;
    case 5: T = 300; p = 200; points = {100, 200}; structure = CovStructure::Decay; break;
    default: throw config_error("scenario id must be in 1..5");
  }
  if (T_override) {
    const double scale = static_cast<double>(*T_override) / static_cast<double>(T);
    for (auto& q : points) q = static_cast<long>(std::lround(static_cast<double>(q) * scale));
    T = *T_override;
  }
  if (p_override) p = *p_override;
  if (p < 4) throw config_error("scenario needs p >= 4");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const long prev = i == 0 ? 0 : points[i - 1];
    if (points[i] <= prev || points[i] >= T) throw config_error("scenario change points must be strictly increasing inside (1, T)");
  }

  sc.T = T;
  sc.p = p;
  sc.change_points = points;

  std::vector<std::vector<int>> seg_labels;
  switch (id) {
    case 1: {
      seg_labels.push_back(detail::balanced_labels(p, 2));
      break;
    }
    case 2: {
      auto first = detail::balanced_labels(p, 2);
      seg_labels.push_back(first);
      seg_labels.push_back(detail::reshuffled(first, rng));
      break;
    }
    case 3: {
      auto first = detail::balanced_labels(p, 3);
      auto second = detail::merge_cluster_into_two(first, 2, 0, 1, rng);
      auto third = detail::reshuffled(second, rng);
      auto fourth = detail::carve_third(third, 2);
      seg_labels = {first, second, third, fourth};
      sc.notes =
          "segment 2 dissolves cluster 2 alternately into clusters 0/1; segment 4 moves the "
          "lowest-index third of each cluster into a new cluster";
      break;
    }
    case 4: {
      auto first = detail::balanced_labels(p, 2);
      auto second = detail::swap_half(first, rng);
      auto third = detail::swap_half(second, rng);
      seg_labels = {first, second, third};
      break;
    }
    case 5: {
      auto first = detail::balanced_labels(p, 2);
      auto second = detail::reshuffled(first, rng);
      seg_labels = {first, second, first};
      sc.notes = "ABA structure: final segment repeats the first segment's clustering";
      break;
    }
    default: break;
  }

  std::vector<long> bounds;
  bounds.push_back(0);
  bounds.insert(bounds.end(), points.begin(), points.end());
  bounds.push_back(T);
  for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
    SegmentSpec seg;
    seg.length = bounds[s + 1] - bounds[s];
    seg.covariance = CovarianceSpec{p, seg_labels[s], structure};
    sc.segments.push_back(std::move(seg));
  }
  return sc;
}

struct SimulatedData {
  Matrix values;  // T x p, raw Gaussian draws (may contain negatives)
  std::vector<long> change_points;
  SimulationScenario scenario;
  double max_ridge = 0.0;
};

/// Draws the scenario: rows i.i.d. N(0, Sigma_segment) within each segment.
inline SimulatedData generate(const SimulationScenario& scenario, std::uint64_t seed) {
  SimulatedData data;
  data.scenario = scenario;
  data.change_points = scenario.change_points;
  data.values.resize(scenario.T, scenario.p);

  SplitMix64 rng(derive_seed(seed, seed_stream::kScenarioNoise));
  Vector z(scenario.p);
  long row = 0;
  for (const auto& seg : scenario.segments) {
    const SigmaResult sig = build_sigma(seg.covariance);
    data.max_ridge = std::max(data.max_ridge, sig.ridge);
    Eigen::LLT<Matrix> llt(sig.sigma);
    if (llt.info() != Eigen::Success) {
      throw numerical_error("covariance Cholesky failed for scenario segment");
    }
    const Matrix L = llt.matrixL();
    for (long t = 0; t < seg.length; ++t, ++row) {
      for (int j = 0; j < scenario.p; ++j) z(j) = rng.normal();
      data.values.row(row) = (L * z).transpose();
    }
  }
  return data;
}

inline SimulatedData generate(int scenario_id, std::uint64_t seed,
                              std::optional<int> p_override = std::nullopt,
                              std::optional<long> T_override = std::nullopt) {
  return generate(make_scenario(scenario_id, seed, p_override, T_override), seed);
}

namespace detail {

inline long nearest_gap(const std::vector<long>& sorted, long q) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), q);
  long best = std::numeric_limits<long>::max();
  if (it != sorted.end()) best = std::min(best, *it - q);
  if (it != sorted.begin()) best = std::min(best, q - *(it - 1));
  return best;
}

}  // namespace detail

/// Directed+reversed worst nearest-neighbor gap between the two point sets,
/// in time units (no normalization).
inline long unscaled_hausdorff(std::vector<long> a, std::vector<long> b) {
  if (a.empty() || b.empty()) throw config_error("hausdorff requires non-empty point sets");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  long worst = 0;
  for (long q : a) worst = std::max(worst, detail::nearest_gap(b, q));
  for (long q : b) worst = std::max(worst, detail::nearest_gap(a, q));
  return worst;
}

/// Scaled Hausdorff distance between true and detected change points,
/// normalized by the largest true segment length. Undefined (empty optional)
/// when either set is empty.
inline std::optional<double> hausdorff(const std::vector<long>& truth,
                                       const std::vector<long>& detected, long T) {
  if (truth.empty() || detected.empty()) return std::nullopt;
  std::vector<long> sorted = truth;
  std::sort(sorted.begin(), sorted.end());
  long n_s = sorted.front();
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) n_s = std::max(n_s, sorted[i + 1] - sorted[i]);
  n_s = std::max(n_s, T - sorted.back());
  return static_cast<double>(unscaled_hausdorff(truth, detected)) / static_cast<double>(n_s);
}

struct MatchCounts {
  long tp = 0;
  long fp = 0;
};

/// Greedy one-to-one matching within +/- window, nearest pairs first (ties:
/// lower true index, then lower detected index). TP = matched true points,
/// FP = unmatched detections.
inline MatchCounts tp_fp(const std::vector<long>& truth, const std::vector<long>& detected,
                         long window) {
  struct Pair {
    long dist;
    std::size_t ti, di;
  };
  std::vector<Pair> pairs;
  for (std::size_t ti = 0; ti < truth.size(); ++ti) {
    for (std::size_t di = 0; di < detected.size(); ++di) {
      const long d = std::abs(truth[ti] - detected[di]);
      if (d <= window) pairs.push_back({d, ti, di});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.ti != b.ti) return a.ti < b.ti;
    return a.di < b.di;
  });

  std::vector<char> truth_used(truth.size(), 0);
  std::vector<char> det_used(detected.size(), 0);
  MatchCounts counts;
  for (const auto& pr : pairs) {
    if (truth_used[pr.ti] || det_used[pr.di]) continue;
    truth_used[pr.ti] = 1;
    det_used[pr.di] = 1;
    ++counts.tp;
  }
  counts.fp = static_cast<long>(detected.size()) - counts.tp;
  return counts;
}

}  // namespace nmfcpd::sim
