#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "nmfcpd/common.hpp"
#include "nmfcpd/nmf.hpp"
#include "nmfcpd/parallel.hpp"
#include "nmfcpd/rng.hpp"

namespace nmfcpd::net {

struct ConsensusMatrix {
  Matrix C;             // p x p, symmetric, entries in [0, 1], unit diagonal
  int n_runs_used = 0;  // successful adjacency runs averaged into C
};

namespace detail {

/// Cluster of variable j = argmax_k H(k, j); ties and all-zero columns go to
/// the lowest index.
inline std::vector<int> cluster_assignment(const Matrix& H, int* zero_columns = nullptr) {
  std::vector<int> labels(static_cast<std::size_t>(H.cols()), 0);
  int zeros = 0;
  for (Index j = 0; j < H.cols(); ++j) {
    int best = 0;
    double best_v = H(0, j);
    for (Index k = 1; k < H.rows(); ++k) {
      if (H(k, j) > best_v) {
        best_v = H(k, j);
        best = static_cast<int>(k);
      }
    }
    if (H.col(j).maxCoeff() <= 0.0) ++zeros;
    labels[static_cast<std::size_t>(j)] = best;
  }
  if (zero_columns) *zero_columns = zeros;
  return labels;
}

inline IntMatrix labels_to_adjacency(const std::vector<int>& labels) {
  const auto p = static_cast<Index>(labels.size());
  IntMatrix A = IntMatrix::Zero(p, p);
  for (Index i = 0; i < p; ++i) {
    for (Index j = i + 1; j < p; ++j) {
      if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]) {
        A(i, j) = 1;
        A(j, i) = 1;
      }
    }
  }
  return A;
}

}  // namespace detail

/// One NMF fit on the segment; variables sharing the argmax row of H are
/// connected. Zero diagonal.
inline IntMatrix run_adjacency(const Matrix& segment, int rank, LossKind kind,
                               std::uint64_t seed, int max_iter = 2000, double rel_tol = 1e-4,
                               int* zero_columns = nullptr) {
  if (segment.rows() < 2) throw config_error("segment must have at least 2 rows");
  const auto fit = nmf::fit_once(segment, rank, kind, max_iter, rel_tol, seed);
  return detail::labels_to_adjacency(detail::cluster_assignment(fit.H, zero_columns));
}

/// Mean of n_run seeded adjacency runs; C_ij estimates the probability that
/// variables i and j share a cluster. Failed runs are skipped; the average is
/// over successes (n_runs_used). Summation order is fixed for reproducibility.
inline ConsensusMatrix consensus(const Matrix& segment, int rank, LossKind kind, int n_run,
                                 std::uint64_t seed, int max_iter = 2000, double rel_tol = 1e-4) {
  if (n_run < 1) throw config_error("n_run must be >= 1");
  const Index p = segment.cols();

  std::vector<IntMatrix> runs(static_cast<std::size_t>(n_run));
  std::vector<char> ok(static_cast<std::size_t>(n_run), 0);
  parallel_for(n_run, [&](long i) {
    try {
      runs[static_cast<std::size_t>(i)] =
          run_adjacency(segment, rank, kind, derive_seed(seed, static_cast<std::uint64_t>(i)),
                        max_iter, rel_tol);
      ok[static_cast<std::size_t>(i)] = 1;
    } catch (const numerical_error&) {
    }
  });

  IntMatrix sum = IntMatrix::Zero(p, p);
  int used = 0;
  for (int i = 0; i < n_run; ++i) {
    if (!ok[static_cast<std::size_t>(i)]) continue;
    sum += runs[static_cast<std::size_t>(i)];
    ++used;
  }
  if (used == 0) throw numerical_error("all consensus adjacency runs failed");

  ConsensusMatrix result;
  result.C = sum.cast<double>() / static_cast<double>(used);
  result.C.diagonal().setOnes();
  result.n_runs_used = used;
  return result;
}

struct ClusterCut {
  std::vector<int> labels;  // cluster id per variable, ids 0..K0-1 ordered by first member
  IntMatrix adjacency;
};

/// Agglomerative complete-linkage clustering on dissimilarity D = 1 - C, cut
/// at K0 clusters. Merge ties resolve to the lexicographically smallest pair
/// of active cluster indices. Output ids are renumbered by each cluster's
/// smallest member so they are invariant to merge bookkeeping.
inline ClusterCut cluster_cut(const Matrix& C, int K0) {
  const Index p = C.rows();
  if (C.cols() != p) throw config_error("consensus matrix must be square");
  if (K0 < 1 || K0 > p) throw config_error("K0 must lie in [1, p]");

  // dist[a][b]: complete-linkage distance between active clusters a and b.
  std::vector<std::vector<double>> dist(static_cast<std::size_t>(p),
                                        std::vector<double>(static_cast<std::size_t>(p), 0.0));
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j)
      dist[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 1.0 - C(i, j);

  std::vector<int> member(static_cast<std::size_t>(p));  // variable -> active cluster
  std::iota(member.begin(), member.end(), 0);
  std::vector<char> active(static_cast<std::size_t>(p), 1);
  int n_clusters = static_cast<int>(p);

  while (n_clusters > K0) {
    double best = std::numeric_limits<double>::infinity();
    int best_a = -1, best_b = -1;
    for (int a = 0; a < p; ++a) {
      if (!active[static_cast<std::size_t>(a)]) continue;
      for (int b = a + 1; b < p; ++b) {
        if (!active[static_cast<std::size_t>(b)]) continue;
        const double d = dist[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
        if (d < best) {
          best = d;
          best_a = a;
          best_b = b;
        }
      }
    }
    // Merge b into a; complete linkage: d(a∪b, c) = max(d(a,c), d(b,c)).
    for (int c = 0; c < p; ++c) {
      if (!active[static_cast<std::size_t>(c)] || c == best_a || c == best_b) continue;
      const double d = std::max(dist[static_cast<std::size_t>(best_a)][static_cast<std::size_t>(c)],
                                dist[static_cast<std::size_t>(best_b)][static_cast<std::size_t>(c)]);
      dist[static_cast<std::size_t>(best_a)][static_cast<std::size_t>(c)] = d;
      dist[static_cast<std::size_t>(c)][static_cast<std::size_t>(best_a)] = d;
    }
    active[static_cast<std::size_t>(best_b)] = 0;
    for (auto& m : member) {
      if (m == best_b) m = best_a;
    }
    --n_clusters;
  }

  // Renumber by first occurrence.
  std::vector<int> renumber(static_cast<std::size_t>(p), -1);
  int next_id = 0;
  ClusterCut cut;
  cut.labels.resize(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) {
    const int m = member[static_cast<std::size_t>(j)];
    if (renumber[static_cast<std::size_t>(m)] < 0) renumber[static_cast<std::size_t>(m)] = next_id++;
    cut.labels[static_cast<std::size_t>(j)] = renumber[static_cast<std::size_t>(m)];
  }
  cut.adjacency = detail::labels_to_adjacency(cut.labels);
  return cut;
}

/// A_ij = 1 iff C_ij > lambda, i != j.
inline IntMatrix threshold_adjacency(const Matrix& C, double lambda) {
  if (C.rows() != C.cols()) throw config_error("consensus matrix must be square");
  const Index p = C.rows();
  IntMatrix A = IntMatrix::Zero(p, p);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j)
      if (i != j && C(i, j) > lambda) A(i, j) = 1;
  return A;
}

/// Fraction of off-diagonal entries equal to 1.
inline double graph_density(const IntMatrix& A) {
  const Index p = A.rows();
  if (p < 2) return 0.0;
  long edges = 0;
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j)
      if (i != j && A(i, j) == 1) ++edges;
  return static_cast<double>(edges) / static_cast<double>(p * (p - 1));
}

}  // namespace nmfcpd::net
