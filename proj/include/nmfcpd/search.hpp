#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "nmfcpd/common.hpp"
#include "nmfcpd/nmf.hpp"
#include "nmfcpd/rng.hpp"

namespace nmfcpd::search {

// Time indices are 1-based throughout this module; a change point q means the
// segments are rows [lo..q] and [q+1..hi].

struct SearchWindow {
  long t_min = 1;
  long t_max = 0;
  long delta = 50;

  /// A window admits candidates only if [t_min + delta, t_max - delta] is
  /// non-empty.
  bool searchable() const { return t_min + delta <= t_max - delta; }
};

/// One halving of the candidate index set: the data blocks fitted and their
/// losses. Data blocks overlap at the split index and carry delta rows of
/// padding beyond the candidate range.
struct BlockComparison {
  long x_lo = 0, x_hi = 0;          // candidate index set before the halving
  long left_lo = 0, left_hi = 0;    // rows of the left block
  long right_lo = 0, right_hi = 0;  // rows of the right block
  double left_loss = 0.0;
  double right_loss = 0.0;
};

struct SearchOutcome {
  std::optional<long> point;
  std::vector<BlockComparison> steps;  // fit_best calls == 2 * steps.size()
};

struct CandidateTrace {
  long window_lo = 0, window_hi = 0;
  long point = 0;
  std::vector<BlockComparison> steps;
};

struct CandidateSet {
  std::vector<long> points;           // strictly ascending
  std::vector<CandidateTrace> traces;  // aligned with points
};

namespace detail {

inline double block_loss(const Matrix& Y, long lo, long hi, int rank, LossKind kind,
                         const nmf::FitSettings& settings) {
  const Matrix block = Y.middleRows(lo - 1, hi - lo + 1);
  return nmf::fit_best(block, rank, kind, settings).loss;
}

}  // namespace detail

/// Locates the single most likely change point inside the window by halving
/// the candidate index set x = {t_min+delta, ..., t_max-delta}. Each round
/// fits the overlapping left/right data blocks around the midpoint and keeps
/// the half of x under the block with the higher loss (the block containing a
/// structural change reconstructs worse). Ties keep the left half. With the
/// candidate set down to one index v, a final comparison of the delta-padded
/// blocks around v decides between v-1 and v.
inline SearchOutcome binary_search_candidate(const Matrix& Y, const SearchWindow& window,
                                             int rank, LossKind kind,
                                             const nmf::FitSettings& settings) {
  SearchOutcome outcome;
  if (!window.searchable()) return outcome;

  const long delta = window.delta;
  long x_lo = window.t_min + delta;
  long x_hi = window.t_max - delta;
  int step = 0;

  auto fit_pair = [&](BlockComparison& cmp) {
    nmf::FitSettings fs = settings;
    fs.seed = derive_seed(settings.seed, static_cast<std::uint64_t>(2 * step));
    cmp.left_loss = detail::block_loss(Y, cmp.left_lo, cmp.left_hi, rank, kind, fs);
    fs.seed = derive_seed(settings.seed, static_cast<std::uint64_t>(2 * step + 1));
    cmp.right_loss = detail::block_loss(Y, cmp.right_lo, cmp.right_hi, rank, kind, fs);
    ++step;
  };

  while (x_hi - x_lo + 1 > 1) {
    const long n = x_hi - x_lo + 1;
    const long t_size = (n + 1) / 2;  // ceil(n/2)
    const long split = x_lo + t_size - 1;

    BlockComparison cmp;
    cmp.x_lo = x_lo;
    cmp.x_hi = x_hi;
    cmp.left_lo = x_lo - delta;
    cmp.left_hi = split;
    cmp.right_lo = split;
    cmp.right_hi = (n % 2 == 0) ? x_hi + delta - 1 : x_hi + delta;
    fit_pair(cmp);
    outcome.steps.push_back(cmp);

    if (cmp.left_loss >= cmp.right_loss) {
      x_hi = split;  // keep x[1..t_size]
    } else {
      x_lo = split + 1;  // keep x[t_size+1..n]
    }
  }

  const long v = x_lo;
  BlockComparison last;
  last.x_lo = v;
  last.x_hi = v;
  last.left_lo = v - delta;
  last.left_hi = v;
  last.right_lo = v;
  last.right_hi = v + delta;
  fit_pair(last);
  outcome.steps.push_back(last);

  outcome.point = (last.left_loss > last.right_loss) ? v - 1 : v;
  return outcome;
}

namespace detail {

inline void discover_rec(const Matrix& Y, long lo, long hi, long delta, int rank, LossKind kind,
                         const nmf::FitSettings& settings, std::uint64_t master,
                         CandidateSet& out) {
  SearchWindow window{lo, hi, delta};
  if (!window.searchable()) return;

  // Seed the window from its bounds so the result is independent of
  // traversal order.
  nmf::FitSettings fs = settings;
  fs.seed = derive_seed(derive_seed(master, static_cast<std::uint64_t>(lo)),
                        static_cast<std::uint64_t>(hi));
  const SearchOutcome outcome = binary_search_candidate(Y, window, rank, kind, fs);
  if (!outcome.point) return;

  const long q = *outcome.point;
  CandidateTrace trace;
  trace.window_lo = lo;
  trace.window_hi = hi;
  trace.point = q;
  trace.steps = outcome.steps;
  out.traces.push_back(std::move(trace));

  discover_rec(Y, lo, q, delta, rank, kind, settings, master, out);
  discover_rec(Y, q + 1, hi, delta, rank, kind, settings, master, out);
}

}  // namespace detail

/// Recursively applies the binary search: the candidate found in a window
/// splits it into [lo, q] and [q+1, hi], each searched in turn until windows
/// become unsearchable. Every searchable window emits a candidate; pruning of
/// spurious ones is the inference stage's job.
inline CandidateSet discover_candidates(const TimeSeriesMatrix& Y, long delta, int rank,
                                        LossKind kind, const nmf::FitSettings& settings) {
  if (delta < 2) throw config_error("delta must be >= 2");
  CandidateSet set;
  detail::discover_rec(Y.values(), 1, Y.rows(), delta, rank, kind, settings,
                       derive_seed(settings.seed, seed_stream::kDiscover), set);
  std::sort(set.traces.begin(), set.traces.end(),
            [](const CandidateTrace& a, const CandidateTrace& b) { return a.point < b.point; });
  set.points.reserve(set.traces.size());
  for (const auto& t : set.traces) set.points.push_back(t.point);
  return set;
}

}  // namespace nmfcpd::search
