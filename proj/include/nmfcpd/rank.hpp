#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nmfcpd/common.hpp"
#include "nmfcpd/nmf.hpp"
#include "nmfcpd/rng.hpp"

namespace nmfcpd::ranksel {

struct RankSearchResult {
  int r_opt = 0;
  bool exhausted = false;  // no rank met the criterion; r_opt fell back to r_max
  std::vector<int> ranks_tested;
  std::map<int, double> losses_original;
  std::map<int, double> losses_permuted;
};

/// Shuffles each column's values independently across time points. Column
/// multisets are preserved; temporal and cross-column structure is destroyed.
inline Matrix permute_per_column(const Matrix& Y, std::uint64_t seed) {
  Matrix out(Y.rows(), Y.cols());
  const auto n = static_cast<std::size_t>(Y.rows());
  for (Index j = 0; j < Y.cols(); ++j) {
    SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
    const auto perm = rng.permutation(n);
    for (Index i = 0; i < Y.rows(); ++i) {
      out(i, j) = Y(static_cast<Index>(perm[static_cast<std::size_t>(i)]), j);
    }
  }
  return out;
}

inline Matrix permute_per_column(const TimeSeriesMatrix& Y, std::uint64_t seed) {
  return permute_per_column(Y.values(), seed);
}

/// Optimal factorization rank: fits every rank in [r_min, r_max] on Y and on
/// one per-column-permuted copy Y*, and returns the first rank whose loss
/// decrease on Y falls below the decrease on Y*. A loss drop that beats the
/// permuted baseline indicates real structure at that rank; once it stops
/// beating it, additional rank only fits noise.
inline RankSearchResult find_optimal_rank(const TimeSeriesMatrix& Y, LossKind kind,
                                          const nmf::FitSettings& settings, int r_min,
                                          int r_max) {
  const Index dim_cap = std::min(Y.rows(), Y.cols());
  if (r_min < 2) throw config_error("rank search must start at r_min >= 2");
  if (r_max < r_min) throw config_error("rank range is empty: r_min > r_max");
  if (r_max >= dim_cap) {
    throw config_error("r_max " + std::to_string(r_max) + " must be < min(T, p) = " +
                       std::to_string(dim_cap));
  }

  const Matrix permuted = permute_per_column(Y, derive_seed(settings.seed, seed_stream::kColumnShuffle));

  RankSearchResult result;
  for (int r = r_min; r <= r_max; ++r) {
    result.ranks_tested.push_back(r);

    nmf::FitSettings fs = settings;
    fs.seed = derive_seed(derive_seed(settings.seed, seed_stream::kRankOriginal),
                          static_cast<std::uint64_t>(r));
    result.losses_original[r] = nmf::fit_best(Y.values(), r, kind, fs).loss;

    fs.seed = derive_seed(derive_seed(settings.seed, seed_stream::kRankPermuted),
                          static_cast<std::uint64_t>(r));
    result.losses_permuted[r] = nmf::fit_best(permuted, r, kind, fs).loss;

    if (r > r_min) {
      const double drop = result.losses_original[r - 1] - result.losses_original[r];
      const double drop_permuted = result.losses_permuted[r - 1] - result.losses_permuted[r];
      if (drop < drop_permuted) {
        result.r_opt = r;
        return result;
      }
    }
  }
  result.r_opt = r_max;
  result.exhausted = true;
  return result;
}

}  // namespace nmfcpd::ranksel
