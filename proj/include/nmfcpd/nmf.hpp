#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nmfcpd/common.hpp"
#include "nmfcpd/parallel.hpp"
#include "nmfcpd/rng.hpp"

namespace nmfcpd::nmf {

/// Floor added to update denominators and log arguments.
inline constexpr double kEpsilon = 1e-16;

/// Convergence is evaluated on the trailing loss every this many iterations;
/// amortizes the cost of the loss computation.
inline constexpr int kCheckEvery = 20;

struct FitSettings {
  int n_run = 100;         // random restarts in fit_best
  int max_iter = 2000;     // multiplicative update iterations per run
  double rel_tol = 1e-4;   // relative loss improvement threshold
  std::uint64_t seed = 1;  // master seed; per-run seeds derive from it

  void validate() const {
    if (n_run < 1) throw config_error("n_run must be >= 1");
    if (max_iter < 1) throw config_error("max_iter must be >= 1");
    if (!(rel_tol > 0.0)) throw config_error("rel_tol must be > 0");
  }
};

struct Factorization {
  Matrix W;  // T x r
  Matrix H;  // r x p
  int rank = 0;
  LossKind loss_kind = LossKind::Euclidean;
  double loss = 0.0;
  int iterations = 0;  // update steps actually taken
};

namespace detail {

inline void check_dims(const Matrix& X, const Matrix& W, const Matrix& H) {
  if (W.rows() != X.rows() || H.cols() != X.cols() || W.cols() != H.rows()) {
    throw config_error("factor dimensions do not conform: X is " + std::to_string(X.rows()) +
                       "x" + std::to_string(X.cols()) + ", W is " + std::to_string(W.rows()) +
                       "x" + std::to_string(W.cols()) + ", H is " + std::to_string(H.rows()) +
                       "x" + std::to_string(H.cols()));
  }
}

inline double loss_given_product(const Matrix& X, const Matrix& WH, LossKind kind) {
  const double* x = X.data();
  const double* wh = WH.data();
  const Index n = X.size();
  double acc = 0.0;
  if (kind == LossKind::Euclidean) {
    for (Index i = 0; i < n; ++i) {
      const double d = x[i] - wh[i];
      acc += d * d;
    }
    return acc;
  }
  // Generalized KL: sum x*log(x/wh) - x + wh, with 0*log(0) = 0.
  for (Index i = 0; i < n; ++i) {
    const double xi = x[i];
    const double ri = wh[i];
    if (xi > 0.0) {
      if (ri <= 0.0) {
        throw divergence_error("KL divergence undefined: reconstruction is zero where data is positive");
      }
      acc += xi * std::log(xi / ri) - xi + ri;
    } else {
      acc += ri;
    }
  }
  return acc;
}

}  // namespace detail

/// Reconstruction loss between X and W*H.
inline double loss_of(const Matrix& X, const Matrix& W, const Matrix& H, LossKind kind) {
  detail::check_dims(X, W, H);
  const Matrix WH = W * H;
  return detail::loss_given_product(X, WH, kind);
}

namespace detail {

// One alternating multiplicative update (Lee-Seung), H first, then W against
// the refreshed H. Scratch buffers avoid per-iteration allocation.
struct UpdateWorkspace {
  Matrix WH;     // T x p
  Matrix ratio;  // T x p, X ./ WH (KL only)
  Matrix numH;   // r x p
  Matrix numW;   // T x r
  Matrix gram;   // r x r (Euclidean only)

  void resize(Index t, Index p, Index r) {
    WH.resize(t, p);
    ratio.resize(t, p);
    numH.resize(r, p);
    numW.resize(t, r);
    gram.resize(r, r);
  }
};

inline void update_inplace(const Matrix& X, Matrix& W, Matrix& H, LossKind kind,
                           UpdateWorkspace& ws) {
  if (kind == LossKind::Euclidean) {
    // H <- H .* (W'X) ./ (W'W H + eps)
    ws.gram.noalias() = W.transpose() * W;
    ws.numH.noalias() = W.transpose() * X;
    H.array() *= ws.numH.array() / ((ws.gram * H).array() + kEpsilon);
    // W <- W .* (X H') ./ (W H H' + eps)
    ws.gram.noalias() = H * H.transpose();
    ws.numW.noalias() = X * H.transpose();
    W.array() *= ws.numW.array() / ((W * ws.gram).array() + kEpsilon);
    return;
  }
  // KL:
  // H <- H .* (W' (X ./ WH)) ./ (W' 1 + eps)
  ws.WH.noalias() = W * H;
  ws.ratio.array() = X.array() / (ws.WH.array() + kEpsilon);
  ws.numH.noalias() = W.transpose() * ws.ratio;
  H.array() *= ws.numH.array();
  H.array().colwise() /= (W.colwise().sum().transpose().array() + kEpsilon);
  // W <- W .* ((X ./ WH) H') ./ (1 H' + eps)
  ws.WH.noalias() = W * H;
  ws.ratio.array() = X.array() / (ws.WH.array() + kEpsilon);
  ws.numW.noalias() = ws.ratio * H.transpose();
  W.array() *= ws.numW.array();
  W.array().rowwise() /= (H.rowwise().sum().transpose().array() + kEpsilon);
}

}  // namespace detail

/// Pure single multiplicative update step; returns refreshed (W, H).
inline std::pair<Matrix, Matrix> update_step(const Matrix& X, const Matrix& W, const Matrix& H,
                                             LossKind kind) {
  detail::check_dims(X, W, H);
  Matrix Wn = W;
  Matrix Hn = H;
  detail::UpdateWorkspace ws;
  ws.resize(X.rows(), X.cols(), W.cols());
  detail::update_inplace(X, Wn, Hn, kind, ws);
  return {std::move(Wn), std::move(Hn)};
}

/// One seeded factorization: W, H start i.i.d. uniform on (0, max(X)] and are
/// iterated until the relative loss improvement over a 20-iteration window
/// drops below rel_tol, or max_iter is hit.
inline Factorization fit_once(const Matrix& X, int rank, LossKind kind, int max_iter,
                              double rel_tol, std::uint64_t seed) {
  if (rank < 1) throw config_error("rank must be >= 1");
  if (rank >= std::min(X.rows(), X.cols())) {
    throw config_error("rank " + std::to_string(rank) + " must be < min(T, p) = " +
                       std::to_string(std::min(X.rows(), X.cols())));
  }
  if (max_iter < 1) throw config_error("max_iter must be >= 1");

  const Index t = X.rows();
  const Index p = X.cols();
  SplitMix64 rng(seed);
  const double max_x = X.maxCoeff();
  const double scale = max_x > 0.0 ? max_x : 1.0;

  Matrix W(t, rank);
  Matrix H(rank, p);
  for (Index j = 0; j < rank; ++j)
    for (Index i = 0; i < t; ++i) W(i, j) = rng.uniform_positive(scale);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < rank; ++i) H(i, j) = rng.uniform_positive(scale);

  detail::UpdateWorkspace ws;
  ws.resize(t, p, rank);

  double checkpoint_loss = std::numeric_limits<double>::infinity();
  double last_loss = std::numeric_limits<double>::quiet_NaN();
  bool have_last = false;
  int iter = 0;

  try {
    checkpoint_loss = loss_of(X, W, H, kind);
    for (iter = 1; iter <= max_iter; ++iter) {
      detail::update_inplace(X, W, H, kind, ws);
      if (iter % kCheckEvery == 0) {
        const double loss = loss_of(X, W, H, kind);
        if (!std::isfinite(loss)) {
          throw numerical_error("non-finite loss at iteration " + std::to_string(iter), iter);
        }
        const double drop = (checkpoint_loss - loss) /
                            std::max(checkpoint_loss, std::numeric_limits<double>::min());
        last_loss = loss;
        have_last = true;
        if (drop < rel_tol) break;
        checkpoint_loss = loss;
      }
    }
    if (iter > max_iter) iter = max_iter;
    if (!have_last || iter % kCheckEvery != 0) {
      last_loss = loss_of(X, W, H, kind);
    }
  } catch (const divergence_error&) {
    throw numerical_error("KL loss diverged at iteration " + std::to_string(iter), iter);
  }
  if (!std::isfinite(last_loss)) {
    throw numerical_error("non-finite loss at iteration " + std::to_string(iter), iter);
  }

  Factorization fit;
  fit.W = std::move(W);
  fit.H = std::move(H);
  fit.rank = rank;
  fit.loss_kind = kind;
  fit.loss = last_loss;
  fit.iterations = iter;
  return fit;
}

/// Best of settings.n_run seeded restarts: minimal loss, ties broken by the
/// lowest run index. Run seeds are derived up front so parallel execution is
/// identical to sequential. Failed runs are skipped (counted into
/// *failed_runs when given) unless every run fails.
inline Factorization fit_best(const Matrix& X, int rank, LossKind kind,
                              const FitSettings& settings, int* failed_runs = nullptr) {
  settings.validate();
  const int runs = settings.n_run;
  std::vector<std::optional<Factorization>> results(static_cast<std::size_t>(runs));
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(runs));
  for (int i = 0; i < runs; ++i) seeds[static_cast<std::size_t>(i)] = derive_seed(settings.seed, static_cast<std::uint64_t>(i));

  std::atomic<int> failures{0};
  parallel_for(runs, [&](long i) {
    try {
      results[static_cast<std::size_t>(i)] =
          fit_once(X, rank, kind, settings.max_iter, settings.rel_tol, seeds[static_cast<std::size_t>(i)]);
    } catch (const numerical_error&) {
      failures.fetch_add(1);
    }
  });

  if (failed_runs) *failed_runs = failures.load();

  int best = -1;
  for (int i = 0; i < runs; ++i) {
    const auto& r = results[static_cast<std::size_t>(i)];
    if (!r) continue;
    if (best < 0 || r->loss < results[static_cast<std::size_t>(best)]->loss) best = i;
  }
  if (best < 0) {
    throw numerical_error("all " + std::to_string(runs) + " factorization runs failed");
  }
  return std::move(*results[static_cast<std::size_t>(best)]);
}

}  // namespace nmfcpd::nmf
