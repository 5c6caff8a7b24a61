#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "nmfcpd/nmf.hpp"
#include "nmfcpd/parallel.hpp"
#include "test_support.hpp"

using namespace nmfcpd;
using testsup::random_nonneg;
using testsup::random_positive;

TEST_CASE("loss is zero on an exact reconstruction") {
  const Matrix W = random_positive(6, 2, 11);
  const Matrix H = random_positive(2, 5, 12);
  const Matrix X = W * H;
  CHECK(nmf::loss_of(X, W, H, LossKind::Euclidean) == Catch::Approx(0.0).margin(1e-18));
  CHECK(nmf::loss_of(X, W, H, LossKind::KL) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("loss on a 1x1 instance matches hand evaluation") {
  Matrix X(1, 1), W(1, 1), H(1, 1);
  X << 2.0;
  W << 1.0;
  H << 1.0;
  CHECK(nmf::loss_of(X, W, H, LossKind::Euclidean) == Catch::Approx(1.0).epsilon(1e-12));
  // 2*ln2 - 1
  CHECK(nmf::loss_of(X, W, H, LossKind::KL) ==
        Catch::Approx(2.0 * std::log(2.0) - 1.0).epsilon(1e-12));
}

TEST_CASE("loss matches the double-loop oracle on random instances") {
  for (int trial = 0; trial < 100; ++trial) {
    const auto seed = static_cast<std::uint64_t>(trial) + 100;
    const Matrix X = random_nonneg(5, 4, seed, 2.0);
    const Matrix W = random_positive(5, 2, seed + 1000);
    const Matrix H = random_positive(2, 4, seed + 2000);
    for (const auto kind : {LossKind::Euclidean, LossKind::KL}) {
      const double expected = testsup::loss_oracle(X, W, H, kind);
      const double actual = nmf::loss_of(X, W, H, kind);
      CHECK(actual == Catch::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("loss errors") {
  Matrix X(2, 2), W(2, 1), H(1, 2);
  X.setConstant(1.0);
  W.setConstant(1.0);
  H.setConstant(1.0);
  CHECK_THROWS_AS(nmf::loss_of(X, W.transpose(), H, LossKind::Euclidean), config_error);

  H.setZero();  // reconstruction 0 where X > 0
  CHECK_THROWS_AS(nmf::loss_of(X, W, H, LossKind::KL), divergence_error);
}

TEST_CASE("loss is invariant under simultaneous row permutation of X and W") {
  // Integer-valued instances make floating-point summation exact, so the
  // permuted sum must match bit for bit.
  SplitMix64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix X(7, 5), W(7, 3), H(3, 5);
    for (Index j = 0; j < 5; ++j)
      for (Index i = 0; i < 7; ++i) X(i, j) = static_cast<double>(rng.below(20));
    for (Index j = 0; j < 3; ++j)
      for (Index i = 0; i < 7; ++i) W(i, j) = static_cast<double>(rng.below(9));
    for (Index j = 0; j < 5; ++j)
      for (Index i = 0; i < 3; ++i) H(i, j) = static_cast<double>(rng.below(9));

    const auto perm = rng.permutation(7);
    Matrix Xp(7, 5), Wp(7, 3);
    for (Index i = 0; i < 7; ++i) {
      Xp.row(i) = X.row(static_cast<Index>(perm[static_cast<std::size_t>(i)]));
      Wp.row(i) = W.row(static_cast<Index>(perm[static_cast<std::size_t>(i)]));
    }
    CHECK(nmf::loss_of(Xp, Wp, H, LossKind::Euclidean) == nmf::loss_of(X, W, H, LossKind::Euclidean));
  }
  // Continuous KL instances: equality up to summation order.
  const Matrix X = random_nonneg(8, 6, 5, 3.0);
  const Matrix W = random_positive(8, 3, 6);
  const Matrix H = random_positive(3, 6, 7);
  SplitMix64 prng(8);
  const auto perm = prng.permutation(8);
  Matrix Xp(8, 6), Wp(8, 3);
  for (Index i = 0; i < 8; ++i) {
    Xp.row(i) = X.row(static_cast<Index>(perm[static_cast<std::size_t>(i)]));
    Wp.row(i) = W.row(static_cast<Index>(perm[static_cast<std::size_t>(i)]));
  }
  CHECK(nmf::loss_of(Xp, Wp, H, LossKind::KL) ==
        Catch::Approx(nmf::loss_of(X, W, H, LossKind::KL)).epsilon(1e-12));
}

TEST_CASE("update step is a fixed point on an exact factorization") {
  const Matrix W = random_positive(6, 2, 21);
  const Matrix H = random_positive(2, 5, 22);
  const Matrix X = W * H;
  for (const auto kind : {LossKind::Euclidean, LossKind::KL}) {
    const auto [Wn, Hn] = nmf::update_step(X, W, H, kind);
    CHECK((Wn - W).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((Hn - H).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("update step matches the hand-computed multiplicative ratio") {
  Matrix X(1, 1), W(1, 1), H(1, 1);
  X << 4.0;
  W << 1.0;
  H << 1.0;
  const auto [Wn, Hn] = nmf::update_step(X, W, H, LossKind::Euclidean);
  // H' = H .* (W'X)/(W'WH) = 4; then W' = W .* (XH')/(WH'H') = 16/16 = 1.
  CHECK(Hn(0, 0) == Catch::Approx(4.0).epsilon(1e-12));
  CHECK(Wn(0, 0) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("updates preserve non-negativity and never increase the loss") {
  for (int trial = 0; trial < 100; ++trial) {
    const auto seed = static_cast<std::uint64_t>(trial) + 900;
    SplitMix64 rng(seed);
    const Index t = 4 + static_cast<Index>(rng.below(10));
    const Index p = 4 + static_cast<Index>(rng.below(10));
    const int r = 2 + static_cast<int>(rng.below(2));
    const auto kind = (trial % 2 == 0) ? LossKind::Euclidean : LossKind::KL;

    const Matrix X = random_nonneg(t, p, seed + 1, 2.0);
    Matrix W = random_positive(t, r, seed + 2);
    Matrix H = random_positive(r, p, seed + 3);

    double loss = nmf::loss_of(X, W, H, kind);
    for (int step = 0; step < 25; ++step) {
      std::tie(W, H) = nmf::update_step(X, W, H, kind);
      REQUIRE(W.minCoeff() >= 0.0);
      REQUIRE(H.minCoeff() >= 0.0);
      const double next = nmf::loss_of(X, W, H, kind);
      REQUIRE(next <= loss + 1e-9 * (1.0 + loss));
      loss = next;
    }
  }
}

TEST_CASE("fit_once is deterministic given the seed") {
  const Matrix X = random_nonneg(20, 10, 31, 5.0);
  const auto a = nmf::fit_once(X, 3, LossKind::KL, 200, 1e-4, 123);
  const auto b = nmf::fit_once(X, 3, LossKind::KL, 200, 1e-4, 123);
  CHECK(a.loss == b.loss);
  CHECK(a.W == b.W);
  CHECK(a.H == b.H);
  CHECK(a.iterations == b.iterations);

  const auto c = nmf::fit_once(X, 3, LossKind::KL, 200, 1e-4, 124);
  CHECK(a.W != c.W);
}

TEST_CASE("fit_once recovers an exactly low-rank matrix") {
  const Matrix W0 = random_positive(30, 2, 41);
  const Matrix H0 = random_positive(2, 12, 42);
  const Matrix X = W0 * H0;
  const auto fit = nmf::fit_once(X, 2, LossKind::Euclidean, 5000, 1e-9, 7);
  CHECK(fit.loss < 1e-6 * X.squaredNorm());
  CHECK(fit.loss == Catch::Approx(nmf::loss_of(X, fit.W, fit.H, fit.loss_kind)).epsilon(1e-9));
}

TEST_CASE("a single update iteration does not increase the loss") {
  const Matrix X = random_nonneg(12, 8, 51, 2.0);
  const auto fit = nmf::fit_once(X, 3, LossKind::Euclidean, 1, 1e-4, 5);
  // Replay the same init to get the starting loss.
  SplitMix64 rng(5);
  Matrix W(12, 3), H(3, 8);
  const double scale = X.maxCoeff();
  for (Index j = 0; j < 3; ++j)
    for (Index i = 0; i < 12; ++i) W(i, j) = rng.uniform_positive(scale);
  for (Index j = 0; j < 8; ++j)
    for (Index i = 0; i < 3; ++i) H(i, j) = rng.uniform_positive(scale);
  CHECK(fit.loss <= nmf::loss_of(X, W, H, LossKind::Euclidean));
  CHECK(fit.iterations == 1);
}

TEST_CASE("fit_once rejects invalid ranks") {
  const Matrix X = random_nonneg(6, 5, 61);
  CHECK_THROWS_AS(nmf::fit_once(X, 5, LossKind::Euclidean, 10, 1e-4, 1), config_error);
  CHECK_THROWS_AS(nmf::fit_once(X, 0, LossKind::Euclidean, 10, 1e-4, 1), config_error);
}

TEST_CASE("fit_best with one run equals fit_once") {
  const Matrix X = random_nonneg(15, 9, 71, 3.0);
  const nmf::FitSettings settings{1, 300, 1e-4, 99};
  const auto best = nmf::fit_best(X, 2, LossKind::KL, settings);
  const auto once = nmf::fit_once(X, 2, LossKind::KL, 300, 1e-4, derive_seed(99, 0));
  CHECK(best.loss == once.loss);
  CHECK(best.W == once.W);
}

TEST_CASE("fit_best returns the minimum loss over runs") {
  const Matrix X = random_nonneg(15, 9, 81, 3.0);
  nmf::FitSettings settings{8, 200, 1e-4, 4242};
  const auto best = nmf::fit_best(X, 3, LossKind::Euclidean, settings);
  double min_loss = std::numeric_limits<double>::infinity();
  for (int i = 0; i < settings.n_run; ++i) {
    const auto fit = nmf::fit_once(X, 3, LossKind::Euclidean, 200, 1e-4,
                                   derive_seed(settings.seed, static_cast<std::uint64_t>(i)));
    min_loss = std::min(min_loss, fit.loss);
  }
  CHECK(best.loss == min_loss);

  // More restarts can only improve on run 0, which shares its seed.
  nmf::FitSettings one = settings;
  one.n_run = 1;
  CHECK(best.loss <= nmf::fit_best(X, 3, LossKind::Euclidean, one).loss);
}

TEST_CASE("fit_best is agnostic to the thread count") {
  const Matrix X = random_nonneg(25, 12, 91, 2.0);
  nmf::FitSettings settings{12, 200, 1e-4, 7};
  set_thread_count(1);
  const auto sequential = nmf::fit_best(X, 3, LossKind::KL, settings);
  set_thread_count(4);
  const auto parallel = nmf::fit_best(X, 3, LossKind::KL, settings);
  set_thread_count(0);
  CHECK(sequential.loss == parallel.loss);
  CHECK(sequential.W == parallel.W);
  CHECK(sequential.H == parallel.H);
}
