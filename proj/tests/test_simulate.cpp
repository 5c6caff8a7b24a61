#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <vector>

#include "nmfcpd/simulate.hpp"
#include "test_support.hpp"

using namespace nmfcpd;

namespace {

int label_count(const std::vector<int>& labels) {
  return static_cast<int>(std::set<int>(labels.begin(), labels.end()).size());
}

Matrix sample_covariance(const Matrix& rows) {
  const Matrix centered = rows.rowwise() - rows.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(rows.rows() - 1);
}

}  // namespace

TEST_CASE("covariance entries follow the block definitions") {
  const auto same = sim::build_sigma({2, {0, 0}, sim::CovStructure::Uniform});
  CHECK(same.sigma(0, 0) == 1.0);
  CHECK(same.sigma(0, 1) == 0.75);
  CHECK(same.sigma(1, 0) == 0.75);
  CHECK(same.ridge == 0.0);

  const auto apart = sim::build_sigma({2, {0, 1}, sim::CovStructure::Uniform});
  CHECK(apart.sigma(0, 1) == 0.20);

  const auto decay = sim::build_sigma({2, {0, 1}, sim::CovStructure::Decay});
  CHECK(decay.sigma(0, 1) == Catch::Approx(0.20).epsilon(1e-15));

  const auto decay_far = sim::build_sigma({4, {0, 0, 1, 1}, sim::CovStructure::Decay});
  CHECK(decay_far.sigma(0, 3) == Catch::Approx(0.20 * 0.20 * 0.20).epsilon(1e-12));
}

TEST_CASE("random covariance specs are symmetric with unit diagonal") {
  SplitMix64 rng(2000);
  for (int trial = 0; trial < 20; ++trial) {
    const int p = 4 + static_cast<int>(rng.below(12));
    std::vector<int> labels(static_cast<std::size_t>(p));
    for (auto& l : labels) l = static_cast<int>(rng.below(3));
    const auto structure = trial % 2 == 0 ? sim::CovStructure::Uniform : sim::CovStructure::Decay;
    const auto sig = sim::build_sigma({p, labels, structure});
    CHECK(sig.sigma == sig.sigma.transpose().eval());
    CHECK((sig.sigma.diagonal().array() >= 1.0).all());
    Eigen::LLT<Matrix> llt(sig.sigma);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("covariance spec validation") {
  CHECK_THROWS_AS(sim::build_sigma({1, {0}, sim::CovStructure::Uniform}), config_error);
  CHECK_THROWS_AS(sim::build_sigma({3, {0, 1}, sim::CovStructure::Uniform}), config_error);
}

TEST_CASE("generated data reproduces the planted correlations") {
  sim::SimulationScenario sc;
  sc.T = 5000;
  sc.p = 10;
  std::vector<int> labels{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  sc.segments.push_back({5000, sim::CovarianceSpec{10, labels, sim::CovStructure::Uniform}});
  const auto data = sim::generate(sc, 2024);

  const Matrix cov = sample_covariance(data.values);
  Matrix corr = cov;
  for (Index i = 0; i < 10; ++i)
    for (Index j = 0; j < 10; ++j) corr(i, j) = cov(i, j) / std::sqrt(cov(i, i) * cov(j, j));

  double between_sum = 0.0;
  int between_count = 0;
  for (Index i = 0; i < 10; ++i) {
    for (Index j = 0; j < 10; ++j) {
      if (i == j) continue;
      const bool same = labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)];
      if (same) {
        CHECK(corr(i, j) == Catch::Approx(0.75).margin(0.03));
      } else {
        CHECK(corr(i, j) == Catch::Approx(0.20).margin(0.05));
        between_sum += corr(i, j);
        ++between_count;
      }
    }
  }
  // No systematic bias in the between-cluster level.
  CHECK(between_sum / between_count == Catch::Approx(0.20).margin(0.015));
}

TEST_CASE("generation is deterministic in the seed") {
  const auto a = sim::generate(2, 7, 20, std::nullopt);
  const auto b = sim::generate(2, 7, 20, std::nullopt);
  CHECK(a.values == b.values);
  const auto c = sim::generate(2, 8, 20, std::nullopt);
  CHECK(a.values != c.values);
}

TEST_CASE("scenario blueprints match their definitions") {
  const auto s2 = sim::make_scenario(2, 1);
  CHECK(s2.T == 200);
  CHECK(s2.p == 400);
  CHECK(s2.change_points == std::vector<long>{100});
  REQUIRE(s2.segments.size() == 2);
  CHECK(label_count(s2.segments[0].covariance.labels) == 2);
  CHECK(label_count(s2.segments[1].covariance.labels) == 2);
  CHECK(s2.segments[0].covariance.labels != s2.segments[1].covariance.labels);

  const auto s3 = sim::make_scenario(3, 1);
  REQUIRE(s3.segments.size() == 4);
  CHECK(label_count(s3.segments[0].covariance.labels) == 3);
  CHECK(label_count(s3.segments[1].covariance.labels) == 2);
  CHECK(label_count(s3.segments[2].covariance.labels) == 2);
  CHECK(label_count(s3.segments[3].covariance.labels) == 3);

  const auto s4 = sim::make_scenario(4, 1);
  CHECK(s4.change_points == std::vector<long>{200, 400});
  CHECK(s4.segments[0].covariance.structure == sim::CovStructure::Decay);

  const auto s5 = sim::make_scenario(5, 1);
  REQUIRE(s5.segments.size() == 3);
  CHECK(s5.segments[0].covariance.labels == s5.segments[2].covariance.labels);
  CHECK(s5.segments[0].covariance.labels != s5.segments[1].covariance.labels);

  // Overrides rescale dimensions; change points scale with T.
  const auto desk = sim::make_scenario(2, 1, 80, 400);
  CHECK(desk.p == 80);
  CHECK(desk.T == 400);
  CHECK(desk.change_points == std::vector<long>{200});

  CHECK_THROWS_AS(sim::make_scenario(6, 1), config_error);
}

TEST_CASE("sim 4 swaps half of each cluster at every change point") {
  const auto s4 = sim::make_scenario(4, 9, 40, std::nullopt);
  for (std::size_t seg = 0; seg + 1 < s4.segments.size(); ++seg) {
    const auto& before = s4.segments[seg].covariance.labels;
    const auto& after = s4.segments[seg + 1].covariance.labels;
    int moved = 0;
    for (std::size_t j = 0; j < before.size(); ++j)
      if (before[j] != after[j]) ++moved;
    CHECK(moved == 20);  // half of 40, half from each cluster
    CHECK(label_count(after) == 2);
  }
}

TEST_CASE("ridge repair restores positive definiteness") {
  Matrix bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
  const double ridge = sim::ensure_positive_definite(bad);
  CHECK(ridge == Catch::Approx(1.0 + 1e-8).epsilon(1e-6));
  Eigen::LLT<Matrix> llt(bad);
  CHECK(llt.info() == Eigen::Success);

  Matrix good(2, 2);
  good << 1.0, 0.2, 0.2, 1.0;
  CHECK(sim::ensure_positive_definite(good) == 0.0);
  CHECK(good(0, 0) == 1.0);

  // The two shipped structures stay positive definite without repair.
  for (int p : {8, 16, 32, 64}) {
    std::vector<int> labels(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) labels[static_cast<std::size_t>(j)] = j % 2;
    for (auto structure : {sim::CovStructure::Uniform, sim::CovStructure::Decay}) {
      const auto sig = sim::build_sigma({p, labels, structure});
      Eigen::LLT<Matrix> check(sig.sigma);
      CHECK(check.info() == Eigen::Success);
    }
  }
}

TEST_CASE("hausdorff matches hand-evaluated cases") {
  CHECK(sim::hausdorff({100}, {100}, 200) == 0.0);
  CHECK(sim::hausdorff({100}, {110}, 200) == Catch::Approx(0.1).epsilon(1e-15));
  CHECK_FALSE(sim::hausdorff({}, {100}, 200).has_value());
  CHECK_FALSE(sim::hausdorff({100}, {}, 200).has_value());
}

TEST_CASE("hausdorff matches the brute-force oracle on random configurations") {
  SplitMix64 rng(2400);
  for (int trial = 0; trial < 1000; ++trial) {
    const long T = 50 + static_cast<long>(rng.below(500));
    auto draw = [&](std::size_t n) {
      std::vector<long> q;
      for (std::size_t i = 0; i < n; ++i) q.push_back(1 + static_cast<long>(rng.below(static_cast<std::uint64_t>(T - 1))));
      std::sort(q.begin(), q.end());
      q.erase(std::unique(q.begin(), q.end()), q.end());
      return q;
    };
    const auto truth = draw(1 + rng.below(5));
    const auto detected = draw(1 + rng.below(5));

    // Independent n_s computation.
    long n_s = truth.front();
    for (std::size_t i = 0; i + 1 < truth.size(); ++i) n_s = std::max(n_s, truth[i + 1] - truth[i]);
    n_s = std::max(n_s, T - truth.back());
    const double expected = static_cast<double>(testsup::hausdorff_oracle(truth, detected)) /
                            static_cast<double>(n_s);
    CHECK(sim::hausdorff(truth, detected, T) == expected);

    CHECK(sim::unscaled_hausdorff(truth, detected) == sim::unscaled_hausdorff(detected, truth));
  }
}

TEST_CASE("tp/fp matching is one-to-one and nearest-first") {
  CHECK(sim::tp_fp({100}, {100}, 10).tp == 1);
  CHECK(sim::tp_fp({100}, {100}, 10).fp == 0);
  CHECK(sim::tp_fp({100}, {85}, 10).tp == 0);
  CHECK(sim::tp_fp({100}, {85}, 10).fp == 1);

  const auto both = sim::tp_fp({100}, {95, 105}, 10);
  CHECK(both.tp == 1);
  CHECK(both.fp == 1);

  SplitMix64 rng(2500);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<long> truth, detected;
    for (std::size_t i = 0; i < 1 + rng.below(4); ++i) truth.push_back(static_cast<long>(rng.below(300)));
    for (std::size_t i = 0; i < rng.below(5); ++i) detected.push_back(static_cast<long>(rng.below(300)));
    std::sort(truth.begin(), truth.end());
    std::sort(detected.begin(), detected.end());
    const auto counts = sim::tp_fp(truth, detected, 10);
    CHECK(counts.tp <= static_cast<long>(std::min(truth.size(), detected.size())));
    CHECK(counts.fp == static_cast<long>(detected.size()) - counts.tp);
    CHECK(counts.tp >= 0);
  }
}

TEST_CASE("sample covariance shifts across a planted change but not within a segment") {
  sim::SimulationScenario sc;
  sc.T = 4000;
  sc.p = 10;
  sc.change_points = {2000};
  std::vector<int> first{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  std::vector<int> second{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  sc.segments.push_back({2000, sim::CovarianceSpec{10, first, sim::CovStructure::Uniform}});
  sc.segments.push_back({2000, sim::CovarianceSpec{10, second, sim::CovStructure::Uniform}});
  const auto data = sim::generate(sc, 26);

  const Matrix seg1a = data.values.topRows(1000);
  const Matrix seg1b = data.values.middleRows(1000, 1000);
  const Matrix seg2 = data.values.bottomRows(2000);

  const double within = (sample_covariance(seg1a) - sample_covariance(seg1b)).norm();
  const double across =
      (sample_covariance(data.values.topRows(2000)) - sample_covariance(seg2)).norm();
  CHECK(across > 3.0 * within);
}
