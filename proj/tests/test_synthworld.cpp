#include "test_support.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

using namespace edgesel;

namespace {

// Stationary distribution by solving (P^T - I) pi = 0 with sum(pi) = 1.
Eigen::VectorXd stationary(const Eigen::MatrixXd& P) {
  const auto K = P.rows();
  Eigen::MatrixXd A(K + 1, K);
  A.topRows(K) = P.transpose() - Eigen::MatrixXd::Identity(K, K);
  A.row(K).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(K + 1);
  b[K] = 1.0;
  return A.colPivHouseholderQr().solve(b);
}

LatentTrace flat_trace(int channels, std::size_t windows, double value) {
  LatentTrace t;
  t.config.channels = channels;
  t.config.horizon_windows = windows;
  t.seed = 5;
  t.labels.assign(windows, 0);
  t.base_features.assign(windows, Eigen::MatrixXd::Constant(channels, 50, value));
  return t;
}

double binomial_at_least(int n, int k_min, double p) {
  double total = 0.0;
  for (int k = k_min; k <= n; ++k) {
    total += std::tgamma(n + 1) / (std::tgamma(k + 1) * std::tgamma(n - k + 1)) *
             std::pow(p, k) * std::pow(1 - p, n - k);
  }
  return total;
}

}  // namespace

TEST_SUITE("synthworld") {
  TEST_CASE("latent traces are deterministic in the seed") {
    WorldConfig cfg;
    cfg.horizon_windows = 50;
    const auto a = generate_latent(cfg, 7);
    const auto b = generate_latent(cfg, 7);
    CHECK(a.labels == b.labels);
    REQUIRE(a.base_features.size() == b.base_features.size());
    for (std::size_t i = 0; i < a.base_features.size(); ++i) {
      CHECK(same_matrix(a.base_features[i], b.base_features[i]));
    }
    const auto c = generate_latent(cfg, 8);
    CHECK(c.labels != a.labels);
  }

  TEST_CASE("absorbing chain keeps one label") {
    WorldConfig cfg;
    cfg.transition = Eigen::MatrixXd::Identity(8, 8);
    const auto t = generate_latent(cfg, 3);
    for (int l : t.labels) CHECK(l == t.labels.front());
  }

  TEST_CASE("label histogram follows the stationary distribution") {
    WorldConfig cfg;
    cfg.num_classes = 8;
    cfg.horizon_windows = 600;
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(0.2, 1.0);
    Eigen::MatrixXd P(8, 8);
    for (int r = 0; r < 8; ++r) {
      for (int c = 0; c < 8; ++c) P(r, c) = u(rng) * (c < 3 ? 3.0 : 1.0);
      P.row(r) /= P.row(r).sum();
    }
    cfg.transition = P;
    const Eigen::VectorXd pi = stationary(P);
    const auto t = generate_latent(cfg, 99);
    Eigen::VectorXd hist = Eigen::VectorXd::Zero(8);
    for (int l : t.labels) hist[l] += 1.0;
    hist /= static_cast<double>(t.labels.size());
    for (int k = 0; k < 8; ++k) CHECK(std::abs(hist[k] - pi[k]) <= 0.10);

    // The default sticky chain mixes slowly, so it needs a longer run.
    WorldConfig sticky;
    sticky.horizon_windows = 6000;
    const Eigen::VectorXd pi2 = stationary(sticky.transition_matrix());
    const auto t2 = generate_latent(sticky, 4);
    Eigen::VectorXd h2 = Eigen::VectorXd::Zero(8);
    for (int l : t2.labels) h2[l] += 1.0 / 6000.0;
    for (int k = 0; k < 8; ++k) CHECK(std::abs(h2[k] - pi2[k]) <= 0.10);
  }

  TEST_CASE("degenerate world configs are rejected") {
    WorldConfig cfg;
    cfg.num_classes = 1;
    CHECK_THROWS_AS(generate_latent(cfg, 1), Error);
    cfg = {};
    cfg.horizon_windows = 0;
    CHECK_THROWS_AS(generate_latent(cfg, 1), Error);
  }

  TEST_CASE("noiseless identity observation returns the base signal") {
    WorldConfig cfg;
    cfg.horizon_windows = 20;
    const auto t = generate_latent(cfg, 12);
    const auto profile = DeviceProfile::identity(DeviceId(0), cfg.channels, 0.0);
    for (std::size_t i = 0; i < t.num_windows(); ++i) {
      CHECK(same_matrix(observe(t, profile, i).samples, t.base_features[i]));
    }
  }

  TEST_CASE("affine observation arithmetic") {
    const auto t = flat_trace(2, 1, 0.5);
    DeviceProfile p;
    p.id = DeviceId(3);
    p.gain = {2.0, 2.0};
    p.bias = {1.0, 1.0};
    p.noise_std = {0.0, 0.0};
    const auto w = observe(t, p, 0);
    CHECK(w.device == DeviceId(3));
    CHECK((w.samples.array() == 2.0).all());
  }

  TEST_CASE("observation noise has the configured spread") {
    const auto t = flat_trace(1, 200, 0.0);
    const auto p = DeviceProfile::identity(DeviceId(0), 1, 0.1);
    double sum = 0.0;
    double sq = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < t.num_windows(); ++i) {
      const auto w = observe(t, p, i);
      for (Eigen::Index k = 0; k < w.samples.cols(); ++k) {
        sum += w.samples(0, k);
        sq += w.samples(0, k) * w.samples(0, k);
        ++n;
      }
    }
    REQUIRE(n == 10000);
    const double mean = sum / static_cast<double>(n);
    const double sd = std::sqrt(sq / static_cast<double>(n) - mean * mean);
    CHECK(sd >= 0.097);
    CHECK(sd <= 0.103);
  }

  TEST_CASE("quality process scales the noise over time") {
    QualityProcess q{120.0, 0.5, 0.0};
    CHECK(q.factor(0.0) == doctest::Approx(1.0));
    CHECK(q.factor(30.0) == doctest::Approx(1.5));
    CHECK(q.factor(90.0) == doctest::Approx(0.5));
  }

  TEST_CASE("full availability schedule") {
    WorkloadConfig w;
    w.availability_p = 1.0;
    const auto s = sample_availability(w, 3);
    for (std::size_t e = 0; e < s.num_epochs(); ++e) {
      for (std::size_t d = 0; d < 3; ++d) CHECK(s.at(e, d));
    }
    w.kind = WorkloadKind::kStatic;
    w.availability_p = 0.7;
    CHECK_THROWS_AS(sample_availability(w, 3), Error);
  }

  TEST_CASE("availability statistics at 1e4 epochs") {
    for (double p : {0.7, 0.9}) {
      WorkloadConfig w;
      w.kind = WorkloadKind::kDynamic;
      w.availability_p = p;
      w.seed = 31;
      w.epoch = 1.0;
      w.horizon = 10000.0;
      const auto s = sample_availability(w, 3);
      REQUIRE(s.num_epochs() == 10000);
      std::vector<double> marginal(3, 0.0);
      double two_plus = 0.0;
      double zero = 0.0;
      for (std::size_t e = 0; e < s.num_epochs(); ++e) {
        int up = 0;
        for (std::size_t d = 0; d < 3; ++d) {
          if (s.at(e, d)) {
            ++up;
            marginal[d] += 1e-4;
          }
        }
        if (up >= 2) two_plus += 1e-4;
        if (up == 0) zero += 1e-4;
      }
      for (double m : marginal) CHECK(std::abs(m - p) <= 0.01);
      CHECK(std::abs(two_plus - binomial_at_least(3, 2, p)) <= 0.01);
      CHECK(std::abs(zero - std::pow(1 - p, 3)) <= 0.005);
    }
  }

  TEST_CASE("schedule lookup is per epoch") {
    AvailabilitySchedule s(10.0, 2, {1, 0, 0, 1});
    CHECK(s.available(DeviceId(0), 0.0));
    CHECK(s.available(DeviceId(0), 9.5));
    CHECK_FALSE(s.available(DeviceId(0), 10.0));
    CHECK(s.available(DeviceId(1), 10.0));
    CHECK(s.available(DeviceId(1), 500.0));
    CHECK_FALSE(s.available(DeviceId(2), 0.0));
  }

  TEST_CASE("synthetic world serves profiles by id") {
    WorldConfig cfg;
    cfg.horizon_windows = 5;
    std::vector<DeviceProfile> profiles{DeviceProfile::identity(DeviceId(1), 6, 0.1),
                                        DeviceProfile::identity(DeviceId(0), 6, 0.1)};
    const SyntheticWorld world(generate_latent(cfg, 2), profiles);
    CHECK(world.profiles().front().id == DeviceId(0));
    CHECK(world.window(DeviceId(1), 3).device == DeviceId(1));
    CHECK(world.windows(DeviceId(0), 1, 3).size() == 3);
    CHECK_THROWS_AS(world.window(DeviceId(4), 0), Error);
    profiles.push_back(DeviceProfile::identity(DeviceId(0), 6, 0.1));
    CHECK_THROWS_AS(SyntheticWorld(generate_latent(cfg, 2), profiles), Error);
  }
}
