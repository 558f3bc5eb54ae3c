#pragma once

// Shared fixtures and random generators for the test executables.

#include "edgesel/config.hpp"
#include "edgesel/experiment.hpp"

#include <algorithm>
#include <random>
#include <vector>

namespace edgesel::testing {

inline SensorWindow constant_window(DeviceId device, int channels, double value,
                                    double start = 0.0) {
  SensorWindow w;
  w.device = device;
  w.start_time = start;
  w.samples = Eigen::MatrixXd::Constant(channels, 50, value);
  return w;
}

inline SensorWindow random_window(std::mt19937_64& rng, DeviceId device, int channels,
                                  double scale = 1.0, double shift = 0.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  SensorWindow w;
  w.device = device;
  w.samples.resize(channels, 50);
  for (Eigen::Index c = 0; c < w.samples.rows(); ++c) {
    for (Eigen::Index i = 0; i < w.samples.cols(); ++i) w.samples(c, i) = shift + scale * n(rng);
  }
  return w;
}

/// Random probability vector over k classes. Entries are multiples of 1/64
/// summing to exactly 1, so ties between entries and between margins are
/// common and exact.
inline std::vector<double> random_probs(std::mt19937_64& rng, std::size_t k) {
  std::uniform_int_distribution<int> cut(0, 64);
  std::vector<int> cuts{0, 64};
  for (std::size_t i = 1; i < k; ++i) cuts.push_back(cut(rng));
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> p(k);
  for (std::size_t i = 0; i < k; ++i) p[i] = (cuts[i + 1] - cuts[i]) / 64.0;
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

/// Default scenario shrunk to a short horizon and a single seed.
inline ExperimentConfig small_config(std::size_t horizon = 100) {
  ExperimentConfig c = default_config();
  c.world.horizon_windows = horizon;
  c.model.train_windows = 600;
  c.model.unlabeled_windows = 120;
  c.seeds = {1};
  return c;
}

}  // namespace edgesel::testing
