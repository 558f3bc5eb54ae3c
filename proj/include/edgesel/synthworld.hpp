#pragma once

// Synthetic multi-device world: a Markov chain of activity labels rendered as
// clean per-window signals, observed through per-device affine channels with
// slowly varying noise, plus device availability workloads.

#include "edgesel/core.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace edgesel {

struct WorldConfig {
  int num_classes = 8;
  int channels = 6;
  double sample_rate = 50.0;
  double window_duration = 1.0;
  std::size_t horizon_windows = 600;
  /// Probability of keeping the current label from one window to the next;
  /// the remaining mass is spread uniformly. Ignored when `transition` is set.
  double stay_probability = 0.9;
  /// Optional explicit K x K row-stochastic transition matrix.
  std::optional<Eigen::MatrixXd> transition;
  /// Seeds the per-class signal signatures. Fixed per world so that traces
  /// drawn with different seeds share the same class semantics.
  std::uint64_t signature_seed = 2021;
  /// Half-range of per-class channel offsets.
  double offset_spread = 1.0;
  /// Per-window jitter of the offset and relative jitter of the amplitude.
  double offset_jitter = 0.25;
  double amplitude_jitter = 0.2;
  /// Intrinsic white noise of the clean signal.
  double intrinsic_noise = 0.1;

  void validate() const;
  Eigen::MatrixXd transition_matrix() const;
  std::size_t samples_per_window() const;
  bool operator==(const WorldConfig&) const;
};

/// Per-class, per-channel signal shape: offset + amplitude * sin(2 pi f t).
struct ClassSignature {
  Eigen::VectorXd offset;
  Eigen::VectorXd amplitude;
  Eigen::VectorXd frequency;
};

struct LatentTrace {
  WorldConfig config;
  std::uint64_t seed = 0;
  std::vector<ClassSignature> signatures;
  std::vector<int> labels;
  /// One C x L clean block per window. Values are representable as float.
  std::vector<Eigen::MatrixXd> base_features;

  std::size_t num_windows() const { return labels.size(); }
  double horizon() const {
    return static_cast<double>(labels.size()) * config.window_duration;
  }
};

/// Deterministic sinusoidal modulation of a device's noise level:
/// factor(t) = 1 + amplitude * sin(2 pi t / period + phase).
struct QualityProcess {
  double period = 120.0;
  double amplitude = 0.0;
  double phase = 0.0;

  double factor(double time) const;
  bool operator==(const QualityProcess&) const = default;
};

struct DeviceProfile {
  DeviceId id;
  std::vector<double> gain;
  std::vector<double> bias;
  std::vector<double> noise_std;
  QualityProcess quality;

  /// Identity channel with the given noise level.
  static DeviceProfile identity(DeviceId id, int channels, double noise = 0.0);
  void validate(int channels) const;
  bool operator==(const DeviceProfile&) const = default;
};

std::vector<ClassSignature> make_signatures(const WorldConfig& config);

LatentTrace generate_latent(const WorldConfig& config, std::uint64_t seed);

/// samples = gain * base + bias + N(0, (noise_std * quality(t))^2), with t the
/// window midpoint. Noise is a pure function of (trace seed, device, index).
SensorWindow observe(const LatentTrace& trace, const DeviceProfile& profile,
                     std::size_t window_index);

enum class WorkloadKind { kStatic, kDynamic };

struct WorkloadConfig {
  WorkloadKind kind = WorkloadKind::kStatic;
  double availability_p = 1.0;
  std::uint64_t seed = 0;
  double horizon = 600.0;
  double epoch = 10.0;

  void validate() const;
};

/// Per-epoch, per-device availability. Devices are addressed by id value
/// 0..n-1.
class AvailabilitySchedule {
 public:
  AvailabilitySchedule() = default;
  AvailabilitySchedule(double epoch, std::size_t num_devices,
                       std::vector<std::uint8_t> flags);

  /// Every device available over the whole horizon.
  static AvailabilitySchedule always(std::size_t num_devices, double horizon,
                                     double epoch = 10.0);

  bool available(DeviceId device, double time) const;
  std::size_t num_epochs() const {
    return num_devices_ == 0 ? 0 : flags_.size() / num_devices_;
  }
  std::size_t num_devices() const { return num_devices_; }
  double epoch() const { return epoch_; }
  bool at(std::size_t epoch_index, std::size_t device) const {
    return flags_[epoch_index * num_devices_ + device] != 0;
  }

 private:
  double epoch_ = 10.0;
  std::size_t num_devices_ = 0;
  std::vector<std::uint8_t> flags_;
};

AvailabilitySchedule sample_availability(const WorkloadConfig& config,
                                         std::size_t num_devices);

/// Random-access view of per-device windows and ground truth for a run.
class SensorSource {
 public:
  virtual ~SensorSource() = default;
  virtual SensorWindow window(DeviceId device, std::size_t index) const = 0;
  virtual std::size_t num_windows() const = 0;
  virtual double window_duration() const = 0;
  virtual int true_label(std::size_t index) const = 0;
  virtual int num_classes() const = 0;
};

/// SensorSource over a latent trace and a set of device profiles.
class SyntheticWorld final : public SensorSource {
 public:
  SyntheticWorld(LatentTrace trace, std::vector<DeviceProfile> profiles);

  SensorWindow window(DeviceId device, std::size_t index) const override;
  std::size_t num_windows() const override { return trace_.num_windows(); }
  double window_duration() const override {
    return trace_.config.window_duration;
  }
  int true_label(std::size_t index) const override {
    return trace_.labels.at(index);
  }
  int num_classes() const override { return trace_.config.num_classes; }

  const LatentTrace& trace() const { return trace_; }
  const DeviceProfile& profile(DeviceId device) const;
  std::span<const DeviceProfile> profiles() const { return profiles_; }

  /// Windows [first, first + count) from one device.
  std::vector<SensorWindow> windows(DeviceId device, std::size_t first,
                                    std::size_t count) const;

 private:
  LatentTrace trace_;
  std::vector<DeviceProfile> profiles_;
};

}  // namespace edgesel
