#include "edgesel/synthworld.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace edgesel {
namespace {

std::mt19937_64 make_rng(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  for (std::uint64_t p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

constexpr std::uint64_t kLatentStream = 0x4c41;
constexpr std::uint64_t kNoiseStream = 0x4e53;
constexpr std::uint64_t kAvailabilityStream = 0x4156;

}  // namespace

void WorldConfig::validate() const {
  if (num_classes < 2) {
    throw Error(ErrorCode::kInvalidArgument, "world needs K >= 2 classes");
  }
  if (channels < 1) {
    throw Error(ErrorCode::kZeroChannels, "world needs C >= 1 channels");
  }
  if (horizon_windows < 1) {
    throw Error(ErrorCode::kInvalidArgument, "world horizon must be >= 1 window");
  }
  if (!(sample_rate > 0.0) || !(window_duration > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "sample rate and window duration must be positive");
  }
  const double implied = sample_rate * window_duration;
  if (std::abs(implied - std::round(implied)) > 1e-9) {
    throw Error(ErrorCode::kDimensionMismatch,
                "window duration x sample rate must be an integer");
  }
  if (transition) {
    const auto& t = *transition;
    if (t.rows() != num_classes || t.cols() != num_classes) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "transition matrix must be K x K");
    }
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      if ((t.row(r).array() < 0.0).any() ||
          std::abs(t.row(r).sum() - 1.0) > 1e-9) {
        throw Error(ErrorCode::kInvalidArgument,
                    "transition matrix must be row-stochastic");
      }
    }
  } else if (!(stay_probability >= 0.0 && stay_probability <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "stay_probability outside [0, 1]");
  }
  if (offset_spread < 0.0 || offset_jitter < 0.0 || amplitude_jitter < 0.0 ||
      intrinsic_noise < 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "signal spread and jitter parameters must be non-negative");
  }
}

Eigen::MatrixXd WorldConfig::transition_matrix() const {
  if (transition) return *transition;
  const double off = num_classes > 1
                         ? (1.0 - stay_probability) / (num_classes - 1)
                         : 0.0;
  Eigen::MatrixXd t = Eigen::MatrixXd::Constant(num_classes, num_classes, off);
  t.diagonal().setConstant(stay_probability);
  return t;
}

std::size_t WorldConfig::samples_per_window() const {
  return static_cast<std::size_t>(std::llround(sample_rate * window_duration));
}

bool WorldConfig::operator==(const WorldConfig& o) const {
  const bool same_transition =
      transition.has_value() == o.transition.has_value() &&
      (!transition || same_matrix(*transition, *o.transition));
  return num_classes == o.num_classes && channels == o.channels &&
         sample_rate == o.sample_rate && window_duration == o.window_duration &&
         horizon_windows == o.horizon_windows &&
         stay_probability == o.stay_probability && same_transition &&
         signature_seed == o.signature_seed &&
         offset_spread == o.offset_spread && offset_jitter == o.offset_jitter &&
         amplitude_jitter == o.amplitude_jitter &&
         intrinsic_noise == o.intrinsic_noise;
}

double QualityProcess::factor(double time) const {
  if (amplitude == 0.0 || period <= 0.0) return 1.0;
  return 1.0 + amplitude * std::sin(2.0 * std::numbers::pi * time / period + phase);
}

DeviceProfile DeviceProfile::identity(DeviceId id, int channels, double noise) {
  const auto n = static_cast<std::size_t>(channels);
  return DeviceProfile{id, std::vector<double>(n, 1.0), std::vector<double>(n, 0.0),
                       std::vector<double>(n, noise), QualityProcess{}};
}

void DeviceProfile::validate(int channels) const {
  const auto n = static_cast<std::size_t>(channels);
  if (gain.size() != n || bias.size() != n || noise_std.size() != n) {
    std::ostringstream msg;
    msg << "device " << id.value() << " profile must have " << n
        << " gain/bias/noise_std entries";
    throw Error(ErrorCode::kChannelMismatch, msg.str());
  }
  for (std::size_t c = 0; c < n; ++c) {
    if (gain[c] == 0.0 || !std::isfinite(gain[c]) || !std::isfinite(bias[c])) {
      throw Error(ErrorCode::kInvalidArgument,
                  "device gain must be finite and non-zero");
    }
    if (!std::isfinite(noise_std[c]) || noise_std[c] < 0.0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "device noise_std must be finite and >= 0");
    }
  }
  if (!(quality.amplitude >= 0.0 && quality.amplitude <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "quality amplitude must lie in [0, 1]");
  }
}

std::vector<ClassSignature> make_signatures(const WorldConfig& config) {
  config.validate();
  auto rng = make_rng({config.signature_seed});
  std::uniform_real_distribution<double> offset(-config.offset_spread,
                                                config.offset_spread);
  std::uniform_real_distribution<double> amplitude(0.2, 1.0);
  std::uniform_real_distribution<double> frequency(0.5, 5.0);

  std::vector<ClassSignature> out(static_cast<std::size_t>(config.num_classes));
  for (auto& sig : out) {
    sig.offset.resize(config.channels);
    sig.amplitude.resize(config.channels);
    sig.frequency.resize(config.channels);
    for (int c = 0; c < config.channels; ++c) {
      sig.offset[c] = offset(rng);
      sig.amplitude[c] = amplitude(rng);
      sig.frequency[c] = frequency(rng);
    }
  }
  for (std::size_t a = 0; a < out.size(); ++a) {
    for (std::size_t b = a + 1; b < out.size(); ++b) {
      if (out[a].offset == out[b].offset &&
          out[a].amplitude == out[b].amplitude) {
        throw Error(ErrorCode::kInvalidArgument,
                    "class signatures are not pairwise distinct");
      }
    }
  }
  return out;
}

LatentTrace generate_latent(const WorldConfig& config, std::uint64_t seed) {
  LatentTrace trace;
  trace.config = config;
  trace.seed = seed;
  trace.signatures = make_signatures(config);

  const Eigen::MatrixXd transition = config.transition_matrix();
  const auto K = config.num_classes;
  const auto C = config.channels;
  const auto L = static_cast<Eigen::Index>(config.samples_per_window());
  auto rng = make_rng({seed, kLatentStream});

  std::uniform_int_distribution<int> first_label(0, K - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> normal(0.0, 1.0);

  trace.labels.reserve(config.horizon_windows);
  trace.base_features.reserve(config.horizon_windows);
  int label = first_label(rng);
  for (std::size_t w = 0; w < config.horizon_windows; ++w) {
    if (w > 0) {
      const double u = unit(rng);
      double acc = 0.0;
      int next = K - 1;
      for (int k = 0; k < K; ++k) {
        acc += transition(label, k);
        if (u < acc) {
          next = k;
          break;
        }
      }
      label = next;
    }
    trace.labels.push_back(label);

    const ClassSignature& sig = trace.signatures[static_cast<std::size_t>(label)];
    Eigen::MatrixXd block(C, L);
    for (int c = 0; c < C; ++c) {
      const double offset = sig.offset[c] + config.offset_jitter * normal(rng);
      const double amp =
          sig.amplitude[c] * (1.0 + config.amplitude_jitter * normal(rng));
      const double phi = phase(rng);
      for (Eigen::Index i = 0; i < L; ++i) {
        const double t = static_cast<double>(i) / config.sample_rate;
        const double v =
            offset + amp * std::sin(2.0 * std::numbers::pi * sig.frequency[c] * t + phi) +
            config.intrinsic_noise * normal(rng);
        block(c, i) = static_cast<double>(static_cast<float>(v));
      }
    }
    trace.base_features.push_back(std::move(block));
  }
  return trace;
}

SensorWindow observe(const LatentTrace& trace, const DeviceProfile& profile,
                     std::size_t window_index) {
  if (window_index >= trace.num_windows()) {
    std::ostringstream msg;
    msg << "window index " << window_index << " outside horizon of "
        << trace.num_windows() << " windows";
    throw Error(ErrorCode::kInvalidArgument, msg.str());
  }
  const auto& config = trace.config;
  profile.validate(config.channels);

  SensorWindow w;
  w.device = profile.id;
  w.duration = config.window_duration;
  w.sample_rate = config.sample_rate;
  w.start_time = static_cast<double>(window_index) * config.window_duration;

  const Eigen::MatrixXd& base = trace.base_features[window_index];
  w.samples.resize(base.rows(), base.cols());
  const double quality = profile.quality.factor(w.start_time + 0.5 * w.duration);
  auto rng = make_rng({trace.seed, kNoiseStream, profile.id.value(), window_index});
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index c = 0; c < base.rows(); ++c) {
    const auto ci = static_cast<std::size_t>(c);
    const double sigma = profile.noise_std[ci] * quality;
    for (Eigen::Index i = 0; i < base.cols(); ++i) {
      double v = profile.gain[ci] * base(c, i) + profile.bias[ci];
      if (sigma > 0.0) v += sigma * normal(rng);
      w.samples(c, i) = v;
    }
  }
  return w;
}

void WorkloadConfig::validate() const {
  if (!(availability_p > 0.0 && availability_p <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "availability_p must lie in (0, 1]");
  }
  if (kind == WorkloadKind::kStatic && availability_p != 1.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "static workload requires availability_p = 1.0");
  }
  if (!(epoch > 0.0) || !(horizon > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "workload epoch and horizon must be positive");
  }
}

AvailabilitySchedule::AvailabilitySchedule(double epoch, std::size_t num_devices,
                                           std::vector<std::uint8_t> flags)
    : epoch_(epoch), num_devices_(num_devices), flags_(std::move(flags)) {
  if (!(epoch_ > 0.0) || num_devices_ == 0 || flags_.size() % num_devices_ != 0) {
    throw Error(ErrorCode::kInvalidArgument, "malformed availability schedule");
  }
}

AvailabilitySchedule AvailabilitySchedule::always(std::size_t num_devices,
                                                  double horizon, double epoch) {
  const auto epochs = static_cast<std::size_t>(std::ceil(horizon / epoch - 1e-9));
  return AvailabilitySchedule(epoch, num_devices,
                              std::vector<std::uint8_t>(std::max<std::size_t>(epochs, 1) * num_devices, 1));
}

bool AvailabilitySchedule::available(DeviceId device, double time) const {
  const auto d = static_cast<std::size_t>(device.value());
  if (d >= num_devices_ || time < 0.0) return false;
  auto e = static_cast<std::size_t>(std::floor(time / epoch_ + 1e-9));
  // Past the sampled horizon the last epoch persists.
  e = std::min(e, num_epochs() - 1);
  return at(e, d);
}

AvailabilitySchedule sample_availability(const WorkloadConfig& config,
                                         std::size_t num_devices) {
  config.validate();
  if (num_devices < 1) {
    throw Error(ErrorCode::kInvalidArgument, "availability needs >= 1 device");
  }
  const auto epochs = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(config.horizon / config.epoch - 1e-9)));
  std::vector<std::uint8_t> flags(epochs * num_devices, 1);
  if (config.availability_p < 1.0) {
    auto rng = make_rng({config.seed, kAvailabilityStream});
    std::bernoulli_distribution up(config.availability_p);
    for (auto& f : flags) f = up(rng) ? 1 : 0;
  }
  return AvailabilitySchedule(config.epoch, num_devices, std::move(flags));
}

SyntheticWorld::SyntheticWorld(LatentTrace trace, std::vector<DeviceProfile> profiles)
    : trace_(std::move(trace)), profiles_(std::move(profiles)) {
  std::sort(profiles_.begin(), profiles_.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < profiles_.size(); ++i) {
    profiles_[i].validate(trace_.config.channels);
    if (i > 0 && profiles_[i].id == profiles_[i - 1].id) {
      throw Error(ErrorCode::kDuplicate, "duplicate device profile id");
    }
  }
}

const DeviceProfile& SyntheticWorld::profile(DeviceId device) const {
  auto it = std::lower_bound(profiles_.begin(), profiles_.end(), device,
                             [](const auto& p, DeviceId id) { return p.id < id; });
  if (it == profiles_.end() || it->id != device) {
    std::ostringstream msg;
    msg << "no profile for device " << device.value();
    throw Error(ErrorCode::kUnknownId, msg.str());
  }
  return *it;
}

SensorWindow SyntheticWorld::window(DeviceId device, std::size_t index) const {
  return observe(trace_, profile(device), index);
}

std::vector<SensorWindow> SyntheticWorld::windows(DeviceId device,
                                                  std::size_t first,
                                                  std::size_t count) const {
  std::vector<SensorWindow> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(window(device, first + i));
  return out;
}

}  // namespace edgesel
