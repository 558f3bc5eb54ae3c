#pragma once

// Shared value types for the edgesel runtime: identifiers, sensor windows,
// class posteriors and execution pipelines.

#include <Eigen/Core>

#include <compare>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace edgesel {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kNonFinite,
  kZeroChannels,
  kChannelMismatch,
  kDeviceMismatch,
  kInsufficientSamples,
  kSingularCovariance,
  kMissingClass,
  kDuplicate,
  kUnknownId,
  kParse,
  kVersion,
  kLengthMismatch,
  kIo,
  kConfig,
};

std::string_view to_string(ErrorCode code);

/// Every failure in the library surfaces as an Error carrying a stable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Opaque small-integer identifier. The tag keeps device, model and pipeline
/// ids from being mixed up.
template <typename Tag>
class Id {
 public:
  constexpr Id() = default;
  constexpr explicit Id(std::uint32_t value) : value_(value) {}
  constexpr std::uint32_t value() const noexcept { return value_; }
  constexpr auto operator<=>(const Id&) const = default;

 private:
  std::uint32_t value_ = 0;
};

using DeviceId = Id<struct DeviceTag>;
using ModelId = Id<struct ModelTag>;
using PipelineId = Id<struct PipelineTag>;

struct IdHash {
  template <typename Tag>
  std::size_t operator()(Id<Tag> id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value());
  }
};

/// One fixed-duration multichannel window from one device. `samples` is
/// channels x length.
struct SensorWindow {
  DeviceId device;
  double start_time = 0.0;
  double duration = 1.0;
  double sample_rate = 50.0;
  Eigen::MatrixXd samples;

  Eigen::Index channels() const { return samples.rows(); }
  Eigen::Index length() const { return samples.cols(); }
  /// Number of samples per channel implied by duration and rate.
  Eigen::Index expected_length() const;
};

/// Exact element-wise equality that tolerates differing shapes.
bool same_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Throws Error naming the violated invariant (zero channels, length not equal
/// to duration * rate, non-finite sample).
void validate_window(const SensorWindow& window);

/// Normalized probability vector over K >= 2 classes. Sums deviating from 1 by
/// at most 1e-6 are renormalized; anything larger is rejected.
class ClassPosterior {
 public:
  static constexpr double kRenormalizeTolerance = 1e-6;

  ClassPosterior(std::vector<double> probs, ModelId model);

  std::span<const double> probs() const noexcept { return probs_; }
  double operator[](std::size_t k) const { return probs_[k]; }
  std::size_t num_classes() const noexcept { return probs_.size(); }
  ModelId model() const noexcept { return model_; }
  /// Index of the largest entry; lowest index on ties.
  std::size_t argmax() const;

  bool operator==(const ClassPosterior&) const = default;

 private:
  std::vector<double> probs_;
  ModelId model_;
};

/// Gap between the two largest posterior entries, in [0, 1].
class Margin {
 public:
  explicit Margin(double value);
  double value() const noexcept { return value_; }
  auto operator<=>(const Margin&) const = default;

 private:
  double value_;
};

class TranslationOperator;

/// device -> optional translation -> model. A pipeline whose device differs
/// from the model's training device needs a translation; until the operator
/// is published (translation_ready_at) the pipeline cannot run through it.
struct Pipeline {
  PipelineId id;
  DeviceId device;
  ModelId model;
  DeviceId training_device;
  std::shared_ptr<const TranslationOperator> translation;
  double translation_ready_at = 0.0;
  bool active = false;

  bool needs_translation() const noexcept { return device != training_device; }
  bool translation_ready(double time) const noexcept {
    return !needs_translation() ||
           (translation != nullptr && time >= translation_ready_at);
  }
};

}  // namespace edgesel
