#pragma once

// Device-to-device translation fitted from unlabeled, unpaired windows by
// matching second-order statistics. Source samples are mapped as
//
//   x' = A (x - mean_src) + mean_tgt
//
// where A = diag(sd_tgt / sd_src) in diagonal mode and
// A = cov_tgt^{1/2} cov_src^{-1/2} in full mode. Statistics pool every sample
// of every window per channel.

#include "edgesel/core.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <span>

namespace edgesel {

enum class AlignmentMode { kDiagonal, kFull };

std::string_view to_string(AlignmentMode mode);
AlignmentMode parse_alignment_mode(std::string_view text);

inline constexpr int kOperatorVersion = 1;

struct AlignmentOptions {
  AlignmentMode mode = AlignmentMode::kDiagonal;
  std::size_t min_samples = 100;
  /// Adds (1e-6 * trace / C) to each covariance diagonal before factorizing.
  bool regularize = true;
};

/// Pooled per-channel moments of a batch of windows.
struct ChannelStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::size_t count = 0;
};

ChannelStats pooled_stats(std::span<const SensorWindow> windows);

class TranslationOperator {
 public:
  static TranslationOperator identity(DeviceId source, DeviceId target, int channels);

  TranslationOperator(DeviceId source, DeviceId target, AlignmentMode mode,
                      ChannelStats source_stats, ChannelStats target_stats,
                      bool regularize);

  DeviceId source() const noexcept { return source_; }
  DeviceId target() const noexcept { return target_; }
  AlignmentMode mode() const noexcept { return mode_; }
  bool is_identity() const noexcept { return identity_; }
  int channels() const noexcept { return static_cast<int>(mean_src_.size()); }

  const Eigen::VectorXd& mean_source() const noexcept { return mean_src_; }
  const Eigen::VectorXd& mean_target() const noexcept { return mean_tgt_; }
  const Eigen::MatrixXd& cov_source() const noexcept { return cov_src_; }
  const Eigen::MatrixXd& cov_target() const noexcept { return cov_tgt_; }
  /// The linear part A.
  const Eigen::MatrixXd& linear() const noexcept { return linear_; }
  /// Offset b with x' = A x + b.
  Eigen::VectorXd offset() const { return mean_tgt_ - linear_ * mean_src_; }

  bool operator==(const TranslationOperator& other) const;

 private:
  TranslationOperator() = default;
  friend TranslationOperator load_operator(const std::filesystem::path&);

  DeviceId source_;
  DeviceId target_;
  AlignmentMode mode_ = AlignmentMode::kDiagonal;
  bool identity_ = false;
  bool regularize_ = true;
  Eigen::VectorXd mean_src_;
  Eigen::VectorXd mean_tgt_;
  Eigen::MatrixXd cov_src_;
  Eigen::MatrixXd cov_tgt_;
  Eigen::MatrixXd linear_;
};

/// Never sees labels. Returns the identity operator when both batches come
/// from the same device.
TranslationOperator fit_alignment(std::span<const SensorWindow> source_samples,
                                  std::span<const SensorWindow> target_samples,
                                  const AlignmentOptions& options = {});

SensorWindow apply(const TranslationOperator& op, const SensorWindow& window);

/// Frechet distance between Gaussian approximations of the two batches:
/// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a^{1/2} S_b S_a^{1/2})^{1/2}).
double alignment_distance(std::span<const SensorWindow> samples_a,
                          std::span<const SensorWindow> samples_b);
double frechet_distance(const ChannelStats& a, const ChannelStats& b);

struct AlignmentDiagnostics {
  double pre_distance = 0.0;
  double post_distance = 0.0;
};

AlignmentDiagnostics diagnose(const TranslationOperator& op,
                              std::span<const SensorWindow> source_samples,
                              std::span<const SensorWindow> target_samples);

void save_operator(const TranslationOperator& op, const std::filesystem::path& path);
TranslationOperator load_operator(const std::filesystem::path& path);

}  // namespace edgesel
