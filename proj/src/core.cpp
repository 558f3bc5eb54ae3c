#include "edgesel/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace edgesel {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kZeroChannels: return "zero_channels";
    case ErrorCode::kChannelMismatch: return "channel_mismatch";
    case ErrorCode::kDeviceMismatch: return "device_mismatch";
    case ErrorCode::kInsufficientSamples: return "insufficient_samples";
    case ErrorCode::kSingularCovariance: return "singular_covariance";
    case ErrorCode::kMissingClass: return "missing_class";
    case ErrorCode::kDuplicate: return "duplicate";
    case ErrorCode::kUnknownId: return "unknown_id";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kVersion: return "version";
    case ErrorCode::kLengthMismatch: return "length_mismatch";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kConfig: return "config";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

Eigen::Index SensorWindow::expected_length() const {
  return static_cast<Eigen::Index>(std::llround(duration * sample_rate));
}

bool same_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

void validate_window(const SensorWindow& window) {
  if (window.channels() < 1) {
    throw Error(ErrorCode::kZeroChannels, "window has zero channels (C >= 1)");
  }
  if (!(window.duration > 0.0) || !(window.sample_rate > 0.0)) {
    throw Error(ErrorCode::kDimensionMismatch,
                "window duration and sample rate must be positive");
  }
  const double implied = window.duration * window.sample_rate;
  if (std::abs(implied - std::round(implied)) > 1e-9 ||
      window.length() != window.expected_length()) {
    std::ostringstream msg;
    msg << "window length " << window.length() << " != duration x rate ("
        << window.duration << " s x " << window.sample_rate << " Hz)";
    throw Error(ErrorCode::kDimensionMismatch, msg.str());
  }
  if (!window.samples.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "window contains a non-finite sample");
  }
}

ClassPosterior::ClassPosterior(std::vector<double> probs, ModelId model)
    : probs_(std::move(probs)), model_(model) {
  if (probs_.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "posterior needs K >= 2 classes");
  }
  for (double p : probs_) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "posterior entry outside [0, 1]");
    }
  }
  const double sum = std::accumulate(probs_.begin(), probs_.end(), 0.0);
  if (std::abs(sum - 1.0) > kRenormalizeTolerance) {
    std::ostringstream msg;
    msg << "posterior sums to " << sum << ", not 1";
    throw Error(ErrorCode::kInvalidArgument, msg.str());
  }
  if (sum != 1.0) {
    for (double& p : probs_) p /= sum;
  }
}

std::size_t ClassPosterior::argmax() const {
  return static_cast<std::size_t>(
      std::distance(probs_.begin(), std::max_element(probs_.begin(), probs_.end())));
}

Margin::Margin(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "margin outside [0, 1]");
  }
}

}  // namespace edgesel
