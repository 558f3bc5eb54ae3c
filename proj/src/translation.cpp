#include "edgesel/translation.hpp"

#include "edgesel/dataset.hpp"
#include "json_support.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace edgesel {
namespace {

double regularizer(const Eigen::MatrixXd& cov) {
  return 1e-6 * cov.trace() / static_cast<double>(cov.rows());
}

// Symmetric square root (or inverse square root) of a PSD matrix.
Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m, bool inverse) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(0.0);
  if (inverse) {
    ev = ev.cwiseSqrt().cwiseInverse();
  } else {
    ev = ev.cwiseSqrt();
  }
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

void check_batch(std::span<const SensorWindow> windows, std::size_t min_count,
                 const char* side) {
  if (windows.size() < min_count) {
    throw Error(ErrorCode::kInsufficientSamples,
                std::string(side) + " batch has " + std::to_string(windows.size()) +
                    " windows; need at least " + std::to_string(min_count));
  }
}

}  // namespace

std::string_view to_string(AlignmentMode mode) {
  return mode == AlignmentMode::kDiagonal ? "diagonal" : "full";
}

AlignmentMode parse_alignment_mode(std::string_view text) {
  if (text == "diagonal") return AlignmentMode::kDiagonal;
  if (text == "full") return AlignmentMode::kFull;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown alignment mode '" + std::string(text) + "'");
}

ChannelStats pooled_stats(std::span<const SensorWindow> windows) {
  if (windows.empty()) {
    throw Error(ErrorCode::kInsufficientSamples, "no windows to pool");
  }
  const auto C = windows.front().channels();
  ChannelStats stats;
  stats.mean = Eigen::VectorXd::Zero(C);
  for (const auto& w : windows) {
    if (w.channels() != C) {
      throw Error(ErrorCode::kChannelMismatch, "windows disagree on channel count");
    }
    stats.mean += w.samples.rowwise().sum();
    stats.count += static_cast<std::size_t>(w.length());
  }
  if (stats.count == 0) {
    throw Error(ErrorCode::kInsufficientSamples, "windows hold no samples");
  }
  const auto n = static_cast<double>(stats.count);
  stats.mean /= n;
  stats.covariance = Eigen::MatrixXd::Zero(C, C);
  for (const auto& w : windows) {
    const Eigen::MatrixXd centered = w.samples.colwise() - stats.mean;
    stats.covariance.noalias() += centered * centered.transpose();
  }
  stats.covariance /= n;
  return stats;
}

TranslationOperator TranslationOperator::identity(DeviceId source, DeviceId target,
                                                  int channels) {
  TranslationOperator op;
  op.source_ = source;
  op.target_ = target;
  op.identity_ = true;
  op.mean_src_ = Eigen::VectorXd::Zero(channels);
  op.mean_tgt_ = Eigen::VectorXd::Zero(channels);
  op.cov_src_ = Eigen::MatrixXd::Identity(channels, channels);
  op.cov_tgt_ = Eigen::MatrixXd::Identity(channels, channels);
  op.linear_ = Eigen::MatrixXd::Identity(channels, channels);
  return op;
}

TranslationOperator::TranslationOperator(DeviceId source, DeviceId target,
                                         AlignmentMode mode, ChannelStats source_stats,
                                         ChannelStats target_stats, bool regularize)
    : source_(source),
      target_(target),
      mode_(mode),
      regularize_(regularize),
      mean_src_(std::move(source_stats.mean)),
      mean_tgt_(std::move(target_stats.mean)),
      cov_src_(std::move(source_stats.covariance)),
      cov_tgt_(std::move(target_stats.covariance)) {
  if (mean_src_.size() != mean_tgt_.size()) {
    throw Error(ErrorCode::kChannelMismatch,
                "source and target channel counts differ");
  }
  const auto C = mean_src_.size();
  Eigen::MatrixXd src = cov_src_;
  Eigen::MatrixXd tgt = cov_tgt_;
  if (regularize_) {
    src.diagonal().array() += regularizer(src);
    tgt.diagonal().array() += regularizer(tgt);
  }

  if (mode_ == AlignmentMode::kDiagonal) {
    const Eigen::VectorXd var_src = src.diagonal();
    if ((var_src.array() <= 0.0).any()) {
      throw Error(ErrorCode::kSingularCovariance,
                  "source channel has zero variance; enable regularization");
    }
    linear_ = Eigen::MatrixXd::Zero(C, C);
    linear_.diagonal() =
        (tgt.diagonal().cwiseMax(0.0).array() / var_src.array()).sqrt().matrix();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(src);
    const double largest = eig.eigenvalues().maxCoeff();
    if (!(eig.eigenvalues().minCoeff() > 1e-12 * std::max(largest, 1e-300))) {
      throw Error(ErrorCode::kSingularCovariance,
                  "source covariance is singular; enable regularization");
    }
    linear_ = sqrt_psd(tgt, false) * sqrt_psd(src, true);
  }
}

bool TranslationOperator::operator==(const TranslationOperator& o) const {
  return source_ == o.source_ && target_ == o.target_ && mode_ == o.mode_ &&
         identity_ == o.identity_ && regularize_ == o.regularize_ &&
         same_matrix(mean_src_, o.mean_src_) && same_matrix(mean_tgt_, o.mean_tgt_) &&
         same_matrix(cov_src_, o.cov_src_) && same_matrix(cov_tgt_, o.cov_tgt_) &&
         same_matrix(linear_, o.linear_);
}

TranslationOperator fit_alignment(std::span<const SensorWindow> source_samples,
                                  std::span<const SensorWindow> target_samples,
                                  const AlignmentOptions& options) {
  check_batch(source_samples, options.min_samples, "source");
  check_batch(target_samples, options.min_samples, "target");
  const DeviceId source = source_samples.front().device;
  const DeviceId target = target_samples.front().device;
  for (const auto& w : source_samples) {
    if (w.device != source) {
      throw Error(ErrorCode::kDeviceMismatch, "source batch mixes devices");
    }
  }
  for (const auto& w : target_samples) {
    if (w.device != target) {
      throw Error(ErrorCode::kDeviceMismatch, "target batch mixes devices");
    }
  }
  if (source_samples.front().channels() != target_samples.front().channels()) {
    throw Error(ErrorCode::kChannelMismatch,
                "source and target channel counts differ");
  }
  if (source == target) {
    return TranslationOperator::identity(
        source, target, static_cast<int>(source_samples.front().channels()));
  }
  return TranslationOperator(source, target, options.mode, pooled_stats(source_samples),
                             pooled_stats(target_samples), options.regularize);
}

SensorWindow apply(const TranslationOperator& op, const SensorWindow& window) {
  if (window.device != op.source()) {
    throw Error(ErrorCode::kDeviceMismatch,
                "window from device " + std::to_string(window.device.value()) +
                    " given to operator for device " + std::to_string(op.source().value()));
  }
  if (window.channels() != op.channels()) {
    throw Error(ErrorCode::kChannelMismatch, "window channel count does not match operator");
  }
  SensorWindow out = window;
  if (op.is_identity()) return out;
  if (op.mode() == AlignmentMode::kDiagonal) {
    const Eigen::VectorXd scale = op.linear().diagonal();
    for (Eigen::Index c = 0; c < out.samples.rows(); ++c) {
      out.samples.row(c) =
          ((window.samples.row(c).array() - op.mean_source()[c]) * scale[c] +
           op.mean_target()[c])
              .matrix();
    }
  } else {
    out.samples = (op.linear() * (window.samples.colwise() - op.mean_source())).colwise() +
                  op.mean_target();
  }
  return out;
}

double frechet_distance(const ChannelStats& a, const ChannelStats& b) {
  if (a.mean.size() != b.mean.size()) {
    throw Error(ErrorCode::kChannelMismatch, "batches differ in channel count");
  }
  const double mean_term = (a.mean - b.mean).squaredNorm();
  const Eigen::MatrixXd root_a = sqrt_psd(a.covariance, false);
  Eigen::MatrixXd inner = root_a * b.covariance * root_a;
  inner = 0.5 * (inner + inner.transpose());
  const double cross = sqrt_psd(inner, false).trace();
  const double cov_term = a.covariance.trace() + b.covariance.trace() - 2.0 * cross;
  return std::max(0.0, mean_term + cov_term);
}

double alignment_distance(std::span<const SensorWindow> samples_a,
                          std::span<const SensorWindow> samples_b) {
  const auto a = pooled_stats(samples_a);
  const auto b = pooled_stats(samples_b);
  if (a.count < 2 || b.count < 2) {
    throw Error(ErrorCode::kInsufficientSamples, "distance needs >= 2 samples per side");
  }
  return frechet_distance(a, b);
}

AlignmentDiagnostics diagnose(const TranslationOperator& op,
                              std::span<const SensorWindow> source_samples,
                              std::span<const SensorWindow> target_samples) {
  std::vector<SensorWindow> translated;
  translated.reserve(source_samples.size());
  for (const auto& w : source_samples) translated.push_back(apply(op, w));
  return {alignment_distance(source_samples, target_samples),
          alignment_distance(translated, target_samples)};
}

void save_operator(const TranslationOperator& op, const std::filesystem::path& path) {
  using detail::json;
  json j{{"format", "edgesel-operator"},
         {"version", kOperatorVersion},
         {"mode", std::string(to_string(op.mode()))},
         {"source", op.source().value()},
         {"target", op.target().value()},
         {"identity", op.is_identity()},
         {"mean_src", detail::to_json(op.mean_source())},
         {"mean_tgt", detail::to_json(op.mean_target())},
         {"cov_src", detail::to_json(op.cov_source())},
         {"cov_tgt", detail::to_json(op.cov_target())},
         {"linear", detail::to_json(op.linear())}};
  write_file_atomic(path, j.dump(1) + "\n");
}

TranslationOperator load_operator(const std::filesystem::path& path) {
  using detail::json;
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, "operator file " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "edgesel-operator") {
      throw Error(ErrorCode::kParse, "not an operator file: " + path.string());
    }
    const int version = j.at("version").get<int>();
    if (version != kOperatorVersion) {
      throw Error(ErrorCode::kVersion, "unsupported operator version " + std::to_string(version));
    }
    TranslationOperator op;
    op.source_ = DeviceId(j.at("source").get<std::uint32_t>());
    op.target_ = DeviceId(j.at("target").get<std::uint32_t>());
    op.mode_ = parse_alignment_mode(j.at("mode").get<std::string>());
    op.identity_ = j.at("identity").get<bool>();
    op.mean_src_ = detail::vector_from_json(j.at("mean_src"));
    op.mean_tgt_ = detail::vector_from_json(j.at("mean_tgt"));
    op.cov_src_ = detail::matrix_from_json(j.at("cov_src"));
    op.cov_tgt_ = detail::matrix_from_json(j.at("cov_tgt"));
    op.linear_ = detail::matrix_from_json(j.at("linear"));
    const auto C = op.mean_src_.size();
    if (op.mean_tgt_.size() != C || op.linear_.rows() != C || op.linear_.cols() != C ||
        op.cov_src_.rows() != C || op.cov_tgt_.rows() != C) {
      throw Error(ErrorCode::kParse, "operator arrays have inconsistent sizes");
    }
    return op;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, "operator file " + path.string() + ": " + e.what());
  }
}

}  // namespace edgesel
