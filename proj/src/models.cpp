#include "edgesel/models.hpp"

#include "edgesel/dataset.hpp"
#include "json_support.hpp"

#include <cmath>
#include <numbers>

namespace edgesel {
namespace {

std::vector<double> softmax(const Eigen::VectorXd& logits) {
  const double top = logits.maxCoeff();
  std::vector<double> p(static_cast<std::size_t>(logits.size()));
  double sum = 0.0;
  for (Eigen::Index k = 0; k < logits.size(); ++k) {
    p[static_cast<std::size_t>(k)] = std::exp(logits[k] - top);
    sum += p[static_cast<std::size_t>(k)];
  }
  for (double& v : p) v /= sum;
  return p;
}

Eigen::MatrixXd feature_matrix(const FeatureSpec& spec, std::span<const SensorWindow> windows) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(windows.size()), spec.num_features());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) = spec.extract(windows[i]).transpose();
  }
  return X;
}

}  // namespace

Eigen::VectorXd FeatureSpec::extract(const SensorWindow& window) const {
  if (window.channels() != channels) {
    throw Error(ErrorCode::kChannelMismatch,
                "window has " + std::to_string(window.channels()) +
                    " channels; classifier expects " + std::to_string(channels));
  }
  const Eigen::Index L = window.length();
  Eigen::VectorXd f(num_features());
  for (Eigen::Index c = 0; c < channels; ++c) {
    const auto row = window.samples.row(c).array();
    const double mean = L > 0 ? row.mean() : 0.0;
    const double var = L > 0 ? (row - mean).square().mean() : 0.0;
    double mad = 0.0;
    if (L > 1) {
      mad = (window.samples.row(c).tail(L - 1) - window.samples.row(c).head(L - 1))
                .cwiseAbs()
                .mean();
    }
    f[3 * c] = mean;
    f[3 * c + 1] = std::sqrt(var);
    f[3 * c + 2] = mad;
  }
  if (!f.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "non-finite feature");
  }
  return f;
}

std::string_view to_string(ClassifierVariant variant) {
  return variant == ClassifierVariant::kGaussian ? "gaussian" : "logistic";
}

ClassifierVariant parse_classifier_variant(std::string_view text) {
  if (text == "gaussian") return ClassifierVariant::kGaussian;
  if (text == "logistic") return ClassifierVariant::kLogistic;
  throw Error(ErrorCode::kInvalidArgument, "unknown classifier variant '" + std::string(text) + "'");
}

void TrainingSet::validate() const {
  if (num_classes < 2) {
    throw Error(ErrorCode::kInvalidArgument, "training set needs K >= 2 classes");
  }
  if (windows.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch, "windows and labels differ in length");
  }
  if (windows.empty()) {
    throw Error(ErrorCode::kMissingClass, "training set is empty");
  }
  std::vector<int> seen(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].device != windows.front().device) {
      throw Error(ErrorCode::kDeviceMismatch, "training set mixes devices");
    }
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw Error(ErrorCode::kInvalidArgument, "label outside [0, K)");
    }
    seen[static_cast<std::size_t>(labels[i])] = 1;
  }
  for (int k = 0; k < num_classes; ++k) {
    if (!seen[static_cast<std::size_t>(k)]) {
      throw Error(ErrorCode::kMissingClass, "class " + std::to_string(k) + " has no example");
    }
  }
}

Classifier Classifier::gaussian(ModelId id, DeviceId training_device, FeatureSpec spec,
                                Eigen::MatrixXd means, Eigen::MatrixXd variances,
                                Eigen::VectorXd log_priors) {
  const auto K = means.rows();
  if (K < 2) throw Error(ErrorCode::kInvalidArgument, "classifier needs K >= 2 classes");
  if (means.cols() != spec.num_features() || variances.rows() != K ||
      variances.cols() != means.cols() || log_priors.size() != K) {
    throw Error(ErrorCode::kDimensionMismatch, "gaussian parameter shapes disagree");
  }
  if (!(variances.array() > 0.0).all() || !means.allFinite() || !log_priors.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "gaussian parameters must be finite, variances > 0");
  }
  Classifier c;
  c.id_ = id;
  c.training_device_ = training_device;
  c.num_classes_ = static_cast<int>(K);
  c.variant_ = ClassifierVariant::kGaussian;
  c.spec_ = spec;
  c.means_ = std::move(means);
  c.variances_ = std::move(variances);
  c.log_priors_ = std::move(log_priors);
  return c;
}

Classifier Classifier::with_id(ModelId id) const {
  Classifier c = *this;
  c.id_ = id;
  return c;
}

ClassPosterior Classifier::infer(const SensorWindow& window) const {
  const Eigen::VectorXd f = spec_.extract(window);
  Eigen::VectorXd logits(num_classes_);
  if (variant_ == ClassifierVariant::kGaussian) {
    for (int k = 0; k < num_classes_; ++k) {
      const auto var = variances_.row(k).transpose().array();
      const auto diff = f.array() - means_.row(k).transpose().array();
      logits[k] = log_priors_[k] -
                  0.5 * ((2.0 * std::numbers::pi * var).log() + diff.square() / var).sum();
    }
  } else {
    const Eigen::VectorXd z = (f - feature_mean_).cwiseQuotient(feature_scale_);
    logits = weights_ * z + biases_;
  }
  return ClassPosterior(softmax(logits), id_);
}

bool Classifier::operator==(const Classifier& o) const {
  return id_ == o.id_ && training_device_ == o.training_device_ &&
         num_classes_ == o.num_classes_ && variant_ == o.variant_ && spec_ == o.spec_ &&
         same_matrix(means_, o.means_) && same_matrix(variances_, o.variances_) &&
         same_matrix(log_priors_, o.log_priors_) && same_matrix(feature_mean_, o.feature_mean_) &&
         same_matrix(feature_scale_, o.feature_scale_) && same_matrix(weights_, o.weights_) &&
         same_matrix(biases_, o.biases_);
}

Classifier fit_classifier(const TrainingSet& data, ClassifierVariant variant,
                          const ClassifierOptions& options) {
  data.validate();
  const auto K = data.num_classes;
  FeatureSpec spec{static_cast<int>(data.windows.front().channels())};
  const Eigen::MatrixXd X = feature_matrix(spec, data.windows);
  const auto N = X.rows();
  const auto F = X.cols();

  Classifier c;
  c.id_ = options.id;
  c.training_device_ = data.windows.front().device;
  c.num_classes_ = K;
  c.variant_ = variant;
  c.spec_ = spec;

  const Eigen::RowVectorXd pooled_mean = X.colwise().mean();
  const Eigen::RowVectorXd pooled_var =
      (X.rowwise() - pooled_mean).array().square().colwise().mean();

  if (variant == ClassifierVariant::kGaussian) {
    c.means_ = Eigen::MatrixXd::Zero(K, F);
    c.variances_ = Eigen::MatrixXd::Zero(K, F);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(K);
    for (Eigen::Index i = 0; i < N; ++i) {
      const int k = data.labels[static_cast<std::size_t>(i)];
      c.means_.row(k) += X.row(i);
      counts[k] += 1.0;
    }
    for (int k = 0; k < K; ++k) c.means_.row(k) /= counts[k];
    for (Eigen::Index i = 0; i < N; ++i) {
      const int k = data.labels[static_cast<std::size_t>(i)];
      c.variances_.row(k) += (X.row(i) - c.means_.row(k)).array().square().matrix();
    }
    const Eigen::RowVectorXd smoothing =
        (options.var_smoothing * pooled_var.array() + 1e-12).matrix();
    for (int k = 0; k < K; ++k) {
      c.variances_.row(k) = c.variances_.row(k) / counts[k] + smoothing;
    }
    c.log_priors_ = options.uniform_prior
                        ? Eigen::VectorXd(Eigen::VectorXd::Constant(K, -std::log(static_cast<double>(K))))
                        : Eigen::VectorXd((counts / static_cast<double>(N)).array().log().matrix());
    return c;
  }

  // Multinomial logistic regression on standardized features.
  c.feature_mean_ = pooled_mean.transpose();
  c.feature_scale_ = pooled_var.transpose().cwiseSqrt();
  for (Eigen::Index j = 0; j < F; ++j) {
    if (!(c.feature_scale_[j] > 1e-12)) c.feature_scale_[j] = 1.0;
  }
  const Eigen::MatrixXd Z =
      (X.rowwise() - pooled_mean).array().rowwise() / c.feature_scale_.transpose().array();
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(N, K);
  for (Eigen::Index i = 0; i < N; ++i) Y(i, data.labels[static_cast<std::size_t>(i)]) = 1.0;

  c.weights_ = Eigen::MatrixXd::Zero(K, F);
  c.biases_ = Eigen::VectorXd::Zero(K);
  const double inv_n = 1.0 / static_cast<double>(N);
  for (int it = 0; it < options.iterations; ++it) {
    Eigen::MatrixXd logits = (Z * c.weights_.transpose()).rowwise() + c.biases_.transpose();
    for (Eigen::Index i = 0; i < N; ++i) {
      const double top = logits.row(i).maxCoeff();
      logits.row(i) = (logits.row(i).array() - top).exp().matrix();
      logits.row(i) /= logits.row(i).sum();
    }
    const Eigen::MatrixXd residual = logits - Y;
    const Eigen::MatrixXd grad_w = inv_n * residual.transpose() * Z + options.l2 * c.weights_;
    const Eigen::VectorXd grad_b = inv_n * residual.colwise().sum().transpose();
    c.weights_ -= options.step * grad_w;
    c.biases_ -= options.step * grad_b;
  }
  return c;
}

ClassPosterior infer(const Classifier& classifier, const SensorWindow& window) {
  return classifier.infer(window);
}

double accuracy(const Classifier& classifier, std::span<const SensorWindow> windows,
                std::span<const int> labels) {
  if (windows.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch, "windows and labels differ in length");
  }
  if (windows.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (static_cast<int>(classifier.infer(windows[i]).argmax()) == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(windows.size());
}

void save_model(const Classifier& c, const std::filesystem::path& path) {
  using detail::json;
  json j{{"format", "edgesel-model"},
         {"version", kModelVersion},
         {"variant", std::string(to_string(c.variant_))},
         {"id", c.id_.value()},
         {"training_device", c.training_device_.value()},
         {"num_classes", c.num_classes_},
         {"feature_spec", {{"channels", c.spec_.channels}, {"features", {"mean", "std", "mad"}}}}};
  if (c.variant_ == ClassifierVariant::kGaussian) {
    j["means"] = detail::to_json(c.means_);
    j["variances"] = detail::to_json(c.variances_);
    j["log_priors"] = detail::to_json(c.log_priors_);
  } else {
    j["feature_mean"] = detail::to_json(c.feature_mean_);
    j["feature_scale"] = detail::to_json(c.feature_scale_);
    j["weights"] = detail::to_json(c.weights_);
    j["biases"] = detail::to_json(c.biases_);
  }
  write_file_atomic(path, j.dump(1) + "\n");
}

Classifier load_model(const std::filesystem::path& path) {
  using detail::json;
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, "model file " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "edgesel-model") {
      throw Error(ErrorCode::kParse, "not a model file: " + path.string());
    }
    const int version = j.at("version").get<int>();
    if (version != kModelVersion) {
      throw Error(ErrorCode::kVersion, "unsupported model version " + std::to_string(version));
    }
    const ModelId id(j.at("id").get<std::uint32_t>());
    const DeviceId device(j.at("training_device").get<std::uint32_t>());
    const FeatureSpec spec{j.at("feature_spec").at("channels").get<int>()};
    const auto variant = parse_classifier_variant(j.at("variant").get<std::string>());
    if (variant == ClassifierVariant::kGaussian) {
      return Classifier::gaussian(id, device, spec, detail::matrix_from_json(j.at("means")),
                                  detail::matrix_from_json(j.at("variances")),
                                  detail::vector_from_json(j.at("log_priors")));
    }
    Classifier c;
    c.id_ = id;
    c.training_device_ = device;
    c.spec_ = spec;
    c.variant_ = variant;
    c.num_classes_ = j.at("num_classes").get<int>();
    c.feature_mean_ = detail::vector_from_json(j.at("feature_mean"));
    c.feature_scale_ = detail::vector_from_json(j.at("feature_scale"));
    c.weights_ = detail::matrix_from_json(j.at("weights"));
    c.biases_ = detail::vector_from_json(j.at("biases"));
    if (c.num_classes_ < 2 || c.weights_.rows() != c.num_classes_ ||
        c.weights_.cols() != spec.num_features() || c.biases_.size() != c.num_classes_ ||
        c.feature_mean_.size() != spec.num_features() ||
        c.feature_scale_.size() != spec.num_features()) {
      throw Error(ErrorCode::kParse, "logistic parameter shapes disagree");
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, "model file " + path.string() + ": " + e.what());
  }
}

}  // namespace edgesel
