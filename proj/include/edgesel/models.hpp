#pragma once

// Reference probability-emitting classifiers. A classifier is trained on one
// device's labeled windows and is a black box afterwards: consumers only call
// infer(). Parameters are not readable through the public surface.

#include "edgesel/core.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <span>

namespace edgesel {

inline constexpr int kModelVersion = 1;

/// Reduces a window to per-channel [mean, std, mean |first difference|].
struct FeatureSpec {
  int channels = 0;

  int num_features() const { return 3 * channels; }
  Eigen::VectorXd extract(const SensorWindow& window) const;
  bool operator==(const FeatureSpec&) const = default;
};

enum class ClassifierVariant { kGaussian, kLogistic };

std::string_view to_string(ClassifierVariant variant);
ClassifierVariant parse_classifier_variant(std::string_view text);

struct TrainingSet {
  std::vector<SensorWindow> windows;
  std::vector<int> labels;
  int num_classes = 0;

  /// Requires a single source device, labels in [0, K) and every class seen.
  void validate() const;
};

struct ClassifierOptions {
  ModelId id;
  std::uint64_t seed = 0;
  /// Gaussian: added to every class variance, relative to the pooled
  /// per-feature variance.
  double var_smoothing = 0.05;
  /// Gaussian: use 1/K priors instead of class frequencies.
  bool uniform_prior = true;
  /// Logistic: full-batch gradient descent.
  double step = 0.1;
  int iterations = 500;
  double l2 = 1e-4;
};

class Classifier {
 public:
  /// Gaussian class-conditional model with diagonal covariances.
  /// `means` and `variances` are K x F, `log_priors` has K entries.
  static Classifier gaussian(ModelId id, DeviceId training_device, FeatureSpec spec,
                             Eigen::MatrixXd means, Eigen::MatrixXd variances,
                             Eigen::VectorXd log_priors);

  ModelId id() const noexcept { return id_; }
  DeviceId training_device() const noexcept { return training_device_; }
  int num_classes() const noexcept { return num_classes_; }
  ClassifierVariant variant() const noexcept { return variant_; }
  const FeatureSpec& feature_spec() const noexcept { return spec_; }

  /// Copy of this classifier registered under a different id.
  Classifier with_id(ModelId id) const;

  ClassPosterior infer(const SensorWindow& window) const;

  bool operator==(const Classifier& other) const;

 private:
  Classifier() = default;
  friend Classifier fit_classifier(const TrainingSet&, ClassifierVariant,
                                   const ClassifierOptions&);
  friend void save_model(const Classifier&, const std::filesystem::path&);
  friend Classifier load_model(const std::filesystem::path&);

  ModelId id_;
  DeviceId training_device_;
  int num_classes_ = 0;
  ClassifierVariant variant_ = ClassifierVariant::kGaussian;
  FeatureSpec spec_;
  // Gaussian: class means, variances and log priors.
  // Logistic: standardization and weights (K x F) / biases (K).
  Eigen::MatrixXd means_;
  Eigen::MatrixXd variances_;
  Eigen::VectorXd log_priors_;
  Eigen::VectorXd feature_mean_;
  Eigen::VectorXd feature_scale_;
  Eigen::MatrixXd weights_;
  Eigen::VectorXd biases_;
};

Classifier fit_classifier(const TrainingSet& data, ClassifierVariant variant,
                          const ClassifierOptions& options = {});

ClassPosterior infer(const Classifier& classifier, const SensorWindow& window);

/// Fraction of windows whose argmax equals the label.
double accuracy(const Classifier& classifier, std::span<const SensorWindow> windows,
                std::span<const int> labels);

void save_model(const Classifier& classifier, const std::filesystem::path& path);
Classifier load_model(const std::filesystem::path& path);

}  // namespace edgesel
