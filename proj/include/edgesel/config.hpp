#pragma once

// Experiment configuration: one JSON document describing the world, the
// devices, model and translation settings, the evaluation grid and the
// output paths. Keys that are absent keep their defaults; unknown keys are
// rejected.

#include "edgesel/models.hpp"
#include "edgesel/orchestrator.hpp"
#include "edgesel/synthworld.hpp"
#include "edgesel/translation.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace edgesel {

struct ModelSettings {
  DeviceId training_device{0};
  ClassifierVariant variant = ClassifierVariant::kGaussian;
  /// Length of the labeled training trace, in windows.
  std::size_t train_windows = 600;
  /// Unlabeled windows each device contributes for translation fitting.
  std::size_t unlabeled_windows = 300;
  double var_smoothing = 0.05;
  bool uniform_prior = true;
  double step = 0.1;
  int iterations = 500;
  double l2 = 1e-4;

  ClassifierOptions options(ModelId id, std::uint64_t seed) const;
  bool operator==(const ModelSettings&) const = default;
};

struct TranslationSettings {
  AlignmentMode mode = AlignmentMode::kDiagonal;
  std::size_t min_samples = 100;
  bool regularize = true;
  /// Devices used by the fit-translation command.
  DeviceId source{1};
  DeviceId target{0};

  AlignmentOptions options() const { return {mode, min_samples, regularize}; }
  bool operator==(const TranslationSettings&) const = default;
};

struct SimulateSettings {
  std::string strategy = "full";
  double p = 1.0;
  std::uint64_t seed = 1;
  /// Optional classifier file replacing the freshly trained model.
  std::string model_file;
  bool operator==(const SimulateSettings&) const = default;
};

struct OutputPaths {
  std::string dataset = "dataset.bin";
  std::string model = "model.json";
  std::string op = "operator.json";
  std::string trace = "trace.jsonl";
  std::string report = "report.csv";
  bool operator==(const OutputPaths&) const = default;
};

struct ExperimentConfig {
  WorldConfig world;
  std::vector<DeviceProfile> devices;
  ModelSettings model;
  TranslationSettings translation;
  std::vector<double> p_values{0.7, 0.8, 0.9, 1.0};
  /// Availability epoch; unset means the selection interval.
  std::optional<double> epoch;
  SelectionPolicy policy;
  std::vector<std::string> strategies{"single-avg", "native", "trans", "qs", "full"};
  std::vector<std::uint64_t> seeds{1};
  SimulateSettings simulate;
  OutputPaths outputs;
  /// Worker threads for the grid; 0 picks the hardware concurrency.
  std::size_t jobs = 0;

  /// Throws kConfig with the dotted path of the first offending field.
  void validate() const;
  double availability_epoch() const { return epoch.value_or(policy.interval); }
  std::vector<Strategy> parsed_strategies() const;
  bool operator==(const ExperimentConfig&) const;
};

/// The bundled three-device scenario.
ExperimentConfig default_config();

/// Parses and validates. Errors carry kConfig (or kParse for malformed JSON).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Pretty-printed JSON; parse_config(dump_config(c)) == c.
std::string dump_config(const ExperimentConfig& config);

}  // namespace edgesel
