#pragma once

// Builds the per-seed world described by an ExperimentConfig (evaluation
// trace, trained model, populated runtime) and runs the evaluation grid.

#include "edgesel/config.hpp"
#include "edgesel/evaluation.hpp"

#include <memory>
#include <optional>

namespace edgesel {

/// Independent sub-seed for one purpose of one run.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t extra = 0);

/// Labeled windows from the training device, drawn from a trace independent
/// of the evaluation trace.
TrainingSet training_set(const ExperimentConfig& config, std::uint64_t seed);
/// Unlabeled windows of `device` from its own independent trace.
std::vector<SensorWindow> unlabeled_windows(const ExperimentConfig& config, std::uint64_t seed,
                                            DeviceId device);
Classifier train_model(const ExperimentConfig& config, std::uint64_t seed);
LatentTrace evaluation_trace(const ExperimentConfig& config, std::uint64_t seed);
AvailabilitySchedule make_schedule(const ExperimentConfig& config, std::uint64_t seed, double p);

/// One seed's world with the model registered and every device joined.
class Experiment {
 public:
  /// `model` replaces the classifier trained from the config.
  Experiment(const ExperimentConfig& config, std::uint64_t seed,
             std::optional<Classifier> model = std::nullopt);
  Experiment(const Experiment&) = delete;
  Experiment& operator=(const Experiment&) = delete;

  Scenario scenario(double p) const;
  EvalReport evaluate(const Strategy& strategy, double p) const;
  InferenceTrace simulate(const Strategy& strategy, double p) const;

  const Orchestrator& orchestrator() const { return *orchestrator_; }
  const SyntheticWorld& world() const { return *world_; }
  ModelId model() const { return model_; }
  std::uint64_t seed() const { return seed_; }

 private:
  ExperimentConfig config_;
  std::uint64_t seed_;
  std::unique_ptr<SyntheticWorld> world_;
  std::unique_ptr<Orchestrator> orchestrator_;
  ModelId model_;
};

/// Every strategy x p x seed cell, ordered strategy-major, then p, then seed
/// in config order. Seeds run on up to `config.jobs` threads.
std::vector<EvalReport> run_grid(const ExperimentConfig& config);

}  // namespace edgesel
