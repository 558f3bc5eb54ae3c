#include "edgesel/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

namespace edgesel {
namespace {

constexpr std::uint64_t kTrainTag = 0x5452;
constexpr std::uint64_t kUnlabeledTag = 0x554c;
constexpr std::uint64_t kEvalTag = 0x4556;
constexpr std::uint64_t kScheduleTag = 0x5343;
constexpr std::uint64_t kModelTag = 0x4d44;

WorldConfig with_horizon(WorldConfig w, std::size_t windows) {
  w.horizon_windows = windows;
  return w;
}

const DeviceProfile& find_profile(const ExperimentConfig& config, DeviceId device) {
  for (const auto& p : config.devices) {
    if (p.id == device) return p;
  }
  throw Error(ErrorCode::kUnknownId, "device " + std::to_string(device.value()) +
                                         " is not defined in the config");
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t extra) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(extra),
                    static_cast<std::uint32_t>(extra >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

TrainingSet training_set(const ExperimentConfig& config, std::uint64_t seed) {
  const auto trace = generate_latent(with_horizon(config.world, config.model.train_windows),
                                     derive_seed(seed, kTrainTag));
  const auto& profile = find_profile(config, config.model.training_device);
  TrainingSet set;
  set.num_classes = config.world.num_classes;
  set.labels = trace.labels;
  set.windows.reserve(trace.num_windows());
  for (std::size_t w = 0; w < trace.num_windows(); ++w) {
    set.windows.push_back(observe(trace, profile, w));
  }
  return set;
}

std::vector<SensorWindow> unlabeled_windows(const ExperimentConfig& config, std::uint64_t seed,
                                            DeviceId device) {
  const auto trace =
      generate_latent(with_horizon(config.world, config.model.unlabeled_windows),
                      derive_seed(seed, kUnlabeledTag, device.value()));
  const auto& profile = find_profile(config, device);
  std::vector<SensorWindow> out;
  out.reserve(trace.num_windows());
  for (std::size_t w = 0; w < trace.num_windows(); ++w) out.push_back(observe(trace, profile, w));
  return out;
}

Classifier train_model(const ExperimentConfig& config, std::uint64_t seed) {
  return fit_classifier(training_set(config, seed), config.model.variant,
                        config.model.options(ModelId(0), derive_seed(seed, kModelTag)));
}

LatentTrace evaluation_trace(const ExperimentConfig& config, std::uint64_t seed) {
  return generate_latent(config.world, derive_seed(seed, kEvalTag));
}

AvailabilitySchedule make_schedule(const ExperimentConfig& config, std::uint64_t seed, double p) {
  WorkloadConfig w;
  w.kind = p < 1.0 ? WorkloadKind::kDynamic : WorkloadKind::kStatic;
  w.availability_p = p;
  // Shared across p so that schedules for different p are coupled.
  w.seed = derive_seed(seed, kScheduleTag);
  w.horizon = static_cast<double>(config.world.horizon_windows) * config.world.window_duration;
  w.epoch = config.availability_epoch();
  return sample_availability(w, config.devices.size());
}

Experiment::Experiment(const ExperimentConfig& config, std::uint64_t seed,
                       std::optional<Classifier> model)
    : config_(config), seed_(seed) {
  config_.validate();
  world_ = std::make_unique<SyntheticWorld>(evaluation_trace(config_, seed), config_.devices);
  TrainingSet train = training_set(config_, seed);
  Classifier classifier =
      model ? std::move(*model)
            : fit_classifier(train, config_.model.variant,
                             config_.model.options(ModelId(0), derive_seed(seed, kModelTag)));
  if (classifier.training_device() != config_.model.training_device) {
    train.windows = unlabeled_windows(config_, seed, classifier.training_device());
  }
  TranslationFitOptions fit;
  fit.alignment = config_.translation.options();
  orchestrator_ = std::make_unique<Orchestrator>(fit);
  std::vector<DeviceId> ids;
  for (const auto& p : config_.devices) ids.push_back(p.id);
  std::sort(ids.begin(), ids.end());
  for (DeviceId d : ids) {
    std::vector<SensorWindow> samples = d == classifier.training_device()
                                            ? train.windows
                                            : unlabeled_windows(config_, seed, d);
    orchestrator_->device_join(d, std::move(samples), 0.0);
  }
  model_ = orchestrator_->register_model(std::move(classifier), std::move(train.windows), 0.0);
}

Scenario Experiment::scenario(double p) const {
  Scenario s;
  s.orchestrator = orchestrator_.get();
  s.model = model_;
  s.source = world_.get();
  s.schedule = make_schedule(config_, seed_, p);
  s.availability_p = p;
  s.seed = seed_;
  return s;
}

EvalReport Experiment::evaluate(const Strategy& strategy, double p) const {
  return run_strategy(strategy, scenario(p), config_.policy);
}

InferenceTrace Experiment::simulate(const Strategy& strategy, double p) const {
  const Scenario s = scenario(p);
  return orchestrator_->run(model_, *s.source, s.schedule, config_.policy, strategy);
}

std::vector<EvalReport> run_grid(const ExperimentConfig& config) {
  config.validate();
  const auto strategies = config.parsed_strategies();
  const std::size_t n_seeds = config.seeds.size();
  const std::size_t n_p = config.p_values.size();
  // results[seed][p][strategy]
  std::vector<std::vector<std::vector<EvalReport>>> results(n_seeds);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n_seeds; i = next++) {
      try {
        const Experiment experiment(config, config.seeds[i]);
        auto& per_p = results[i];
        per_p.resize(n_p);
        for (std::size_t pi = 0; pi < n_p; ++pi) {
          const Scenario scenario = experiment.scenario(config.p_values[pi]);
          for (const auto& s : strategies) {
            per_p[pi].push_back(run_strategy(s, scenario, config.policy));
          }
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::size_t jobs = config.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                      : config.jobs;
  jobs = std::min(jobs, n_seeds);
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < jobs; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);

  std::vector<EvalReport> out;
  out.reserve(strategies.size() * n_p * n_seeds);
  for (std::size_t s = 0; s < strategies.size(); ++s) {
    for (std::size_t pi = 0; pi < n_p; ++pi) {
      for (std::size_t i = 0; i < n_seeds; ++i) out.push_back(results[i][pi][s]);
    }
  }
  return out;
}

}  // namespace edgesel
