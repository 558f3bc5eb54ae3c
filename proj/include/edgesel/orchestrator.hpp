#pragma once

// Runtime core: device and model registries, pipeline construction with
// automatic translation insertion, margin-based quality assessment and the
// duty-cycled, event-triggered selection loop.

#include "edgesel/core.hpp"
#include "edgesel/models.hpp"
#include "edgesel/synthworld.hpp"
#include "edgesel/translation.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace edgesel {

enum class TieBreak {
  /// Keep the current pipeline if it ties for the maximum, else lowest id.
  kStickyLowestId,
  /// Always lowest id among the maxima.
  kLowestId,
};

std::string_view to_string(TieBreak rule);
TieBreak parse_tie_break(std::string_view text);

struct SelectionPolicy {
  double interval = 10.0;
  double assessment_window = 1.0;
  TieBreak tie_break = TieBreak::kStickyLowestId;

  void validate() const;
  bool operator==(const SelectionPolicy&) const = default;
};

enum class EventKind { kModelRegistered, kModelReregistered, kDeviceJoined, kDeviceLeft };

std::string_view to_string(EventKind kind);

struct SystemEvent {
  EventKind kind;
  std::uint32_t subject = 0;
  double time = 0.0;

  bool operator==(const SystemEvent&) const = default;
};

struct PipelineQuality {
  PipelineId pipeline;
  DeviceId device;
  bool available = false;
  std::optional<ClassPosterior> posterior;
  std::optional<Margin> margin;
};

struct QualityReport {
  double time = 0.0;
  std::vector<PipelineQuality> entries;

  std::size_t assessed_count() const;
};

Margin margin(const ClassPosterior& posterior);

/// Argmax-margin available pipeline; nullopt iff no entry carries a margin.
std::optional<PipelineId> select(const QualityReport& report,
                                 std::optional<PipelineId> current,
                                 TieBreak rule = TieBreak::kStickyLowestId);

enum class StrategyKind { kFixedSingle, kSingleAvg, kNative, kTrans, kQS, kFull };

struct Strategy {
  StrategyKind kind = StrategyKind::kFull;
  DeviceId device;  // FixedSingle only

  static Strategy fixed_single(DeviceId device) { return {StrategyKind::kFixedSingle, device}; }
  static Strategy single_avg() { return {StrategyKind::kSingleAvg, {}}; }
  static Strategy native() { return {StrategyKind::kNative, {}}; }
  static Strategy trans() { return {StrategyKind::kTrans, {}}; }
  static Strategy qs() { return {StrategyKind::kQS, {}}; }
  static Strategy full() { return {StrategyKind::kFull, {}}; }

  bool translates() const {
    return kind == StrategyKind::kTrans || kind == StrategyKind::kFull;
  }
  bool uses_margin() const { return kind == StrategyKind::kQS || kind == StrategyKind::kFull; }
  bool round_robin() const {
    return kind == StrategyKind::kNative || kind == StrategyKind::kTrans;
  }
  bool operator==(const Strategy&) const = default;
};

/// "single:<device>", "single-avg", "native", "trans", "qs", "full".
std::string to_string(const Strategy& strategy);
Strategy parse_strategy(std::string_view text);

struct PipelineMargin {
  PipelineId pipeline;
  DeviceId device;
  double margin = 0.0;

  bool operator==(const PipelineMargin&) const = default;
};

struct TraceRecord {
  double time = 0.0;
  std::optional<PipelineId> selected;
  std::optional<DeviceId> selected_device;
  std::optional<int> predicted;
  int true_class = 0;
  /// Bit d set when device d is available in this window.
  std::uint64_t availability = 0;
  bool assessed = false;
  /// Filled on assessed windows, one entry per assessed pipeline.
  std::vector<PipelineMargin> margins;

  /// Model executions spent on this window.
  std::size_t executions() const {
    return assessed ? margins.size() : (selected ? 1 : 0);
  }
  bool operator==(const TraceRecord&) const = default;
};

struct InferenceTrace {
  std::string strategy;
  std::vector<TraceRecord> records;

  bool operator==(const InferenceTrace&) const = default;
};

struct TranslationFitOptions {
  AlignmentOptions alignment;
  /// Simulated background fitting latency; a pipeline is excluded until its
  /// operator is published.
  double fit_delay = 0.0;
};

/// Single logical control loop that owns the registry and selection state.
class Orchestrator {
 public:
  explicit Orchestrator(TranslationFitOptions options = {});

  /// Builds one pipeline per registered device and fits every missing
  /// translation towards the model's training device. `training_samples` are
  /// unlabeled windows from that device.
  ModelId register_model(Classifier classifier, std::vector<SensorWindow> training_samples,
                         double time = 0.0);
  /// Deregister + register under the same id.
  void reregister_model(Classifier classifier, std::vector<SensorWindow> training_samples,
                        double time);

  /// A device joining for the first time must bring unlabeled samples; a
  /// departed device may rejoin and reuses its operators.
  void device_join(DeviceId device, std::vector<SensorWindow> unlabeled_samples,
                   double time = 0.0);
  void device_leave(DeviceId device, double time);

  bool has_model(ModelId model) const { return models_.contains(model); }
  const Classifier& model(ModelId model) const;
  std::vector<ModelId> models() const;
  std::vector<DeviceId> devices() const;
  bool device_present(DeviceId device) const;
  std::span<const Pipeline> pipelines(ModelId model) const;
  std::size_t translation_count() const { return translations_.size(); }
  /// Number of fit_alignment calls made so far.
  std::size_t fits_performed() const { return fits_performed_; }
  std::shared_ptr<const TranslationOperator> translation(DeviceId source, DeviceId target) const;
  std::span<const SystemEvent> events() const { return events_; }

  /// Runs every eligible pipeline of `model` on window `index`.
  /// `available` holds the availability bitmask; pipelines whose translation
  /// is not yet published are left out, and with `translate` false foreign
  /// pipelines run on raw data.
  QualityReport assess(ModelId model, const SensorSource& source, std::size_t index,
                       std::uint64_t available, bool translate = true) const;

  /// Simulates `strategy` over the whole horizon of `source`. Registered
  /// devices start present; `injected` DeviceLeft/DeviceJoined events toggle
  /// presence, and every event forces an assessment in its window.
  InferenceTrace run(ModelId model, const SensorSource& source,
                     const AvailabilitySchedule& schedule, const SelectionPolicy& policy,
                     const Strategy& strategy,
                     std::span<const SystemEvent> injected = {}) const;

 private:
  struct DeviceEntry {
    std::vector<SensorWindow> samples;
    bool present = true;
  };
  struct ModelEntry {
    Classifier classifier;
    std::vector<SensorWindow> training_samples;
    std::vector<Pipeline> pipelines;
  };
  struct TranslationEntry {
    std::shared_ptr<const TranslationOperator> op;
    double ready_at = 0.0;
  };

  void ensure_translation(DeviceId source, const ModelEntry& model, double time);
  void add_pipeline(ModelEntry& model, DeviceId device);
  void refresh_translations(ModelEntry& model);
  void emit(EventKind kind, std::uint32_t subject, double time);

  TranslationFitOptions options_;
  std::map<DeviceId, DeviceEntry> devices_;
  std::map<ModelId, ModelEntry> models_;
  std::map<std::pair<DeviceId, DeviceId>, TranslationEntry> translations_;
  std::vector<SystemEvent> events_;
  std::uint32_t next_pipeline_ = 0;
  std::size_t fits_performed_ = 0;
};

}  // namespace edgesel
