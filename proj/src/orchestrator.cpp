#include "edgesel/orchestrator.hpp"

#include <algorithm>
#include <cmath>

namespace edgesel {
namespace {

constexpr double kTimeEps = 1e-9;

std::uint64_t device_bit(DeviceId device) {
  if (device.value() >= 64) {
    throw Error(ErrorCode::kInvalidArgument, "device ids must be < 64 for availability masks");
  }
  return std::uint64_t{1} << device.value();
}

}  // namespace

std::string_view to_string(TieBreak rule) {
  return rule == TieBreak::kStickyLowestId ? "sticky" : "lowest-id";
}

TieBreak parse_tie_break(std::string_view text) {
  if (text == "sticky") return TieBreak::kStickyLowestId;
  if (text == "lowest-id") return TieBreak::kLowestId;
  throw Error(ErrorCode::kInvalidArgument, "unknown tie-break rule '" + std::string(text) + "'");
}

void SelectionPolicy::validate() const {
  if (!(assessment_window > 0.0) || !(interval >= assessment_window)) {
    throw Error(ErrorCode::kInvalidArgument,
                "selection policy needs interval >= assessment_window > 0");
  }
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kModelRegistered: return "model_registered";
    case EventKind::kModelReregistered: return "model_reregistered";
    case EventKind::kDeviceJoined: return "device_joined";
    case EventKind::kDeviceLeft: return "device_left";
  }
  return "unknown";
}

std::size_t QualityReport::assessed_count() const {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(), [](const auto& e) { return e.margin.has_value(); }));
}

Margin margin(const ClassPosterior& posterior) {
  double first = -1.0;
  double second = -1.0;
  for (double p : posterior.probs()) {
    if (p > first) {
      second = first;
      first = p;
    } else if (p > second) {
      second = p;
    }
  }
  return Margin(first - second);
}

std::optional<PipelineId> select(const QualityReport& report, std::optional<PipelineId> current,
                                 TieBreak rule) {
  std::optional<PipelineId> best;
  double best_margin = -1.0;
  bool current_margin_known = false;
  double current_margin = 0.0;
  for (const auto& e : report.entries) {
    if (!e.available || !e.margin) continue;
    const double m = e.margin->value();
    if (current && e.pipeline == *current) {
      current_margin_known = true;
      current_margin = m;
    }
    if (m > best_margin || (m == best_margin && e.pipeline < *best)) {
      best = e.pipeline;
      best_margin = m;
    }
  }
  if (rule == TieBreak::kStickyLowestId && current_margin_known && current_margin == best_margin) {
    return current;
  }
  return best;
}

std::string to_string(const Strategy& s) {
  switch (s.kind) {
    case StrategyKind::kFixedSingle: return "single:" + std::to_string(s.device.value());
    case StrategyKind::kSingleAvg: return "single-avg";
    case StrategyKind::kNative: return "native";
    case StrategyKind::kTrans: return "trans";
    case StrategyKind::kQS: return "qs";
    case StrategyKind::kFull: return "full";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view text) {
  if (text == "single-avg") return Strategy::single_avg();
  if (text == "native") return Strategy::native();
  if (text == "trans") return Strategy::trans();
  if (text == "qs") return Strategy::qs();
  if (text == "full") return Strategy::full();
  constexpr std::string_view kSingle = "single:";
  if (text.starts_with(kSingle)) {
    const std::string digits(text.substr(kSingle.size()));
    if (!digits.empty() && std::all_of(digits.begin(), digits.end(), ::isdigit)) {
      return Strategy::fixed_single(DeviceId(static_cast<std::uint32_t>(std::stoul(digits))));
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown strategy '" + std::string(text) + "'");
}

Orchestrator::Orchestrator(TranslationFitOptions options) : options_(options) {}

void Orchestrator::emit(EventKind kind, std::uint32_t subject, double time) {
  if (!events_.empty() && time < events_.back().time) {
    throw Error(ErrorCode::kInvalidArgument, "event timestamps must be nondecreasing");
  }
  events_.push_back({kind, subject, time});
}

void Orchestrator::ensure_translation(DeviceId source, const ModelEntry& model, double time) {
  const DeviceId target = model.classifier.training_device();
  if (source == target || translations_.contains({source, target})) return;
  const auto& samples = devices_.at(source).samples;
  if (model.training_samples.empty()) {
    throw Error(ErrorCode::kInsufficientSamples,
                "model " + std::to_string(model.classifier.id().value()) +
                    " has no unlabeled training samples for translation");
  }
  auto op = std::make_shared<const TranslationOperator>(
      fit_alignment(samples, model.training_samples, options_.alignment));
  ++fits_performed_;
  translations_[{source, target}] = {std::move(op), time + options_.fit_delay};
}

void Orchestrator::add_pipeline(ModelEntry& model, DeviceId device) {
  Pipeline p;
  p.id = PipelineId(next_pipeline_++);
  p.device = device;
  p.model = model.classifier.id();
  p.training_device = model.classifier.training_device();
  model.pipelines.push_back(std::move(p));
  refresh_translations(model);
}

void Orchestrator::refresh_translations(ModelEntry& model) {
  for (auto& p : model.pipelines) {
    if (!p.needs_translation()) continue;
    auto it = translations_.find({p.device, p.training_device});
    if (it != translations_.end()) {
      p.translation = it->second.op;
      p.translation_ready_at = it->second.ready_at;
    }
  }
}

ModelId Orchestrator::register_model(Classifier classifier,
                                     std::vector<SensorWindow> training_samples, double time) {
  const ModelId id = classifier.id();
  if (models_.contains(id)) {
    throw Error(ErrorCode::kDuplicate, "model " + std::to_string(id.value()) + " already registered");
  }
  for (const auto& w : training_samples) {
    if (w.device != classifier.training_device()) {
      throw Error(ErrorCode::kDeviceMismatch,
                  "training samples must come from the model's training device");
    }
    validate_window(w);
  }
  ModelEntry entry{std::move(classifier), std::move(training_samples), {}};
  for (const auto& [device, _] : devices_) {
    ensure_translation(device, entry, time);
  }
  for (const auto& [device, _] : devices_) add_pipeline(entry, device);
  models_.emplace(id, std::move(entry));
  emit(EventKind::kModelRegistered, id.value(), time);
  return id;
}

void Orchestrator::reregister_model(Classifier classifier,
                                    std::vector<SensorWindow> training_samples, double time) {
  const ModelId id = classifier.id();
  auto it = models_.find(id);
  if (it == models_.end()) {
    throw Error(ErrorCode::kUnknownId, "model " + std::to_string(id.value()) + " is not registered");
  }
  ModelEntry previous = std::move(it->second);
  models_.erase(it);
  const auto events_before = events_.size();
  try {
    register_model(std::move(classifier), std::move(training_samples), time);
  } catch (...) {
    models_.emplace(id, std::move(previous));
    throw;
  }
  events_.resize(events_before);
  emit(EventKind::kModelReregistered, id.value(), time);
}

void Orchestrator::device_join(DeviceId device, std::vector<SensorWindow> unlabeled_samples,
                               double time) {
  device_bit(device);
  auto existing = devices_.find(device);
  if (existing != devices_.end()) {
    if (existing->second.present) {
      throw Error(ErrorCode::kDuplicate, "device " + std::to_string(device.value()) + " is already present");
    }
    existing->second.present = true;
    emit(EventKind::kDeviceJoined, device.value(), time);
    return;
  }
  for (const auto& w : unlabeled_samples) {
    if (w.device != device) {
      throw Error(ErrorCode::kDeviceMismatch, "join samples must come from the joining device");
    }
    validate_window(w);
  }
  devices_[device] = DeviceEntry{std::move(unlabeled_samples), true};
  try {
    for (auto& [_, model] : models_) ensure_translation(device, model, time);
  } catch (...) {
    devices_.erase(device);
    throw;
  }
  for (auto& [_, model] : models_) add_pipeline(model, device);
  emit(EventKind::kDeviceJoined, device.value(), time);
}

void Orchestrator::device_leave(DeviceId device, double time) {
  auto it = devices_.find(device);
  if (it == devices_.end() || !it->second.present) {
    throw Error(ErrorCode::kUnknownId, "device " + std::to_string(device.value()) + " is not registered");
  }
  it->second.present = false;
  emit(EventKind::kDeviceLeft, device.value(), time);
}

const Classifier& Orchestrator::model(ModelId model) const {
  auto it = models_.find(model);
  if (it == models_.end()) {
    throw Error(ErrorCode::kUnknownId, "model " + std::to_string(model.value()) + " is not registered");
  }
  return it->second.classifier;
}

std::vector<ModelId> Orchestrator::models() const {
  std::vector<ModelId> out;
  for (const auto& [id, _] : models_) out.push_back(id);
  return out;
}

std::vector<DeviceId> Orchestrator::devices() const {
  std::vector<DeviceId> out;
  for (const auto& [id, _] : devices_) out.push_back(id);
  return out;
}

bool Orchestrator::device_present(DeviceId device) const {
  auto it = devices_.find(device);
  return it != devices_.end() && it->second.present;
}

std::span<const Pipeline> Orchestrator::pipelines(ModelId model) const {
  auto it = models_.find(model);
  if (it == models_.end()) {
    throw Error(ErrorCode::kUnknownId, "model " + std::to_string(model.value()) + " is not registered");
  }
  return it->second.pipelines;
}

std::shared_ptr<const TranslationOperator> Orchestrator::translation(DeviceId source,
                                                                     DeviceId target) const {
  auto it = translations_.find({source, target});
  return it == translations_.end() ? nullptr : it->second.op;
}

namespace {

ClassPosterior execute(const Classifier& classifier, const Pipeline& pipeline,
                       const SensorSource& source, std::size_t index, bool translate) {
  SensorWindow w = source.window(pipeline.device, index);
  if (translate && pipeline.needs_translation()) w = apply(*pipeline.translation, w);
  return classifier.infer(w);
}

bool eligible(const Pipeline& p, std::uint64_t mask, double time, bool translate) {
  if ((mask & device_bit(p.device)) == 0) return false;
  return !translate || p.translation_ready(time);
}

}  // namespace

QualityReport Orchestrator::assess(ModelId model, const SensorSource& source,
                                   std::size_t index, std::uint64_t available,
                                   bool translate) const {
  if (devices_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no registered devices to assess");
  }
  auto it = models_.find(model);
  if (it == models_.end()) {
    throw Error(ErrorCode::kUnknownId, "model " + std::to_string(model.value()) + " is not registered");
  }
  const ModelEntry& entry = it->second;
  if (index >= source.num_windows()) {
    throw Error(ErrorCode::kInvalidArgument, "assessment time outside run horizon");
  }
  QualityReport report;
  report.time = static_cast<double>(index) * source.window_duration();
  for (const auto& p : entry.pipelines) {
    const bool up = (available & device_bit(p.device)) != 0;
    if (up && translate && !p.translation_ready(report.time)) continue;
    PipelineQuality q{p.id, p.device, up, std::nullopt, std::nullopt};
    if (up) {
      q.posterior = execute(entry.classifier, p, source, index, translate);
      q.margin = margin(*q.posterior);
    }
    report.entries.push_back(std::move(q));
  }
  return report;
}

InferenceTrace Orchestrator::run(ModelId model, const SensorSource& source,
                                 const AvailabilitySchedule& schedule,
                                 const SelectionPolicy& policy, const Strategy& strategy,
                                 std::span<const SystemEvent> injected) const {
  policy.validate();
  if (strategy.kind == StrategyKind::kSingleAvg) {
    throw Error(ErrorCode::kInvalidArgument,
                "single-avg aggregates several runs; run each fixed-single strategy instead");
  }
  auto model_it = models_.find(model);
  if (model_it == models_.end()) {
    throw Error(ErrorCode::kUnknownId, "model " + std::to_string(model.value()) + " is not registered");
  }
  const std::size_t n = source.num_windows();
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "empty horizon");
  const double dur = source.window_duration();
  if (std::abs(policy.assessment_window - dur) > kTimeEps) {
    throw Error(ErrorCode::kInvalidArgument,
                "assessment window must equal the window duration");
  }
  const double ratio = policy.interval / dur;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument,
                "selection interval must be a whole number of windows");
  }
  const auto interval_windows = static_cast<std::size_t>(std::llround(ratio));

  const Classifier& classifier = model_it->second.classifier;
  std::vector<Pipeline> pipelines = model_it->second.pipelines;
  for (auto& p : pipelines) p.active = false;

  std::map<DeviceId, bool> present;
  for (const auto& [id, entry] : devices_) present[id] = entry.present;

  std::vector<SystemEvent> events(injected.begin(), injected.end());
  std::stable_sort(events.begin(), events.end(),
                   [](const auto& a, const auto& b) { return a.time < b.time; });
  for (const auto& e : events) {
    if ((e.kind == EventKind::kDeviceJoined || e.kind == EventKind::kDeviceLeft) &&
        !present.contains(DeviceId(e.subject))) {
      throw Error(ErrorCode::kUnknownId,
                  "event refers to unregistered device " + std::to_string(e.subject));
    }
  }

  std::optional<std::size_t> fixed;
  if (strategy.kind == StrategyKind::kFixedSingle) {
    for (std::size_t i = 0; i < pipelines.size(); ++i) {
      if (pipelines[i].device == strategy.device) fixed = i;
    }
    if (!fixed) {
      throw Error(ErrorCode::kUnknownId,
                  "no pipeline for device " + std::to_string(strategy.device.value()));
    }
  }

  const bool translate = strategy.translates();
  InferenceTrace trace;
  trace.strategy = to_string(strategy);
  trace.records.reserve(n);

  std::optional<std::size_t> current;
  std::optional<std::size_t> rr_last;
  std::optional<std::uint64_t> prev_mask;
  std::size_t next_event = 0;

  auto set_active = [&](std::optional<std::size_t> idx) {
    for (auto& p : pipelines) p.active = false;
    if (idx) pipelines[*idx].active = true;
    current = idx;
  };

  for (std::size_t w = 0; w < n; ++w) {
    const double t = static_cast<double>(w) * dur;
    bool event_here = false;
    while (next_event < events.size() && events[next_event].time < t + dur - kTimeEps) {
      const auto& e = events[next_event++];
      switch (e.kind) {
        case EventKind::kDeviceLeft: present[DeviceId(e.subject)] = false; break;
        case EventKind::kDeviceJoined: present[DeviceId(e.subject)] = true; break;
        case EventKind::kModelReregistered:
          if (ModelId(e.subject) == model) set_active(std::nullopt);
          break;
        case EventKind::kModelRegistered: break;
      }
      event_here = true;
    }

    std::uint64_t mask = 0;
    for (const auto& [id, up] : present) {
      if (up && schedule.available(id, t)) mask |= device_bit(id);
    }
    const bool boundary = w % interval_windows == 0;

    TraceRecord rec;
    rec.time = t;
    rec.true_class = source.true_label(w);
    rec.availability = mask;

    auto is_eligible = [&](std::size_t i) { return eligible(pipelines[i], mask, t, translate); };

    if (strategy.kind == StrategyKind::kFixedSingle) {
      set_active(is_eligible(*fixed) ? fixed : std::nullopt);
    } else if (strategy.round_robin()) {
      const bool lost = current && !is_eligible(*current);
      if (boundary || lost || !current) {
        // Advance cyclically past the last device that held the slot.
        std::optional<std::size_t> pick;
        const std::size_t m = pipelines.size();
        const std::size_t start = rr_last ? (*rr_last + 1) % m : 0;
        for (std::size_t k = 0; k < m; ++k) {
          const std::size_t i = (start + k) % m;
          if (is_eligible(i)) {
            pick = i;
            break;
          }
        }
        if (pick) rr_last = pick;
        set_active(pick);
      }
    } else {
      const bool lost = current && !is_eligible(*current);
      const bool changed = prev_mask && *prev_mask != mask;
      if (boundary || event_here || changed || lost) {
        QualityReport report = assess(model, source, w, mask, translate);
        std::optional<PipelineId> current_id;
        if (current) current_id = pipelines[*current].id;
        const auto chosen = select(report, current_id, policy.tie_break);
        rec.assessed = true;
        for (const auto& e : report.entries) {
          if (e.margin) rec.margins.push_back({e.pipeline, e.device, e.margin->value()});
          if (chosen && e.pipeline == *chosen) {
            rec.predicted = static_cast<int>(e.posterior->argmax());
          }
        }
        std::optional<std::size_t> idx;
        if (chosen) {
          for (std::size_t i = 0; i < pipelines.size(); ++i) {
            if (pipelines[i].id == *chosen) idx = i;
          }
        }
        set_active(idx);
      }
    }

    if (current) {
      const Pipeline& p = pipelines[*current];
      rec.selected = p.id;
      rec.selected_device = p.device;
      if (!rec.assessed) {
        rec.predicted = static_cast<int>(execute(classifier, p, source, w, translate).argmax());
      }
    }
    prev_mask = mask;
    trace.records.push_back(std::move(rec));
  }
  return trace;
}

}  // namespace edgesel
