#pragma once

// Evaluation protocol: micro-averaged F1 with the unavailability penalty,
// strategy runs over a scenario, selection ratios and assessment cost.

#include "edgesel/orchestrator.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace edgesel {

struct ConfusionCounts {
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;
};

/// Pooled over all windows and classes. A correct window is one TP; a wrong
/// prediction is one FP plus one FN; a window without a selected pipeline
/// is one FN.
ConfusionCounts confusion(const InferenceTrace& trace, std::span<const int> labels);

/// 2 TP / (2 TP + FP + FN); 0 when the denominator is 0.
double micro_f1(const InferenceTrace& trace, std::span<const int> labels);

/// Per-segment F1 time series (default one minute of 1 s windows). Each
/// segment scores covered_fraction * micro-F1 over its covered windows, so
/// uncovered moments contribute 0.
std::vector<double> segment_f1(const InferenceTrace& trace, std::span<const int> labels,
                               std::size_t segment_windows = 60);
/// Length-weighted mean of segment_f1.
double zeroed_f1(const InferenceTrace& trace, std::span<const int> labels,
                 std::size_t segment_windows = 60);

/// Fraction of selected windows served by each of `devices`; sums to 1.
/// Throws when the trace has no selected window.
std::vector<double> selection_ratio(const InferenceTrace& trace,
                                    std::span<const DeviceId> devices);

struct AssessmentCost {
  std::size_t assessment_count = 0;
  std::size_t model_execution_count = 0;
  /// Executions beyond one per assessed window: sum of (assessed - 1).
  std::size_t extra_execution_count = 0;
};

AssessmentCost assessment_cost(const InferenceTrace& trace);

/// A registered model plus the world it runs in. Non-owning.
struct Scenario {
  const Orchestrator* orchestrator = nullptr;
  ModelId model;
  const SensorSource* source = nullptr;
  AvailabilitySchedule schedule;
  double availability_p = 1.0;
  std::uint64_t seed = 0;
  std::vector<SystemEvent> events;

  std::vector<DeviceId> devices() const;
  std::vector<int> labels() const;
};

struct EvalReport {
  Strategy strategy;
  double availability_p = 1.0;
  std::uint64_t seed = 0;
  double micro_f1 = 0.0;
  /// Per-minute zero-averaged F1.
  double minute_f1 = 0.0;
  std::vector<DeviceId> devices;
  std::vector<double> selection_ratio;
  std::size_t assessment_count = 0;
  std::size_t execution_count = 0;
};

/// SingleAvg averages micro-F1 (and minute F1 and ratios) over one
/// FixedSingle run per device; its counts are totals over those runs.
EvalReport run_strategy(const Strategy& strategy, const Scenario& scenario,
                        const SelectionPolicy& policy);

/// Per-window omniscient selector: a window counts as correct when any
/// available translated pipeline predicts the true class. Upper bound for
/// margin-based selection.
InferenceTrace oracle_trace(const Scenario& scenario);

/// CSV columns: strategy,p,seed,micro_f1,ratio_d<id>...,assessment_count,
/// execution_count,minute_f1.
std::string encode_report_csv(std::span<const EvalReport> reports);
void write_report_csv(std::span<const EvalReport> reports, const std::filesystem::path& path);

struct CsvRow {
  std::string strategy;
  double availability_p = 0.0;
  std::uint64_t seed = 0;
  double micro_f1 = 0.0;
  std::vector<double> ratios;
  std::size_t assessment_count = 0;
  std::size_t execution_count = 0;
  double minute_f1 = 0.0;
};

std::vector<CsvRow> decode_report_csv(const std::string& text);
std::vector<CsvRow> read_report_csv(const std::filesystem::path& path);

struct SummaryCell {
  std::string strategy;
  double availability_p = 0.0;
  std::size_t runs = 0;
  double f1_mean = 0.0;
  double f1_std = 0.0;
  double minute_f1_mean = 0.0;
  double minute_f1_std = 0.0;
};

/// Mean and sample standard deviation per (strategy, p), in first-seen order.
std::vector<SummaryCell> summarize(std::span<const CsvRow> rows);
std::string format_summary(std::span<const SummaryCell> cells);

}  // namespace edgesel
