#include "edgesel/evaluation.hpp"

#include "edgesel/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

namespace edgesel {
namespace {

void check_lengths(const InferenceTrace& trace, std::span<const int> labels) {
  if (trace.records.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "trace has " + std::to_string(trace.records.size()) + " windows but " +
                    std::to_string(labels.size()) + " labels were given");
  }
}

double f1_from(const ConfusionCounts& c) {
  const double denom = 2.0 * static_cast<double>(c.true_positive) +
                       static_cast<double>(c.false_positive) +
                       static_cast<double>(c.false_negative);
  return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(c.true_positive) / denom;
}

std::string format_double(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

ConfusionCounts confusion(const InferenceTrace& trace, std::span<const int> labels) {
  check_lengths(trace, labels);
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& r = trace.records[i];
    if (!r.selected || !r.predicted) {
      ++c.false_negative;
    } else if (*r.predicted == labels[i]) {
      ++c.true_positive;
    } else {
      ++c.false_positive;
      ++c.false_negative;
    }
  }
  return c;
}

double micro_f1(const InferenceTrace& trace, std::span<const int> labels) {
  return f1_from(confusion(trace, labels));
}

std::vector<double> segment_f1(const InferenceTrace& trace, std::span<const int> labels,
                               std::size_t segment_windows) {
  check_lengths(trace, labels);
  if (segment_windows == 0) {
    throw Error(ErrorCode::kInvalidArgument, "segment length must be positive");
  }
  std::vector<double> out;
  for (std::size_t start = 0; start < labels.size(); start += segment_windows) {
    const std::size_t end = std::min(labels.size(), start + segment_windows);
    ConfusionCounts covered;
    std::size_t n_covered = 0;
    for (std::size_t i = start; i < end; ++i) {
      const auto& r = trace.records[i];
      if (!r.selected || !r.predicted) continue;
      ++n_covered;
      if (*r.predicted == labels[i]) {
        ++covered.true_positive;
      } else {
        ++covered.false_positive;
        ++covered.false_negative;
      }
    }
    const double fraction = static_cast<double>(n_covered) / static_cast<double>(end - start);
    out.push_back(fraction * f1_from(covered));
  }
  return out;
}

double zeroed_f1(const InferenceTrace& trace, std::span<const int> labels,
                 std::size_t segment_windows) {
  const auto segments = segment_f1(trace, labels, segment_windows);
  if (segments.empty()) return 0.0;
  double weighted = 0.0;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const std::size_t start = s * segment_windows;
    const std::size_t len = std::min(labels.size(), start + segment_windows) - start;
    weighted += segments[s] * static_cast<double>(len);
  }
  return weighted / static_cast<double>(labels.size());
}

std::vector<double> selection_ratio(const InferenceTrace& trace,
                                    std::span<const DeviceId> devices) {
  if (trace.records.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "selection ratio of an empty trace");
  }
  std::vector<double> counts(devices.size(), 0.0);
  std::size_t selected = 0;
  for (const auto& r : trace.records) {
    if (!r.selected_device) continue;
    auto it = std::find(devices.begin(), devices.end(), *r.selected_device);
    if (it == devices.end()) {
      throw Error(ErrorCode::kUnknownId, "trace selects device " +
                                             std::to_string(r.selected_device->value()) +
                                             " outside the given device list");
    }
    counts[static_cast<std::size_t>(it - devices.begin())] += 1.0;
    ++selected;
  }
  if (selected == 0) {
    throw Error(ErrorCode::kInvalidArgument, "trace has no selected windows");
  }
  for (double& c : counts) c /= static_cast<double>(selected);
  return counts;
}

AssessmentCost assessment_cost(const InferenceTrace& trace) {
  AssessmentCost cost;
  for (const auto& r : trace.records) {
    cost.model_execution_count += r.executions();
    if (r.assessed) {
      ++cost.assessment_count;
      if (!r.margins.empty()) cost.extra_execution_count += r.margins.size() - 1;
    }
  }
  return cost;
}

std::vector<DeviceId> Scenario::devices() const { return orchestrator->devices(); }

std::vector<int> Scenario::labels() const {
  std::vector<int> out(source->num_windows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = source->true_label(i);
  return out;
}

EvalReport run_strategy(const Strategy& strategy, const Scenario& scenario,
                        const SelectionPolicy& policy) {
  if (!scenario.orchestrator || !scenario.source) {
    throw Error(ErrorCode::kInvalidArgument, "scenario is missing its world or runtime");
  }
  EvalReport report;
  report.strategy = strategy;
  report.availability_p = scenario.availability_p;
  report.seed = scenario.seed;
  report.devices = scenario.devices();
  const auto labels = scenario.labels();

  auto ratios_or_zero = [&](const InferenceTrace& trace) {
    try {
      return selection_ratio(trace, report.devices);
    } catch (const Error&) {
      return std::vector<double>(report.devices.size(), 0.0);
    }
  };

  if (strategy.kind == StrategyKind::kSingleAvg) {
    report.selection_ratio.assign(report.devices.size(), 0.0);
    const auto n = static_cast<double>(report.devices.size());
    for (DeviceId d : report.devices) {
      const auto trace = scenario.orchestrator->run(scenario.model, *scenario.source,
                                                    scenario.schedule, policy,
                                                    Strategy::fixed_single(d), scenario.events);
      report.micro_f1 += micro_f1(trace, labels) / n;
      report.minute_f1 += zeroed_f1(trace, labels) / n;
      const auto r = ratios_or_zero(trace);
      for (std::size_t i = 0; i < r.size(); ++i) report.selection_ratio[i] += r[i] / n;
      const auto cost = assessment_cost(trace);
      report.assessment_count += cost.assessment_count;
      report.execution_count += cost.model_execution_count;
    }
    return report;
  }

  const auto trace = scenario.orchestrator->run(scenario.model, *scenario.source,
                                                scenario.schedule, policy, strategy,
                                                scenario.events);
  report.micro_f1 = micro_f1(trace, labels);
  report.minute_f1 = zeroed_f1(trace, labels);
  report.selection_ratio = ratios_or_zero(trace);
  const auto cost = assessment_cost(trace);
  report.assessment_count = cost.assessment_count;
  report.execution_count = cost.model_execution_count;
  return report;
}

InferenceTrace oracle_trace(const Scenario& scenario) {
  const auto& orch = *scenario.orchestrator;
  const auto& source = *scenario.source;
  const auto devices = orch.devices();
  InferenceTrace trace;
  trace.strategy = "oracle";
  for (std::size_t w = 0; w < source.num_windows(); ++w) {
    const double t = static_cast<double>(w) * source.window_duration();
    std::uint64_t mask = 0;
    for (DeviceId d : devices) {
      if (orch.device_present(d) && scenario.schedule.available(d, t)) {
        mask |= std::uint64_t{1} << d.value();
      }
    }
    TraceRecord rec;
    rec.time = t;
    rec.true_class = source.true_label(w);
    rec.availability = mask;
    const auto report = orch.assess(scenario.model, source, w, mask, true);
    for (const auto& e : report.entries) {
      if (!e.posterior) continue;
      const int predicted = static_cast<int>(e.posterior->argmax());
      if (!rec.selected || predicted == rec.true_class) {
        const bool already_right = rec.predicted && *rec.predicted == rec.true_class;
        if (!already_right) {
          rec.selected = e.pipeline;
          rec.selected_device = e.device;
          rec.predicted = predicted;
        }
      }
    }
    trace.records.push_back(std::move(rec));
  }
  return trace;
}

std::string encode_report_csv(std::span<const EvalReport> reports) {
  std::vector<DeviceId> columns;
  for (const auto& r : reports) {
    for (DeviceId d : r.devices) {
      if (std::find(columns.begin(), columns.end(), d) == columns.end()) columns.push_back(d);
    }
  }
  std::sort(columns.begin(), columns.end());
  std::ostringstream out;
  out << "strategy,p,seed,micro_f1";
  for (DeviceId d : columns) out << ",ratio_d" << d.value();
  out << ",assessment_count,execution_count,minute_f1\n";
  for (const auto& r : reports) {
    out << to_string(r.strategy) << ',' << format_double(r.availability_p) << ',' << r.seed
        << ',' << format_double(r.micro_f1);
    for (DeviceId d : columns) {
      auto it = std::find(r.devices.begin(), r.devices.end(), d);
      const double v = it == r.devices.end()
                           ? 0.0
                           : r.selection_ratio[static_cast<std::size_t>(it - r.devices.begin())];
      out << ',' << format_double(v);
    }
    out << ',' << r.assessment_count << ',' << r.execution_count << ','
        << format_double(r.minute_f1) << '\n';
  }
  return out.str();
}

void write_report_csv(std::span<const EvalReport> reports, const std::filesystem::path& path) {
  write_file_atomic(path, encode_report_csv(reports));
}

std::vector<CsvRow> decode_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParse, "report CSV is empty");
  const auto header = split_csv(line);
  if (header.size() < 7 || header[0] != "strategy" || header[1] != "p" || header[2] != "seed" ||
      header[3] != "micro_f1" || header[header.size() - 3] != "assessment_count" ||
      header[header.size() - 2] != "execution_count" || header.back() != "minute_f1") {
    throw Error(ErrorCode::kParse, "unexpected report CSV header");
  }
  const std::size_t n_ratios = header.size() - 7;
  std::vector<CsvRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) {
      throw Error(ErrorCode::kParse, "report CSV line " + std::to_string(line_no) +
                                         " has " + std::to_string(f.size()) + " fields");
    }
    try {
      CsvRow row;
      row.strategy = f[0];
      row.availability_p = std::stod(f[1]);
      row.seed = std::stoull(f[2]);
      row.micro_f1 = std::stod(f[3]);
      for (std::size_t i = 0; i < n_ratios; ++i) row.ratios.push_back(std::stod(f[4 + i]));
      row.assessment_count = std::stoull(f[4 + n_ratios]);
      row.execution_count = std::stoull(f[5 + n_ratios]);
      row.minute_f1 = std::stod(f[6 + n_ratios]);
      rows.push_back(std::move(row));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kParse, "report CSV line " + std::to_string(line_no) +
                                         " has a malformed number");
    }
  }
  return rows;
}

std::vector<CsvRow> read_report_csv(const std::filesystem::path& path) {
  return decode_report_csv(read_file(path));
}

std::vector<SummaryCell> summarize(std::span<const CsvRow> rows) {
  std::vector<SummaryCell> cells;
  std::vector<std::vector<const CsvRow*>> members;
  for (const auto& row : rows) {
    auto it = std::find_if(cells.begin(), cells.end(), [&](const SummaryCell& c) {
      return c.strategy == row.strategy && c.availability_p == row.availability_p;
    });
    if (it == cells.end()) {
      cells.push_back({row.strategy, row.availability_p});
      members.emplace_back();
      it = cells.end() - 1;
    }
    members[static_cast<std::size_t>(it - cells.begin())].push_back(&row);
  }
  auto stats = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  };
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::vector<double> f1, minute;
    for (const CsvRow* r : members[i]) {
      f1.push_back(r->micro_f1);
      minute.push_back(r->minute_f1);
    }
    cells[i].runs = f1.size();
    stats(f1, cells[i].f1_mean, cells[i].f1_std);
    stats(minute, cells[i].minute_f1_mean, cells[i].minute_f1_std);
  }
  return cells;
}

std::string format_summary(std::span<const SummaryCell> cells) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "strategy" << std::setw(6) << "p" << std::setw(6)
      << "runs" << std::setw(20) << "micro_f1" << "minute_f1\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& c : cells) {
    std::ostringstream f1, minute, p;
    f1 << std::fixed << std::setprecision(4) << c.f1_mean << " +- " << c.f1_std;
    minute << std::fixed << std::setprecision(4) << c.minute_f1_mean << " +- " << c.minute_f1_std;
    p << std::setprecision(2) << std::fixed << c.availability_p;
    out << std::setw(12) << c.strategy << std::setw(6) << p.str() << std::setw(6) << c.runs
        << std::setw(20) << f1.str() << minute.str() << '\n';
  }
  return out.str();
}

}  // namespace edgesel
