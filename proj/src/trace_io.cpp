#include "edgesel/trace_io.hpp"

#include "edgesel/dataset.hpp"
#include "json_support.hpp"

#include <sstream>

namespace edgesel {

std::string encode_trace(const InferenceTrace& trace) {
  using detail::json;
  std::string out;
  for (const auto& r : trace.records) {
    json j;
    j["time"] = r.time;
    j["strategy"] = trace.strategy;
    j["selected_pipeline"] = r.selected ? json(r.selected->value()) : json(nullptr);
    j["selected_device"] = r.selected_device ? json(r.selected_device->value()) : json(nullptr);
    j["predicted_class"] = r.predicted ? json(*r.predicted) : json(nullptr);
    j["true_class"] = r.true_class;
    j["availability"] = r.availability;
    j["assessed"] = r.assessed;
    if (r.assessed) {
      json margins = json::array();
      for (const auto& m : r.margins) {
        margins.push_back({{"pipeline", m.pipeline.value()},
                           {"device", m.device.value()},
                           {"margin", m.margin}});
      }
      j["margins"] = std::move(margins);
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

InferenceTrace decode_trace(const std::string& text) {
  using detail::json;
  InferenceTrace trace;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const auto strategy = j.at("strategy").get<std::string>();
      if (trace.records.empty()) {
        trace.strategy = strategy;
      } else if (strategy != trace.strategy) {
        throw Error(ErrorCode::kParse, "trace mixes strategies at line " + std::to_string(line_no));
      }
      TraceRecord r;
      r.time = j.at("time").get<double>();
      if (!j.at("selected_pipeline").is_null()) {
        r.selected = PipelineId(j.at("selected_pipeline").get<std::uint32_t>());
      }
      if (!j.at("selected_device").is_null()) {
        r.selected_device = DeviceId(j.at("selected_device").get<std::uint32_t>());
      }
      if (!j.at("predicted_class").is_null()) r.predicted = j.at("predicted_class").get<int>();
      r.true_class = j.at("true_class").get<int>();
      r.availability = j.at("availability").get<std::uint64_t>();
      r.assessed = j.at("assessed").get<bool>();
      if (r.assessed) {
        for (const auto& m : j.at("margins")) {
          r.margins.push_back({PipelineId(m.at("pipeline").get<std::uint32_t>()),
                               DeviceId(m.at("device").get<std::uint32_t>()),
                               m.at("margin").get<double>()});
        }
      }
      trace.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, "trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return trace;
}

void write_trace(const InferenceTrace& trace, const std::filesystem::path& path) {
  write_file_atomic(path, encode_trace(trace));
}

InferenceTrace read_trace(const std::filesystem::path& path) {
  return decode_trace(read_file(path));
}

}  // namespace edgesel
