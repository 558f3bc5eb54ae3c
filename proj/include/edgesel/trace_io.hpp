#pragma once

// Line-delimited JSON encoding of inference traces, one record per window:
//
//   {"assessed":true,"availability":7,"margins":[{"device":0,"margin":0.41,
//    "pipeline":0},...],"predicted_class":3,"selected_device":0,
//    "selected_pipeline":0,"strategy":"full","time":0.0,"true_class":3}
//
// Absent selections and predictions are null; "margins" appears only on
// assessed windows. Keys are emitted in sorted order.

#include "edgesel/orchestrator.hpp"

#include <filesystem>
#include <string>

namespace edgesel {

std::string encode_trace(const InferenceTrace& trace);
InferenceTrace decode_trace(const std::string& text);

void write_trace(const InferenceTrace& trace, const std::filesystem::path& path);
InferenceTrace read_trace(const std::filesystem::path& path);

}  // namespace edgesel
