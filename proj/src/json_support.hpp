#pragma once

// JSON encoders shared by the file formats. Internal to the library.

#include "edgesel/synthworld.hpp"

#include <json.hpp>

namespace edgesel::detail {

using nlohmann::json;

inline json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorCode::kParse, "ragged matrix in JSON");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

inline Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j.at(i).get<double>();
  return v;
}

inline json to_json(const WorldConfig& w) {
  json j{{"num_classes", w.num_classes},
         {"channels", w.channels},
         {"sample_rate", w.sample_rate},
         {"window_duration", w.window_duration},
         {"horizon_windows", w.horizon_windows},
         {"stay_probability", w.stay_probability},
         {"signature_seed", w.signature_seed},
         {"offset_spread", w.offset_spread},
         {"offset_jitter", w.offset_jitter},
         {"amplitude_jitter", w.amplitude_jitter},
         {"intrinsic_noise", w.intrinsic_noise}};
  j["transition"] = w.transition ? to_json(*w.transition) : json(nullptr);
  return j;
}

// Fields absent from `j` keep the values already in `base`.
inline WorldConfig world_from_json(const json& j, WorldConfig base = {}) {
  WorldConfig w = base;
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  read("num_classes", w.num_classes);
  read("channels", w.channels);
  read("sample_rate", w.sample_rate);
  read("window_duration", w.window_duration);
  read("horizon_windows", w.horizon_windows);
  read("stay_probability", w.stay_probability);
  read("signature_seed", w.signature_seed);
  read("offset_spread", w.offset_spread);
  read("offset_jitter", w.offset_jitter);
  read("amplitude_jitter", w.amplitude_jitter);
  read("intrinsic_noise", w.intrinsic_noise);
  if (j.contains("transition")) {
    if (j.at("transition").is_null()) {
      w.transition.reset();
    } else {
      w.transition = matrix_from_json(j.at("transition"));
    }
  }
  return w;
}

inline json to_json(const DeviceProfile& p) {
  return json{{"id", p.id.value()},
              {"gain", p.gain},
              {"bias", p.bias},
              {"noise_std", p.noise_std},
              {"quality",
               {{"period", p.quality.period},
                {"amplitude", p.quality.amplitude},
                {"phase", p.quality.phase}}}};
}

inline DeviceProfile profile_from_json(const json& j) {
  DeviceProfile p;
  p.id = DeviceId(j.at("id").get<std::uint32_t>());
  p.gain = j.at("gain").get<std::vector<double>>();
  p.bias = j.at("bias").get<std::vector<double>>();
  p.noise_std = j.at("noise_std").get<std::vector<double>>();
  if (j.contains("quality")) {
    const auto& q = j.at("quality");
    p.quality.period = q.value("period", p.quality.period);
    p.quality.amplitude = q.value("amplitude", p.quality.amplitude);
    p.quality.phase = q.value("phase", p.quality.phase);
  }
  return p;
}

}  // namespace edgesel::detail
