#include "edgesel/config.hpp"

#include "edgesel/dataset.hpp"
#include "json_support.hpp"

#include <cmath>
#include <numbers>
#include <set>

namespace edgesel {
namespace {

using detail::json;

[[noreturn]] void config_error(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::kConfig, "config field '" + field + "': " + what);
}

// Typed access to one JSON object that remembers its dotted path and rejects
// keys nobody asked about.
class Reader {
 public:
  Reader(const json& j, std::string path, std::set<std::string> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_error(path_.empty() ? "<root>" : path_, "expected an object");
    for (const auto& [key, _] : j_.items()) {
      if (!allowed.contains(key)) config_error(field(key), "unknown key");
    }
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  const json& raw(const std::string& key) const { return j_.at(key); }

  template <typename T>
  void get(const std::string& key, T& out) const {
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      config_error(field(key), "has the wrong type");
    }
  }

  void get_device(const std::string& key, DeviceId& out) const {
    std::uint32_t v = out.value();
    get(key, v);
    out = DeviceId(v);
  }

 private:
  const json& j_;
  std::string path_;
};

template <typename Fn>
void rethrow_as_config(const std::string& field, Fn fn) {
  try {
    fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    config_error(field, e.what());
  } catch (const json::exception&) {
    config_error(field, "has the wrong type");
  }
}

DeviceProfile read_profile(const json& j, const std::string& path) {
  Reader r(j, path, {"id", "gain", "bias", "noise_std", "quality"});
  if (!r.has("id")) config_error(r.field("id"), "is required");
  DeviceProfile p;
  r.get_device("id", p.id);
  r.get("gain", p.gain);
  r.get("bias", p.bias);
  r.get("noise_std", p.noise_std);
  if (r.has("quality")) {
    Reader q(r.raw("quality"), r.field("quality"), {"period", "amplitude", "phase"});
    q.get("period", p.quality.period);
    q.get("amplitude", p.quality.amplitude);
    q.get("phase", p.quality.phase);
  }
  return p;
}

WorldConfig read_world(const json& j, WorldConfig base) {
  Reader r(j, "world",
           {"num_classes", "channels", "sample_rate", "window_duration", "horizon_windows",
            "stay_probability", "transition", "signature_seed", "offset_spread",
            "offset_jitter", "amplitude_jitter", "intrinsic_noise"});
  WorldConfig w;
  rethrow_as_config("world", [&] { w = detail::world_from_json(j, base); });
  return w;
}

json profile_json(const DeviceProfile& p) { return detail::to_json(p); }

}  // namespace

ClassifierOptions ModelSettings::options(ModelId id, std::uint64_t seed) const {
  ClassifierOptions o;
  o.id = id;
  o.seed = seed;
  o.var_smoothing = var_smoothing;
  o.uniform_prior = uniform_prior;
  o.step = step;
  o.iterations = iterations;
  o.l2 = l2;
  return o;
}

std::vector<Strategy> ExperimentConfig::parsed_strategies() const {
  std::vector<Strategy> out;
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    rethrow_as_config("strategies[" + std::to_string(i) + "]",
                      [&] { out.push_back(parse_strategy(strategies[i])); });
  }
  return out;
}

void ExperimentConfig::validate() const {
  rethrow_as_config("world", [&] { world.validate(); });
  if (devices.empty()) config_error("devices", "at least one device is required");
  if (devices.size() > 64) config_error("devices", "at most 64 devices are supported");
  std::set<DeviceId> ids;
  for (std::size_t i = 0; i < devices.size(); ++i) {
    const std::string path = "devices[" + std::to_string(i) + "]";
    rethrow_as_config(path, [&] { devices[i].validate(world.channels); });
    if (!ids.insert(devices[i].id).second) config_error(path + ".id", "duplicate device id");
  }
  // Availability schedules address devices by position.
  std::uint32_t expect = 0;
  for (DeviceId id : ids) {
    if (id.value() != expect++) config_error("devices", "device ids must be 0..n-1");
  }
  if (!ids.contains(model.training_device)) {
    config_error("model.training_device", "is not a defined device");
  }
  if (model.train_windows < 1) config_error("model.train_windows", "must be >= 1");
  if (model.unlabeled_windows < 1) config_error("model.unlabeled_windows", "must be >= 1");
  if (!(model.var_smoothing > 0.0) || !std::isfinite(model.var_smoothing)) {
    config_error("model.var_smoothing", "must be positive");
  }
  if (!(model.step > 0.0)) config_error("model.step", "must be positive");
  if (model.iterations < 1) config_error("model.iterations", "must be >= 1");
  if (!(model.l2 >= 0.0)) config_error("model.l2", "must be >= 0");
  if (translation.min_samples < 2) config_error("translation.min_samples", "must be >= 2");
  if (!ids.contains(translation.source)) {
    config_error("translation.source", "is not a defined device");
  }
  if (!ids.contains(translation.target)) {
    config_error("translation.target", "is not a defined device");
  }
  if (p_values.empty()) config_error("p_values", "must not be empty");
  for (std::size_t i = 0; i < p_values.size(); ++i) {
    if (!(p_values[i] > 0.0 && p_values[i] <= 1.0)) {
      config_error("p_values[" + std::to_string(i) + "]", "must lie in (0, 1]");
    }
  }
  if (epoch && !(*epoch > 0.0)) config_error("epoch", "must be positive");
  rethrow_as_config("policy", [&] { policy.validate(); });
  if (std::abs(policy.assessment_window - world.window_duration) > 1e-9) {
    config_error("policy.assessment_window", "must equal world.window_duration");
  }
  const double ratio = policy.interval / world.window_duration;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) {
    config_error("policy.interval", "must be a whole number of windows");
  }
  if (strategies.empty()) config_error("strategies", "must not be empty");
  for (const auto& s : parsed_strategies()) {
    if (s.kind == StrategyKind::kFixedSingle && !ids.contains(s.device)) {
      config_error("strategies", "single:" + std::to_string(s.device.value()) +
                                     " names an undefined device");
    }
  }
  if (seeds.empty()) config_error("seeds", "must not be empty");
  rethrow_as_config("simulate.strategy", [&] { (void)parse_strategy(simulate.strategy); });
  if (!(simulate.p > 0.0 && simulate.p <= 1.0)) config_error("simulate.p", "must lie in (0, 1]");
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  return world == o.world && devices == o.devices && model == o.model &&
         translation == o.translation && p_values == o.p_values && epoch == o.epoch &&
         policy == o.policy && strategies == o.strategies && seeds == o.seeds &&
         simulate == o.simulate && outputs == o.outputs && jobs == o.jobs;
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  const int C = c.world.channels;
  constexpr double kThird = 2.0 * std::numbers::pi / 3.0;

  DeviceProfile d0 = DeviceProfile::identity(DeviceId(0), C, 0.6);
  d0.quality = {120.0, 0.8, 0.0};

  DeviceProfile d1;
  d1.id = DeviceId(1);
  d1.gain = {1.6, 1.4, 1.8, 1.5, 1.7, 1.3};
  d1.bias = {0.6, -0.5, 0.4, -0.3, 0.7, -0.6};
  d1.quality = {120.0, 0.8, kThird};

  DeviceProfile d2;
  d2.id = DeviceId(2);
  d2.gain = {0.7, 0.8, 0.6, 0.75, 0.65, 0.8};
  d2.bias = {-0.4, 0.5, -0.6, 0.3, -0.5, 0.4};
  d2.quality = {120.0, 0.8, 2.0 * kThird};

  // Noise scales with gain, so the inverse affine map carries each foreign
  // device exactly onto device 0's distribution.
  for (DeviceProfile* d : {&d1, &d2}) {
    for (double g : d->gain) d->noise_std.push_back(0.6 * g);
  }
  c.devices = {d0, d1, d2};
  c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("config is not valid JSON: ") + e.what());
  }
  Reader r(j, "",
           {"world", "devices", "model", "translation", "p_values", "epoch", "policy",
            "strategies", "seeds", "simulate", "outputs", "jobs"});
  ExperimentConfig c = default_config();
  if (r.has("world")) c.world = read_world(r.raw("world"), c.world);
  if (r.has("devices")) {
    const auto& arr = r.raw("devices");
    if (!arr.is_array()) config_error("devices", "expected an array");
    c.devices.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      c.devices.push_back(read_profile(arr[i], "devices[" + std::to_string(i) + "]"));
    }
  }
  if (r.has("model")) {
    Reader m(r.raw("model"), "model",
             {"training_device", "variant", "train_windows", "unlabeled_windows",
              "var_smoothing", "uniform_prior", "step", "iterations", "l2"});
    m.get_device("training_device", c.model.training_device);
    if (m.has("variant")) {
      std::string v;
      m.get("variant", v);
      rethrow_as_config("model.variant", [&] { c.model.variant = parse_classifier_variant(v); });
    }
    m.get("train_windows", c.model.train_windows);
    m.get("unlabeled_windows", c.model.unlabeled_windows);
    m.get("var_smoothing", c.model.var_smoothing);
    m.get("uniform_prior", c.model.uniform_prior);
    m.get("step", c.model.step);
    m.get("iterations", c.model.iterations);
    m.get("l2", c.model.l2);
  }
  if (r.has("translation")) {
    Reader t(r.raw("translation"), "translation",
             {"mode", "min_samples", "regularize", "source", "target"});
    if (t.has("mode")) {
      std::string v;
      t.get("mode", v);
      rethrow_as_config("translation.mode", [&] { c.translation.mode = parse_alignment_mode(v); });
    }
    t.get("min_samples", c.translation.min_samples);
    t.get("regularize", c.translation.regularize);
    t.get_device("source", c.translation.source);
    t.get_device("target", c.translation.target);
  }
  r.get("p_values", c.p_values);
  if (r.has("epoch")) {
    if (r.raw("epoch").is_null()) {
      c.epoch.reset();
    } else {
      double e = 0.0;
      r.get("epoch", e);
      c.epoch = e;
    }
  }
  if (r.has("policy")) {
    Reader p(r.raw("policy"), "policy", {"interval", "assessment_window", "tie_break"});
    p.get("interval", c.policy.interval);
    p.get("assessment_window", c.policy.assessment_window);
    if (p.has("tie_break")) {
      std::string v;
      p.get("tie_break", v);
      rethrow_as_config("policy.tie_break", [&] { c.policy.tie_break = parse_tie_break(v); });
    }
  }
  r.get("strategies", c.strategies);
  r.get("seeds", c.seeds);
  if (r.has("simulate")) {
    Reader s(r.raw("simulate"), "simulate", {"strategy", "p", "seed", "model_file"});
    s.get("strategy", c.simulate.strategy);
    s.get("p", c.simulate.p);
    s.get("seed", c.simulate.seed);
    s.get("model_file", c.simulate.model_file);
  }
  if (r.has("outputs")) {
    Reader o(r.raw("outputs"), "outputs", {"dataset", "model", "operator", "trace", "report"});
    o.get("dataset", c.outputs.dataset);
    o.get("model", c.outputs.model);
    o.get("operator", c.outputs.op);
    o.get("trace", c.outputs.trace);
    o.get("report", c.outputs.report);
  }
  r.get("jobs", c.jobs);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kIo, "config file not found: " + path.string());
  }
  return parse_config(read_file(path));
}

std::string dump_config(const ExperimentConfig& c) {
  json j;
  j["world"] = detail::to_json(c.world);
  j["devices"] = json::array();
  for (const auto& d : c.devices) j["devices"].push_back(profile_json(d));
  j["model"] = {{"training_device", c.model.training_device.value()},
                {"variant", std::string(to_string(c.model.variant))},
                {"train_windows", c.model.train_windows},
                {"unlabeled_windows", c.model.unlabeled_windows},
                {"var_smoothing", c.model.var_smoothing},
                {"uniform_prior", c.model.uniform_prior},
                {"step", c.model.step},
                {"iterations", c.model.iterations},
                {"l2", c.model.l2}};
  j["translation"] = {{"mode", std::string(to_string(c.translation.mode))},
                      {"min_samples", c.translation.min_samples},
                      {"regularize", c.translation.regularize},
                      {"source", c.translation.source.value()},
                      {"target", c.translation.target.value()}};
  j["p_values"] = c.p_values;
  j["epoch"] = c.epoch ? json(*c.epoch) : json(nullptr);
  j["policy"] = {{"interval", c.policy.interval},
                 {"assessment_window", c.policy.assessment_window},
                 {"tie_break", std::string(to_string(c.policy.tie_break))}};
  j["strategies"] = c.strategies;
  j["seeds"] = c.seeds;
  j["simulate"] = {{"strategy", c.simulate.strategy},
                   {"p", c.simulate.p},
                   {"seed", c.simulate.seed},
                   {"model_file", c.simulate.model_file}};
  j["outputs"] = {{"dataset", c.outputs.dataset},
                  {"model", c.outputs.model},
                  {"operator", c.outputs.op},
                  {"trace", c.outputs.trace},
                  {"report", c.outputs.report}};
  j["jobs"] = c.jobs;
  return j.dump(2) + "\n";
}

}  // namespace edgesel
