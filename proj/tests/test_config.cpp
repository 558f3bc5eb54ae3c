#include "test_support.hpp"

#include <doctest.h>

#include <string>

using namespace edgesel;

namespace {

std::string config_error(const std::string& text) {
  try {
    (void)parse_config(text);
  } catch (const Error& e) {
    return std::string(to_string(e.code())) + ": " + e.what();
  }
  return "no error";
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("dump and parse round-trip") {
    const auto c = default_config();
    CHECK(parse_config(dump_config(c)) == c);
    CHECK(dump_config(parse_config(dump_config(c))) == dump_config(c));

    ExperimentConfig custom = c;
    custom.epoch = 5.0;
    custom.world.transition = Eigen::MatrixXd::Constant(8, 8, 1.0 / 8.0);
    custom.strategies = {"single:2", "full"};
    custom.seeds = {9, 11};
    custom.translation.mode = AlignmentMode::kFull;
    custom.policy.tie_break = TieBreak::kLowestId;
    custom.model.variant = ClassifierVariant::kLogistic;
    custom.p_values = {0.35, 1.0};
    CHECK(parse_config(dump_config(custom)) == custom);
  }

  TEST_CASE("bundled config is the default scenario") {
    const auto c = load_config(std::string(EDGESEL_SOURCE_DIR) + "/configs/default.config");
    CHECK(c == default_config());
    CHECK(c.devices.size() == 3);
    CHECK(c.world.num_classes == 8);
    CHECK(c.model.training_device == DeviceId(0));
    CHECK(c.p_values == std::vector<double>{0.7, 0.8, 0.9, 1.0});
    CHECK(c.policy.interval == 10.0);
    CHECK(c.seeds.size() >= 10);
  }

  TEST_CASE("partial documents keep defaults") {
    const auto c = parse_config(R"({"seeds": [4], "policy": {"interval": 20}})");
    CHECK(c.seeds == std::vector<std::uint64_t>{4});
    CHECK(c.policy.interval == 20.0);
    CHECK(c.devices == default_config().devices);
  }

  TEST_CASE("validation names the offending field") {
    CHECK(config_error(R"({"policy": {"intervall": 10}})").find("policy.intervall") !=
          std::string::npos);
    CHECK(config_error(R"({"p_values": [0.5, 1.5]})").find("p_values[1]") != std::string::npos);
    CHECK(config_error(R"({"p_values": [0.0]})").find("p_values[0]") != std::string::npos);
    CHECK(config_error(R"({"seeds": []})").find("'seeds'") != std::string::npos);
    CHECK(config_error(R"({"strategies": ["best"]})").find("strategies[0]") != std::string::npos);
    CHECK(config_error(R"({"model": {"training_device": 5}})").find("model.training_device") !=
          std::string::npos);
    CHECK(config_error(R"({"world": {"num_classes": "eight"}})").find("world") !=
          std::string::npos);
    CHECK(config_error(R"({"devices": [{"id": 0, "gain": [1], "bias": [0], "noise_std": [0]}]})")
              .find("devices[0]") != std::string::npos);
    CHECK(config_error(R"({"policy": {"interval": 2.5}})").find("policy.interval") !=
          std::string::npos);
    CHECK(config_error(R"({"strategies": ["single:7"]})").find("strategies") != std::string::npos);
    CHECK(config_error(R"({"translation": {"mode": "affine"}})").find("translation.mode") !=
          std::string::npos);
    CHECK(config_error("{").rfind("parse", 0) == 0);
    CHECK(config_error("{}") == "no error");
  }
}
