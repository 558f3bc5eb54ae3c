#include "test_support.hpp"

#include <doctest.h>

#include <set>

using namespace edgesel;

TEST_SUITE("experiment") {
  TEST_CASE("sub-seeds are distinct per purpose") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 20; ++s) {
      for (std::uint64_t tag = 0; tag < 5; ++tag) seen.insert(derive_seed(s, tag));
    }
    CHECK(seen.size() == 100);
    CHECK(derive_seed(3, 4, 5) == derive_seed(3, 4, 5));
  }

  TEST_CASE("grid cardinality and ordering") {
    ExperimentConfig cfg = testing::small_config(60);
    cfg.seeds = {1, 2, 3};
    cfg.p_values = {0.8, 1.0};
    cfg.strategies = {"single-avg", "native", "full"};
    cfg.jobs = 1;
    const auto rows = run_grid(cfg);
    REQUIRE(rows.size() == 3 * 2 * 3);
    std::size_t i = 0;
    for (const auto& s : cfg.strategies) {
      for (double p : cfg.p_values) {
        for (auto seed : cfg.seeds) {
          CHECK(to_string(rows[i].strategy) == s);
          CHECK(rows[i].availability_p == p);
          CHECK(rows[i].seed == seed);
          ++i;
        }
      }
    }

    cfg.jobs = 3;
    const auto parallel = run_grid(cfg);
    CHECK(encode_report_csv(parallel) == encode_report_csv(rows));
  }

  TEST_CASE("schedules for different p are coupled") {
    const auto cfg = testing::small_config(200);
    const auto lo = make_schedule(cfg, 4, 0.7);
    const auto hi = make_schedule(cfg, 4, 0.9);
    for (std::size_t e = 0; e < lo.num_epochs(); ++e) {
      for (std::size_t d = 0; d < 3; ++d) {
        if (lo.at(e, d)) CHECK(hi.at(e, d));
      }
    }
  }

  TEST_CASE("simulation is deterministic") {
    const auto cfg = testing::small_config(80);
    const Experiment a(cfg, 6);
    const Experiment b(cfg, 6);
    CHECK(a.simulate(Strategy::full(), 0.8) == b.simulate(Strategy::full(), 0.8));
    const Experiment c(cfg, 7);
    CHECK_FALSE(a.simulate(Strategy::full(), 0.8) == c.simulate(Strategy::full(), 0.8));
  }

  TEST_CASE("a supplied model replaces the trained one") {
    const auto cfg = testing::small_config(50);
    const auto model = train_model(cfg, 9);
    const Experiment with(cfg, 9, model);
    const Experiment without(cfg, 9);
    CHECK(with.orchestrator().model(with.model()) == without.orchestrator().model(without.model()));
    CHECK(with.simulate(Strategy::qs(), 1.0) == without.simulate(Strategy::qs(), 1.0));
  }
}
