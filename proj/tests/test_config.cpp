#include <doctest.h>

#include "depanom/config.hpp"
#include "depanom/errors.hpp"

using namespace depanom;

TEST_CASE("toml subset: tables, scalars, comments, array-of-tables") {
    const char* text = R"(
# a comment
top = 1
[alpha]
name = "hello world"  # trailing comment
ratio = 0.25
flag = true
[alpha.nested]
k = -3
[[items]]
id = "a"
[[items]]
id = "b"
value = 2.5
)";
    TomlTable t = TomlTable::parse_string(text, "test");
    CHECK(t.get_int("top", 0) == 1);
    CHECK(t.get_string("alpha.name", "") == "hello world");
    CHECK(t.get_double("alpha.ratio", 0) == 0.25);
    CHECK(t.get_bool("alpha.flag", false));
    CHECK(t.get_int("alpha.nested.k", 0) == -3);
    REQUIRE(t.array_size("items") == 2);
    CHECK(t.get_string("items.0.id", "") == "a");
    CHECK(t.get_string("items.1.id", "") == "b");
    CHECK(t.get_double("items.1.value", 0) == 2.5);
    CHECK_FALSE(t.has("missing"));
    CHECK_THROWS_AS(t.require_int("missing"), ConfigError);
    CHECK_THROWS_AS(TomlTable::parse_string("novalue\n", "test"), ConfigError);
    CHECK_THROWS_AS(TomlTable::parse_string("[broken\n", "test"), ConfigError);
}

TEST_CASE("run config: defaults and scenario parsing") {
    const char* text = R"(
[paths]
out_dir = "outdir"
[run]
seed = 42
label_ratio = 0.1
[scenario]
steps = 500
gateways = 1
middles = 2
backends = 2
surge_start = 50
surge_len = 10
surge_multiplier = 2.0
[scenario.auto_faults]
count = 3
intensity = 1.5
[[scenario.faults]]
kind = "error_burst"
target = "be-00"
start = 100
duration = 10
)";
    RunConfig c = RunConfig::from_table(TomlTable::parse_string(text, "test"));
    CHECK(c.seed == 42);
    CHECK(c.label_ratio == 0.1);
    CHECK(c.encoder.dims.d_emb == 64);          // defaults hold
    CHECK(c.train.optimizer == OptimizerKind::adam);
    REQUIRE(c.has_scenario);
    CHECK(c.scenario.steps == 500);
    CHECK(c.scenario.seed == 42);               // inherits the run seed
    CHECK(c.tiers.middles == 2);
    CHECK(c.scenario.load.surge_multiplier == 2.0);
    REQUIRE(c.scenario.faults.size() == 1);
    CHECK(c.scenario.faults[0].kind == FaultKind::error_burst);
    CHECK(c.scenario.faults[0].intensity == 1.0);  // default
    CHECK(c.auto_fault.enabled);
    CHECK(c.auto_fault.count == 3);
    CHECK(c.auto_fault.intensity == 1.5);
}

TEST_CASE("run config: validation failures") {
    CHECK_THROWS_AS(RunConfig::from_table(TomlTable::parse_string("[split]\ntrain = 0.5\nval = 0.2\ntest = 0.2\n", "t")),
                    ConfigError);
    CHECK_THROWS_AS(RunConfig::from_table(TomlTable::parse_string("[run]\nlabel_ratio = 1.5\n", "t")),
                    ConfigError);
    CHECK_THROWS_AS(RunConfig::from_table(TomlTable::parse_string("[objective]\ntau = 0\n", "t")),
                    ConfigError);
    CHECK_THROWS_AS(RunConfig::from_table(TomlTable::parse_string("[train]\nepochs = 0\n", "t")),
                    ConfigError);
}

TEST_CASE("run config: contiguous split ranges") {
    RunConfig c;
    CHECK(c.train_range(2000).begin == 0);
    CHECK(c.train_range(2000).end == 1200);
    CHECK(c.val_range(2000).begin == 1200);
    CHECK(c.val_range(2000).end == 1600);
    CHECK(c.test_range(2000).begin == 1600);
    CHECK(c.test_range(2000).end == 2000);
}

TEST_CASE("default e2e config matches the documented scenario") {
    RunConfig c = default_e2e_config();
    REQUIRE(c.has_scenario);
    CHECK(c.tiers.gateways == 2);
    CHECK(c.tiers.middles == 6);
    CHECK(c.tiers.backends == 4);
    CHECK(c.scenario.steps == 2000);
    CHECK(c.auto_fault.count == 8);
    CHECK(c.auto_fault.intensity == 2.0);
    CHECK(c.scenario.noise_sigma == 0.2);
    CHECK(c.label_ratio == 0.10);
    CHECK(c.scenario.load.surge_start == 200);
    CHECK(c.scenario.load.surge_multiplier == 3.0);
    CHECK_NOTHROW(c.validate());
}
