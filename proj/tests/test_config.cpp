#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "dmfg/config.hpp"

using namespace dmfg;

namespace {

std::vector<std::string> errors_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.errors().empty() ? std::vector<std::string>{e.what()} : e.errors();
  }
  return {};
}

bool mentions(const std::vector<std::string>& errs, const std::string& needle) {
  return std::any_of(errs.begin(), errs.end(), [&](const std::string& e) { return e.find(needle) != std::string::npos; });
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  RunConfig c;
  c.mc.probes = {{0.0, 1.0, 0.25}};
  c.coupling.params.g0.kind = "target_well";
  c.coupling.params.g0.center = {1.0, -0.5};
  const std::string s = serialize(c);
  const RunConfig back = parse_config(s);
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize(back), s);
}

TEST(Config, ExpressionDynamicsRoundTrip) {
  RunConfig c;
  c.dynamics.preset.clear();
  c.dynamics.sigma1 = "1";
  c.dynamics.sigma2 = "x1";
  c.dynamics.h = "x1*x1";
  EXPECT_EQ(parse_config(serialize(c)), c);
  EXPECT_TRUE(mentions(errors_of(R"({"dynamics": {"preset": "grushin_exp", "sigma1": "1", "sigma2": "1", "h": "1"}})"),
                       "not both"));
}

TEST(Config, UnknownKeysAreErrors) {
  auto errs = errors_of(R"({"grid": {"n1": 33, "nn": 2}})");
  ASSERT_EQ(errs.size(), 1u);
  EXPECT_EQ(errs[0], "grid.nn: unknown key");
  EXPECT_TRUE(mentions(errors_of(R"({"gird": {}})"), "gird: unknown key"));
  EXPECT_TRUE(mentions(errors_of(R"({"coupling": {"g0": {"kind": "zero", "depth": 1}}})"), "coupling.g0.depth"));
}

TEST(Config, SemanticErrors) {
  EXPECT_TRUE(mentions(errors_of(R"({"grid": {"n1": 2}})"), "violates n1 >= 4"));
  EXPECT_TRUE(mentions(errors_of(R"({"fixed_point": {"eps_schedule": [0.05, 0.1]}})"), "strictly decreasing"));
  EXPECT_TRUE(mentions(errors_of(R"({"dynamics": {"preset": "nope"}})"), "not a known preset"));
  EXPECT_TRUE(mentions(errors_of("{ not json"), "not valid JSON"));
}

TEST(Config, CollectsEveryError) {
  const auto type_errs = errors_of(R"({"grid": {"n1": "many", "x1_min": true}, "time": {"T": [1]}, "extra": 1})");
  EXPECT_EQ(type_errs.size(), 4u);
  const auto rule_errs = errors_of(R"({"grid": {"n1": 2, "n2": 3}, "time": {"T": -1}, "fixed_point": {"theta": 2}})");
  EXPECT_EQ(rule_errs.size(), 4u);
}

TEST(Config, HashFollowsContent) {
  RunConfig a, b;
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  b.output_dir = "elsewhere";
  b.dump_fields = false;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.mc.seed = 2;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(fnv1a(""), 14695981039346656037ull);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
}

TEST(Config, RefinedDoublesResolution) {
  RunConfig c;
  const RunConfig r = refined(c);
  EXPECT_EQ(r.grid.n1, 161u);
  EXPECT_EQ(r.time.nt, 65u);
  EXPECT_EQ(make_grid(r).dx1(), 0.5 * make_grid(c).dx1());
}

TEST(Config, PrevalidateRejectsCoarseTime) {
  RunConfig c = load_config(std::string(DMFG_CONFIG_DIR) + "/grushin_default.json");
  EXPECT_NO_THROW(prevalidate(c));
  c.time.nt = 3;
  try {
    prevalidate(c);
    ADD_FAILURE() << "coarse time step accepted";
  } catch (const ConfigError& e) {
    EXPECT_TRUE(mentions(e.errors(), "transport bound"));
  }
}

TEST(Config, ShippedConfigsAreValid) {
  std::size_t count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(DMFG_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    ++count;
    SCOPED_TRACE(entry.path().string());
    RunConfig c;
    ASSERT_NO_THROW(c = load_config(entry.path().string()));
    EXPECT_EQ(c.name, entry.path().stem().string());
    EXPECT_NO_THROW(prevalidate(c));
    EXPECT_EQ(parse_config(serialize(c)), c);
  }
  EXPECT_GE(count, 6u);
}
