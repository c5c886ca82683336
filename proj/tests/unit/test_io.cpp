#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "blockboot/io.hpp"

using namespace blockboot;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "blockboot-io-tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Numbers, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(2.0), "2");
  EXPECT_EQ(format_number(-1.5e-300), "-1.5e-300");
  RandomStream rng(1);
  for (int i = 0; i < 2000; ++i) {
    const double x = (uniform01(rng) - 0.5) * std::pow(10.0, static_cast<double>(uniform_index(rng, 40)) - 20.0);
    EXPECT_EQ(std::stod(format_number(x)), x);
  }
}

TEST(Csv, ParsesSchema) {
  const auto t = parse_data_csv("s1,s2,x1,y\n0.5,1.5,1,3.25\n\n2,3,0,-1\n");
  EXPECT_EQ(t.dim, 2);
  EXPECT_EQ(t.q, 1u);
  ASSERT_EQ(t.y.size(), 2);
  EXPECT_EQ(t.sites(1, 1), 3.0);
  EXPECT_EQ(t.covariates(0, 0), 1.0);
  EXPECT_EQ(t.y[1], -1.0);
  const auto back = parse_data_csv(data_csv(t));
  EXPECT_EQ(back.sites, t.sites);
  EXPECT_EQ(back.covariates, t.covariates);
  EXPECT_EQ(back.y, t.y);
}

TEST(Csv, CrlfAndNoCovariates) {
  const auto t = parse_data_csv("s1,y\r\n1,2\r\n3,4\r\n");
  EXPECT_EQ(t.dim, 1);
  EXPECT_EQ(t.q, 0u);
  EXPECT_EQ(t.y[1], 4.0);
}

TEST(Csv, ErrorsCarryLineNumbers) {
  EXPECT_NE(error_of([] { parse_data_csv("s1,s2,y\n1,2,3\n1,,3\n", "d.csv"); }).find("d.csv:3: missing value"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse_data_csv("s1,s2,y\n1,2,3\n1,2\n", "d.csv"); }).find("d.csv:3: expected 3 fields"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse_data_csv("s1,s2,y\n1,abc,3\n", "d.csv"); }).find("d.csv:2: invalid number"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse_data_csv("s1,s2,y\nNaN,1,3\n", "d.csv"); }).find("d.csv:2"), std::string::npos);
  EXPECT_NE(error_of([] { parse_data_csv("s2,s1,y\n", "d.csv"); }).find("d.csv:1"), std::string::npos);
  EXPECT_NE(error_of([] { parse_data_csv("s1,x1,z\n", "d.csv"); }).find("d.csv:1"), std::string::npos);
  EXPECT_THROW(parse_data_csv(""), DataError);
}

TEST(Region, AutoDetectionShiftsToOrigin) {
  SiteMatrix sites(3, 2);
  sites << 10, 20, 14, 21, 11, 23;
  const auto r = resolve_region(RegionSpec{}, sites);
  EXPECT_EQ(r.region.lambda(), 4.0);
  EXPECT_TRUE(r.warning.has_value());
  EXPECT_EQ(sites(1, 0), 4.0);
  EXPECT_EQ(sites(0, 1), 0.0);
  EXPECT_EQ(r.shift, (std::vector<double>{10, 20}));
}

TEST(Config, Defaults) {
  const Config c = parse_config(Json::object());
  EXPECT_EQ(c.n, 100u);
  EXPECT_EQ(c.M, 1000u);
  EXPECT_EQ(c.level, 0.9);
  EXPECT_EQ(c.variants, std::vector<Variant>{Variant::gbbb});
  EXPECT_FALSE(c.block.has_value());
  EXPECT_FALSE(c.region.lambda.has_value());
}

TEST(Config, UnknownKeysAndTypesReportPaths) {
  EXPECT_EQ(error_of([] { parse_config(Json::parse(R"({"plan": {"levle": 0.9}})")); }), "plan.levle: unknown key");
  EXPECT_EQ(error_of([] { parse_config(Json::parse(R"({"extra": 1})")); }), "extra: unknown key");
  EXPECT_EQ(error_of([] { parse_config(Json::parse(R"({"plan": {"level": 1.5}})")); }),
            "plan.level: must lie in (0, 1)");
  EXPECT_EQ(error_of([] { parse_config(Json::parse(R"({"field": {"range": "two"}})")); }),
            "field.range: expected a number");
  EXPECT_NE(error_of([] { parse_config(Json::parse(R"({"plan": {"variant": "bogus"}})")); }).find("plan.variant"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse_config(Json::parse(R"({"design": {"mixture": {"var3": 1}}})")); })
                .find("design.mixture.var3"),
            std::string::npos);
  EXPECT_THROW(parse_config(Json::parse(R"({"model": {"beta": [1, 2, 3]}})")), ConfigError);
  EXPECT_THROW(parse_config(Json::parse(R"({"region": {"lambda": 4}, "plan": {"block": 5}})")), ConfigError);
}

TEST(Config, ScenarioGridMergesOverrides) {
  const Json doc = Json::parse(R"({
    "region": {"lambda": 12},
    "model": {"n": 100},
    "plan": {"blocks": [2, 3], "variants": ["gbbb", "dssbb"], "M": 50},
    "experiment": {"S": 4, "scenarios": [
      {"name": "small"},
      {"name": "big", "region": {"lambda": 24}, "model": {"n": 400}, "plan": {"blocks": [4]}}
    ]}
  })");
  const Config c = parse_config(doc);
  const auto grid = table_grid(c);
  ASSERT_EQ(grid.size(), 2u);
  EXPECT_EQ(grid[0].scenario.name, "small");
  EXPECT_EQ(grid[0].blocks, (std::vector<double>{2, 3}));
  EXPECT_EQ(grid[1].scenario.region.lambda(), 24.0);
  EXPECT_EQ(grid[1].scenario.n, 400u);
  EXPECT_EQ(grid[1].variants.size(), 2u);
  EXPECT_THROW(table_grid(parse_config(Json::parse(R"({"experiment": {"scenarios": [{"plan": {"blocks": [2]}}]}})"))),
               ConfigError);
}

TEST(Results, BundleRoundTripsLosslessly) {
  ResultBundle b;
  b.version = "0.1.0";
  b.seed = std::numeric_limits<std::uint64_t>::max();
  b.variant = Variant::gbbb_cb;
  b.ci_method = CiMethod::percentile;
  b.level = 0.9;
  b.block = 1.0 / 3.0;
  b.block_selected = true;
  b.lambda = 12.5;
  b.n = 514;
  b.coefficients = {{25.000000000000004, 0.1 + 0.2, -1e-300, 5e300}, {-5, 0, -5, -5}};
  b.tests = {{1, 0.0, 0.056, false}, {0, 25.0, 1.0, true}};
  b.n_star_mean = 513.2;
  b.n_star_expected = 512.9999999;
  b.replicates = 1000;
  b.failed_replicates = 3;
  b.warnings = {"w"};
  b.config = Json::parse(R"({"plan": {"M": 1000}})");
  const std::string text = dump(to_json(b));
  const ResultBundle back = bundle_from_json(Json::parse(text));
  EXPECT_EQ(back, b);
  EXPECT_EQ(dump(to_json(back)), text);
  EXPECT_NE(text.find("degenerate (SE=0)"), std::string::npos);
}

TEST(Results, NormalTest) {
  const auto t = normal_test(1.6448536269514722, 1.0, 0, 0.0);
  EXPECT_NEAR(t.p_value, 0.1, 1e-14);
  EXPECT_FALSE(t.degenerate);
  EXPECT_NEAR(normal_test(-2.0, 1.0, 0, 0.0).p_value, normal_test(2.0, 1.0, 0, 0.0).p_value, 1e-16);
  const auto same = normal_test(3.0, 0.0, 1, 3.0);
  EXPECT_TRUE(same.degenerate);
  EXPECT_EQ(same.p_value, 1.0);
  EXPECT_EQ(normal_test(3.0, 0.0, 1, 2.0).p_value, 0.0);
}

TEST(Files, AtomicWriteReplacesWholeFile) {
  const fs::path dir = scratch("atomic");
  const fs::path path = dir / "nested" / "out.txt";
  write_file_atomic(path, "first");
  write_file_atomic(path, "second");
  std::ifstream in(path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(content, "second");
  for (const auto& entry : fs::directory_iterator(path.parent_path())) {
    EXPECT_EQ(entry.path().filename(), "out.txt");
  }
}

TEST(Files, TableAndBoxplotLayout) {
  TableResult r;
  TableRow row;
  row.scenario = "a,b";
  row.block = 2;
  row.root_mse = Vec::Constant(2, 0.5);
  row.coverage = Vec::Constant(2, 0.9);
  row.mean_estimate = Vec::Constant(2, 0.1);
  row.true_variance = Vec::Constant(2, 0.2);
  r.rows.push_back(row);
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t j = 0; j < 2; ++j) r.boxplot.push_back({"a,b", Variant::gbbb, 2.0, s, j, 0.25 * (s + j)});
  }
  const std::string table = table_csv(r);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 2);
  EXPECT_NE(table.find("\"a,b\",gbbb,2,0,0,0.5,0.9,0.1,0.2,0.5,0.9,0.1,0.2"), std::string::npos);
  const std::string box = boxplot_csv(r);
  EXPECT_EQ(box, "scenario,variant,block,sample,estimate_b0,estimate_b1\n\"a,b\",gbbb,2,0,0,0.25\n\"a,b\",gbbb,2,1,0.25,0.5\n");
}
