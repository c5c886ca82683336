#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "blockboot/block_selection.hpp"
#include "blockboot/bootstrap.hpp"
#include "blockboot/experiments.hpp"
#include "blockboot/region.hpp"
#include "blockboot/regression.hpp"

namespace blockboot {

using Json = nlohmann::ordered_json;

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

/// Writes through a sibling temporary file and renames it into place, so a
/// failed run never leaves a partial file behind.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Observations read from a `s1,...,sd,x1,...,xq,y` CSV file.
struct DataTable {
  SiteMatrix sites;
  Mat covariates;  // n x q
  Vec y;
  int dim = 0;
  std::size_t q = 0;
};

DataTable parse_data_csv(std::string_view text, std::string_view source = "<data>");
DataTable read_data_csv(const std::filesystem::path& path);
std::string data_csv(const DataTable& table);

struct RegionSpec {
  Prototype prototype = Prototype::unit_cube;
  int dim = 2;
  std::optional<double> lambda;  // empty: bounding box of the data
};

/// Region for the data. Auto mode shifts the sites so their bounding box
/// starts at the origin and takes the longest side as lambda.
struct ResolvedRegion {
  Region region;
  std::vector<double> shift;  // subtracted from every site
  std::optional<std::string> warning;
};
ResolvedRegion resolve_region(const RegionSpec& spec, SiteMatrix& sites);

struct HypothesisTest {
  std::size_t coefficient = 0;
  double null_value = 0.0;
};

/// Parsed configuration document. Every key is optional; unknown keys are
/// rejected with their path.
struct Config {
  RegionSpec region;
  Design design = Design::uniform();
  CovarianceModel field{};
  std::size_t max_sites = kDefaultMaxSites;
  ErrorMode error_mode = ErrorMode::gaussian;

  std::size_t n = 100;
  std::size_t covariates = 1;
  Score score = Score::identity();
  std::vector<double> beta;  // empty: zeros
  std::vector<HypothesisTest> tests;

  std::vector<Variant> variants{Variant::gbbb};
  std::optional<double> block;  // empty: automatic selection
  std::vector<double> blocks;
  std::size_t M = 1000;
  CiMethod ci_method = CiMethod::normal;
  double level = 0.90;
  bool exact_mode = false;
  SelectionConfig selection;
  bool select = false;

  std::size_t S = 500;
  std::string name;
  std::size_t field_redraws = 200;
  double threshold = 0.7;
  std::vector<Json> scenarios;  // overrides merged over the base document

  Json echo;  // the document as given
};

Config parse_config(const Json& document);
Config read_config(const std::filesystem::path& path);

WeightSpec weight_spec(const Config& config);
Scenario make_scenario(const Config& config);
/// One grid cell per entry of `experiment.scenarios`, or the base scenario.
std::vector<TableScenario> table_grid(const Config& config);
DemoConfig demo_config(const Config& config);
/// Default candidate list for automatic block selection.
std::vector<double> default_candidates(double lambda);

struct CoefficientResult {
  double estimate = 0.0;
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  friend bool operator==(const CoefficientResult&, const CoefficientResult&) = default;
};

struct TestResult {
  std::size_t coefficient = 0;
  double null_value = 0.0;
  double p_value = 1.0;
  bool degenerate = false;  // SE = 0
  friend bool operator==(const TestResult&, const TestResult&) = default;
};

/// Everything `analyze` reports.
struct ResultBundle {
  std::string version;
  std::uint64_t seed = 0;
  Variant variant = Variant::gbbb;
  CiMethod ci_method = CiMethod::normal;
  double level = 0.90;
  double block = 0.0;
  bool block_selected = false;
  double lambda = 0.0;
  std::size_t n = 0;
  std::vector<CoefficientResult> coefficients;
  std::vector<TestResult> tests;
  double n_star_mean = 0.0;
  double n_star_expected = 0.0;
  std::size_t replicates = 0;
  std::size_t failed_replicates = 0;
  bool exact = false;
  std::vector<std::string> warnings;
  Json config;

  friend bool operator==(const ResultBundle&, const ResultBundle&) = default;
};

Json to_json(const ResultBundle& bundle);
ResultBundle bundle_from_json(const Json& json);
/// JSON text with two-space indentation and a trailing newline.
std::string dump(const Json& json);

/// Two-sided normal p-value 2 Phi(-|estimate - null| / se).
TestResult normal_test(double estimate, double se, std::size_t coefficient, double null_value);

std::string table_csv(const TableResult& result);
std::string boxplot_csv(const TableResult& result);
std::string demo_csv(const DemoReport& report);

}  // namespace blockboot
