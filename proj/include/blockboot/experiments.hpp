#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "blockboot/block_selection.hpp"
#include "blockboot/bootstrap.hpp"
#include "blockboot/design.hpp"
#include "blockboot/field.hpp"
#include "blockboot/region.hpp"
#include "blockboot/regression.hpp"

namespace blockboot {

enum class ErrorMode {
  gaussian,
  clipped,  // Gaussian clipped at +-6 sill^{1/2}
};

/// One cell of the simulation factor grid.
struct Scenario {
  std::string name;
  Design design = Design::uniform();
  Region region{Prototype::unit_cube, 2, 12.0};
  std::size_t n = 100;
  CovarianceModel field{};
  WeightSpec weights = WeightSpec::with_covariates(1);
  Score score = Score::identity();
  Vec beta_true = Vec::Zero(2);
  ErrorMode error_mode = ErrorMode::gaussian;
  std::size_t max_sites = kDefaultMaxSites;

  /// c = n / lambda^d.
  double infill_ratio() const;
  /// Stable text key; streams are derived from its hash.
  std::string key() const;
};

/// Independent (sites, covariates, field) replicate of a scenario. The
/// covariates of the built-in weight spec are i.i.d. Bernoulli(1/2).
Dataset generate_sample(const Scenario& scenario, std::uint64_t base_seed, std::size_t replicate);

/// int sigma(s) ds * int f^2.
double sigma_infinity_sq(const CovarianceModel& model, const Design& design);

/// sigma(0) / c + sigma_infinity_sq; c = +infinity drops the first term.
double sigma_c_mean(const CovarianceModel& model, const Design& design, double c);

struct McTruth {
  Vec variance;
  Mat estimates;  // successful beta_hat values, one per row
  std::size_t failures = 0;
  bool warning = false;
};

/// Empirical Var(beta_hat) over S independent replicates.
McTruth mc_truth(const Scenario& scenario, std::size_t S, std::uint64_t base_seed, std::size_t workers = 1);

/// A scenario with the bootstrap configurations evaluated on each sample.
struct TableScenario {
  Scenario scenario;
  std::vector<double> blocks;
  std::vector<Variant> variants{Variant::gbbb};
  CiMethod ci_method = CiMethod::normal;
  double level = 0.90;
  std::optional<SelectionConfig> selection;
};

struct TableRow {
  std::string scenario;
  Variant variant = Variant::gbbb;
  double block = 0.0;
  Vec root_mse;
  Vec coverage;
  Vec mean_estimate;
  Vec true_variance;
  bool modal_selected = false;
  std::size_t failures = 0;
};

struct BoxplotEntry {
  std::string scenario;
  Variant variant = Variant::gbbb;
  double block = 0.0;
  std::size_t sample = 0;
  std::size_t component = 0;
  double estimate = 0.0;
};

struct TableResult {
  std::vector<TableRow> rows;
  std::vector<BoxplotEntry> boxplot;
  std::vector<std::optional<double>> modal_block;  // per scenario
};

/// Root-MSE of the bootstrap variance estimates against the Monte Carlo
/// variance of the same S samples, and coverage of the level-CIs.
TableResult run_table(const std::vector<TableScenario>& grid, std::size_t S, std::size_t M, std::uint64_t base_seed,
                      std::size_t workers = 1);

struct DemoConfig {
  double a = 40.0;
  double lambda = 6.0;
  std::vector<double> blocks{2.0};
  std::size_t S = 100;
  std::size_t M = 500;
  CovarianceModel field{CovarianceFamily::spherical, 1.0, 1.0};
  DesignKind design = DesignKind::strip;
  ErrorMode error_mode = ErrorMode::gaussian;
  std::size_t field_redraws = 200;
  std::size_t max_sites = kDefaultMaxSites;
  double threshold = 0.7;
};

struct DemoBlockReport {
  double block = 0.0;
  std::vector<double> dssbb;  // per sample, lambda^d Var_*(T**)
  std::vector<double> gbbb;   // per sample, lambda^d Var_*(beta*)
  double dssbb_median = 0.0;
  double gbbb_median = 0.0;
  double dssbb_fraction_below = 0.0;  // share of samples below threshold * sigma_inf^2
  double gbbb_fraction_below = 0.0;
};

struct DemoReport {
  std::size_t n = 0;
  double sigma_infinity_sq = 0.0;
  double conditional_variance = 0.0;  // lambda^d Var(T_n | sites) over field redraws
  std::vector<DemoBlockReport> blocks;
};

/// DSSBB versus GBBB scaled mean-variance under the strip design, n = lambda^4.
DemoReport inconsistency_demo(const DemoConfig& config, std::uint64_t base_seed, std::size_t workers = 1);

struct ComponentDiagnostics {
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double ks_statistic = 0.0;
  bool degenerate = false;
};

/// Moments and KS distance of T_1n = Lambda_1n (beta_hat - beta) over S replicates.
std::vector<ComponentDiagnostics> normality_diagnostics(const Scenario& scenario, std::size_t S,
                                                        std::uint64_t base_seed, std::size_t workers = 1);

/// Kolmogorov-Smirnov distance between the sample and N(0, variance).
double ks_normal_statistic(std::vector<double> values, double variance);

}  // namespace blockboot
