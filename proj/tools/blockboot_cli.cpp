// blockboot command-line interface.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "blockboot/block_selection.hpp"
#include "blockboot/bootstrap.hpp"
#include "blockboot/experiments.hpp"
#include "blockboot/field.hpp"
#include "blockboot/io.hpp"

namespace fs = std::filesystem;
using namespace blockboot;

namespace {

struct Options {
  std::string config;
  std::string data;
  std::string out = "blockboot-out";
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::string block;
  std::string variant;
  std::string ci;
  std::optional<double> level;
};

void log(const std::string& message) { std::cerr << "blockboot: " << message << "\n"; }

std::uint64_t resolve_seed(const Options& opt) {
  if (opt.seed) return *opt.seed;
  if (const char* env = std::getenv("BLOCKBOOT_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const std::uint64_t seed = std::stoull(env, &used, 10);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
      log("seed " + std::to_string(seed) + " (from BLOCKBOOT_SEED)");
      return seed;
    } catch (const std::exception&) {
      throw ConfigError("BLOCKBOOT_SEED: expected an unsigned 64-bit integer");
    }
  }
  std::random_device device;
  const std::uint64_t seed = (static_cast<std::uint64_t>(device()) << 32) ^ device();
  log("seed " + std::to_string(seed) + " (generated; pass --seed to reproduce)");
  return seed;
}

Config load_config(const Options& opt) {
  Config config = opt.config.empty() ? parse_config(Json::object()) : read_config(opt.config);
  if (!opt.variant.empty()) {
    try {
      config.variants = {parse_variant(opt.variant)};
    } catch (const std::exception& e) {
      throw ConfigError(std::string("--variant: ") + e.what());
    }
  }
  if (!opt.ci.empty()) {
    try {
      config.ci_method = parse_ci_method(opt.ci);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("--ci: ") + e.what());
    }
  }
  if (opt.level) {
    if (!(*opt.level > 0.0 && *opt.level < 1.0)) throw ConfigError("--level: must lie in (0, 1)");
    config.level = *opt.level;
  }
  if (!opt.block.empty()) {
    if (opt.block == "auto") {
      config.block.reset();
    } else {
      try {
        std::size_t used = 0;
        const double b = std::stod(opt.block, &used);
        if (used != opt.block.size() || !(b > 0.0)) throw std::invalid_argument(opt.block);
        config.block = b;
        config.blocks = {b};
      } catch (const std::exception&) {
        throw ConfigError("--block: expected a positive number or 'auto'");
      }
    }
  }
  return config;
}

Dataset load_dataset(const Options& opt, const Config& config, std::optional<std::string>& warning, Region& region) {
  if (opt.data.empty()) throw ConfigError("--data is required");
  DataTable table = read_data_csv(opt.data);
  RegionSpec spec = config.region;
  if (config.echo.contains("region") && !config.echo["region"].contains("dim")) spec.dim = table.dim;
  if (!config.echo.contains("region")) spec.dim = table.dim;
  ResolvedRegion resolved = resolve_region(spec, table.sites);
  warning = resolved.warning;
  region = resolved.region;
  Dataset data;
  data.sites = std::move(table.sites);
  data.weights = weight_matrix(table.q == 0 ? WeightSpec::intercept_only() : WeightSpec::with_covariates(table.q),
                               data.sites, table.covariates);
  data.y = std::move(table.y);
  data.lambda = region.lambda();
  data.dim = region.dim();
  data.validate();
  if (data.size() < data.parameters() + 1) {
    throw DataError("need at least " + std::to_string(data.parameters() + 1) + " observations, found " +
                    std::to_string(data.size()));
  }
  build_site_index(region, data.sites, region.lambda());  // rejects sites outside the region
  return data;
}

std::uint64_t command_seed(std::uint64_t seed, std::string_view command, StreamPurpose purpose) {
  return derive_seed(seed, hash_key(command), 0, purpose);
}

int cmd_analyze(const Options& opt) {
  const Config config = load_config(opt);
  const std::uint64_t seed = resolve_seed(opt);
  std::optional<std::string> region_warning;
  Region region(Prototype::unit_cube, 2, 1.0);
  const Dataset data = load_dataset(opt, config, region_warning, region);
  const std::size_t p = data.parameters();

  ResultBundle bundle;
  bundle.version = BLOCKBOOT_VERSION;
  bundle.seed = seed;
  bundle.variant = config.variants.front();
  bundle.ci_method = config.ci_method;
  bundle.level = config.level;
  bundle.lambda = region.lambda();
  bundle.n = data.size();
  bundle.config = config.echo;
  if (region_warning) bundle.warnings.push_back(*region_warning);

  const FitResult fitted = fit(data, config.score);

  double b = 0.0;
  if (config.block) {
    b = *config.block;
  } else {
    SelectionConfig sel = config.selection;
    if (sel.candidates.empty()) sel.candidates = default_candidates(region.lambda());
    sel.variant = bundle.variant;
    try {
      b = select_block_size(data, fitted, region, config.score, sel,
                            command_seed(seed, "analyze", StreamPurpose::selection))
              .block;
      bundle.block_selected = true;
    } catch (const std::exception& e) {
      b = region.lambda() / 4.0;
      bundle.warnings.push_back(std::string("block selection failed (") + e.what() +
                                "); using lambda / 4 = " + format_number(b));
    }
  }
  for (const auto& w : bundle.warnings) log("warning: " + w);
  bundle.block = b;

  BootstrapPlan plan{bundle.variant, b, config.M, config.ci_method, config.level,
                     command_seed(seed, "analyze", StreamPurpose::bootstrap), config.exact_mode};
  try {
    plan.validate(region);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("plan: ") + e.what());
  }
  const ResamplingGeometry geometry = make_geometry(region, data.sites, b);
  const BlockTable table(plan.variant, geometry, data.sites);
  const BootstrapEngine engine(table, data, fitted, config.score);
  const BootstrapOutput boot = run_bootstrap(engine, data, fitted, plan);
  if (boot.warning) {
    bundle.warnings.push_back(std::to_string(boot.failure_count) + " of " + std::to_string(boot.attempted) +
                              " bootstrap replicates failed");
    log("warning: " + bundle.warnings.back());
  }

  for (std::size_t j = 0; j < p; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    bundle.coefficients.push_back(
        {fitted.beta_hat[jj], std::sqrt(std::max(0.0, boot.var_estimate[jj])), boot.ci[j].first, boot.ci[j].second});
  }
  std::vector<HypothesisTest> tests = config.tests;
  if (!config.echo.contains("model") || !config.echo["model"].contains("tests")) {
    for (std::size_t j = 0; j < p; ++j) tests.push_back({j, 0.0});
  }
  for (const auto& t : tests) {
    if (t.coefficient >= p) throw ConfigError("model.tests: coefficient index out of range");
    const auto& c = bundle.coefficients[t.coefficient];
    bundle.tests.push_back(normal_test(c.estimate, c.se, t.coefficient, t.null_value));
  }
  bundle.n_star_mean = boot.n_star_mean;
  bundle.n_star_expected = table.expected_total();
  bundle.replicates = boot.attempted;
  bundle.failed_replicates = boot.failure_count;
  bundle.exact = boot.exact;

  const fs::path path = fs::path(opt.out) / "result.json";
  write_file_atomic(path, dump(to_json(bundle)));
  for (std::size_t j = 0; j < p; ++j) {
    const auto& c = bundle.coefficients[j];
    std::cout << "beta" << j << " = " << format_number(c.estimate) << "  SE " << format_number(c.se) << "  CI ("
              << format_number(c.ci_lower) << ", " << format_number(c.ci_upper) << ")\n";
  }
  for (const auto& t : bundle.tests) {
    std::cout << "H0: beta" << t.coefficient << " = " << format_number(t.null_value) << "  p = "
              << (t.degenerate ? "degenerate (SE=0)" : format_number(t.p_value)) << "\n";
  }
  log("wrote " + path.string());
  return 0;
}

int cmd_simulate(const Options& opt) {
  if (opt.config.empty()) throw ConfigError("--config is required");
  const Config config = load_config(opt);
  const std::uint64_t seed = resolve_seed(opt);
  const auto grid = table_grid(config);
  const TableResult result = run_table(grid, config.S, config.M, seed, opt.workers);
  const fs::path table_path = fs::path(opt.out) / "table.csv";
  const fs::path box_path = fs::path(opt.out) / "boxplot.csv";
  const std::string table = table_csv(result);
  const std::string box = boxplot_csv(result);
  write_file_atomic(table_path, table);
  write_file_atomic(box_path, box);
  std::cout << table;
  log("wrote " + table_path.string() + " and " + box_path.string());
  return 0;
}

int cmd_select_block(const Options& opt) {
  const Config config = load_config(opt);
  const std::uint64_t seed = resolve_seed(opt);
  std::optional<std::string> region_warning;
  Region region(Prototype::unit_cube, 2, 1.0);
  const Dataset data = load_dataset(opt, config, region_warning, region);
  if (region_warning) log("warning: " + *region_warning);
  const FitResult fitted = fit(data, config.score);
  SelectionConfig sel = config.selection;
  if (sel.candidates.empty()) sel.candidates = config.blocks.empty() ? default_candidates(region.lambda()) : config.blocks;
  std::sort(sel.candidates.begin(), sel.candidates.end());
  sel.variant = config.variants.front();
  const SelectionResult r =
      select_block_size(data, fitted, region, config.score, sel, command_seed(seed, "select-block", StreamPurpose::selection));

  Json out;
  out["version"] = BLOCKBOOT_VERSION;
  out["seed"] = seed;
  out["lambda"] = region.lambda();
  out["block"] = r.block;
  out["component_blocks"] = r.component_blocks;
  out["candidates"] = sel.candidates;
  out["sub_blocks"] = r.sub_blocks;
  out["scale_factor"] = r.scale_factor;
  out["pilot_block"] = r.pilot_block;
  out["pilot_scaled_var"] = std::vector<double>(r.pilot_scaled_var.data(), r.pilot_scaled_var.data() + r.pilot_scaled_var.size());
  Json mse = Json::array();
  for (Eigen::Index i = 0; i < r.mse.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < r.mse.cols(); ++j) row.push_back(r.mse(i, j));
    mse.push_back(row);
  }
  out["mse"] = mse;
  out["subregions_used"] = r.subregions_used;
  Json warnings = Json::array();
  if (region_warning) warnings.push_back(*region_warning);
  if (r.dimension_warning) warnings.push_back("square-root scaling rule applied outside d = 2");
  out["warnings"] = warnings;
  out["config"] = config.echo;
  const fs::path path = fs::path(opt.out) / "selection.json";
  write_file_atomic(path, dump(out));
  std::cout << "selected block size " << format_number(r.block) << "\n";
  log("wrote " + path.string());
  return 0;
}

int cmd_demo(const Options& opt) {
  const Config config = load_config(opt);
  const std::uint64_t seed = resolve_seed(opt);
  const DemoConfig demo = demo_config(config);
  const DemoReport report = inconsistency_demo(demo, seed, opt.workers);

  Json out;
  out["version"] = BLOCKBOOT_VERSION;
  out["seed"] = seed;
  out["note"] =
      "desk-scale direction check: the threshold and the field range are calibration choices, and the field is "
      "Gaussian (unbounded) unless error_mode is clipped";
  out["design"] = std::string(to_string(demo.design));
  out["a"] = demo.a;
  out["lambda"] = demo.lambda;
  out["n"] = report.n;
  out["S"] = demo.S;
  out["M"] = demo.M;
  out["threshold"] = demo.threshold;
  out["sigma_infinity_sq"] = report.sigma_infinity_sq;
  out["conditional_variance"] = report.conditional_variance;
  Json blocks = Json::array();
  for (const auto& b : report.blocks) {
    blocks.push_back({{"block", b.block},
                      {"dssbb_median", b.dssbb_median},
                      {"gbbb_median", b.gbbb_median},
                      {"dssbb_fraction_below", b.dssbb_fraction_below},
                      {"gbbb_fraction_below", b.gbbb_fraction_below}});
  }
  out["blocks"] = blocks;
  out["config"] = config.echo;
  const fs::path summary = fs::path(opt.out) / "demo.json";
  const fs::path samples = fs::path(opt.out) / "demo.csv";
  write_file_atomic(samples, demo_csv(report));
  write_file_atomic(summary, dump(out));
  std::cout << "sigma_inf^2 = " << format_number(report.sigma_infinity_sq)
            << "  conditional variance = " << format_number(report.conditional_variance) << "\n";
  for (const auto& b : report.blocks) {
    std::cout << "b = " << format_number(b.block) << "  median DSSBB " << format_number(b.dssbb_median)
              << "  median GBBB " << format_number(b.gbbb_median) << "  share below threshold (DSSBB) "
              << format_number(b.dssbb_fraction_below) << "\n";
  }
  log("wrote " + summary.string() + " and " + samples.string());
  return 0;
}

int cmd_field_gen(const Options& opt) {
  const Config config = load_config(opt);
  const std::uint64_t seed = resolve_seed(opt);
  const double lambda = config.region.lambda.value_or(10.0);
  const Region region(config.region.prototype, config.region.dim, lambda);
  RandomStream site_rng = make_stream(command_seed(seed, "field-gen", StreamPurpose::sites));
  RandomStream field_rng = make_stream(command_seed(seed, "field-gen", StreamPurpose::field));
  DataTable table;
  table.dim = region.dim();
  table.sites = draw_sites(config.design, region, config.n, site_rng);
  table.y = simulate(config.field, table.sites, field_rng, config.max_sites);
  const fs::path path = fs::path(opt.out) / "field.csv";
  write_file_atomic(path, data_csv(table));
  log("wrote " + path.string());
  return 0;
}

void add_common(CLI::App* cmd, Options& opt, bool data, bool bootstrap) {
  cmd->add_option("--config", opt.config, "JSON configuration file")->check(CLI::ExistingFile);
  if (data) cmd->add_option("--data", opt.data, "CSV data file with header s1,...,sd,x1,...,xq,y");
  cmd->add_option("--out", opt.out, "output directory")->capture_default_str();
  cmd->add_option("--seed", opt.seed, "base seed (default: $BLOCKBOOT_SEED, else generated)");
  cmd->add_option("--workers", opt.workers, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  if (bootstrap) {
    cmd->add_option("--block", opt.block, "block side in coordinate units, or 'auto'");
    cmd->add_option("--variant", opt.variant, "gbbb | gbbb-cb | gbbb-nonoverlap | dssbb");
    cmd->add_option("--ci", opt.ci, "normal | percentile");
    cmd->add_option("--level", opt.level, "confidence level");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grid-based and data-site-shifted spatial block bootstrap"};
  app.require_subcommand(1);
  Options opt;

  auto* analyze = app.add_subcommand("analyze", "fit a spatial regression and bootstrap its coefficients");
  add_common(analyze, opt, true, true);
  auto* simulate_cmd = app.add_subcommand("simulate", "run a Monte Carlo table from a config");
  add_common(simulate_cmd, opt, false, true);
  auto* select = app.add_subcommand("select-block", "empirical block size selection");
  add_common(select, opt, true, true);
  auto* demo = app.add_subcommand("demo-dssbb", "DSSBB versus GBBB under a nonuniform strip design");
  add_common(demo, opt, false, true);
  auto* field = app.add_subcommand("field-gen", "sample sites and one Gaussian field draw");
  add_common(field, opt, false, false);
  auto* version = app.add_subcommand("version", "print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*version) {
      std::cout << "blockboot " << BLOCKBOOT_VERSION << "\n";
      return 0;
    }
    if (*analyze) return cmd_analyze(opt);
    if (*simulate_cmd) return cmd_simulate(opt);
    if (*select) return cmd_select_block(opt);
    if (*demo) return cmd_demo(opt);
    if (*field) return cmd_field_gen(opt);
  } catch (const ConfigError& e) {
    log("config error: " + std::string(e.what()));
    return 2;
  } catch (const DataError& e) {
    log("data error: " + std::string(e.what()));
    return 3;
  } catch (const NumericError& e) {
    log("numeric failure: " + std::string(e.what()));
    return 4;
  } catch (const std::invalid_argument& e) {
    log("config error: " + std::string(e.what()));
    return 2;
  } catch (const std::exception& e) {
    log("error: " + std::string(e.what()));
    return 1;
  }
  return 0;
}
