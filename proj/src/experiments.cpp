#include "blockboot/experiments.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>

#include "blockboot/parallel.hpp"

namespace blockboot {

namespace {

std::string shortest(double value) {
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, end);
}

double sample_variance(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(values.size() - 1);
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  return empirical_quantile(std::move(values), 0.5);
}

Vec field_values(const GaussianFieldSampler& sampler, const CovarianceModel& model, ErrorMode mode,
                 RandomStream& rng) {
  Vec z = sampler.draw(rng);
  if (mode == ErrorMode::clipped) {
    const double bound = 6.0 * std::sqrt(model.sill);
    z = z.cwiseMax(-bound).cwiseMin(bound);
  }
  return z;
}

std::uint64_t block_bits(double b) { return std::bit_cast<std::uint64_t>(b); }

}  // namespace

double Scenario::infill_ratio() const { return static_cast<double>(n) / region.volume(); }

std::string Scenario::key() const {
  std::string out = "design=" + std::string(to_string(design.kind()));
  if (design.kind() == DesignKind::strip) out += ":a=" + shortest(design.strip_a());
  if (design.kind() == DesignKind::normal_mixture) {
    const auto& m = design.mixture();
    out += ":" + shortest(m.mean1[0]) + "," + shortest(m.mean1[1]) + "," + shortest(m.var1) + "," +
           shortest(m.mean2[0]) + "," + shortest(m.mean2[1]) + "," + shortest(m.var2) + "," + shortest(m.weight1);
  }
  out += ";region=" + std::string(to_string(region.prototype())) + ":" + std::to_string(region.dim()) + ":" +
         shortest(region.lambda());
  out += ";n=" + std::to_string(n);
  out += ";field=" + std::string(to_string(field.family)) + ":" + shortest(field.sill) + ":" + shortest(field.range);
  out += ";q=" + std::to_string(weights.kind == WeightSpec::Kind::intercept_only ? 0 : weights.covariates);
  out += ";score=" + std::string(score.is_identity() ? "identity" : "pseudo-huber:" + shortest(score.k()));
  out += ";beta=";
  for (Eigen::Index j = 0; j < beta_true.size(); ++j) out += (j ? "," : "") + shortest(beta_true[j]);
  out += ";errors=" + std::string(error_mode == ErrorMode::gaussian ? "gaussian" : "clipped");
  return out;
}

Dataset generate_sample(const Scenario& scenario, std::uint64_t base_seed, std::size_t replicate) {
  if (static_cast<std::size_t>(scenario.beta_true.size()) != scenario.weights.parameters()) {
    throw ConfigError("scenario: beta_true length does not match the weight specification");
  }
  const std::uint64_t key = hash_key(scenario.key());
  RandomStream site_rng = make_stream(derive_seed(base_seed, key, replicate, StreamPurpose::sites));
  RandomStream cov_rng = make_stream(derive_seed(base_seed, key, replicate, StreamPurpose::covariates));
  RandomStream field_rng = make_stream(derive_seed(base_seed, key, replicate, StreamPurpose::field));

  Dataset data;
  data.lambda = scenario.region.lambda();
  data.dim = scenario.region.dim();
  data.sites = draw_sites(scenario.design, scenario.region, scenario.n, site_rng);
  const std::size_t q = scenario.weights.kind == WeightSpec::Kind::intercept_only ? 0 : scenario.weights.covariates;
  Mat covariates(static_cast<Eigen::Index>(scenario.n), static_cast<Eigen::Index>(q));
  for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
    for (Eigen::Index j = 0; j < covariates.cols(); ++j) covariates(i, j) = uniform01(cov_rng) < 0.5 ? 0.0 : 1.0;
  }
  data.weights = weight_matrix(scenario.weights, data.sites, covariates);
  const GaussianFieldSampler sampler(scenario.field, data.sites, scenario.max_sites);
  data.y = data.weights * scenario.beta_true + field_values(sampler, scenario.field, scenario.error_mode, field_rng);
  return data;
}

double sigma_infinity_sq(const CovarianceModel& model, const Design& design) {
  return cov_integral(model, 2) * density_moment(design, 2);
}

double sigma_c_mean(const CovarianceModel& model, const Design& design, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("sigma_c_mean: c must be positive");
  const double tail = sigma_infinity_sq(model, design);
  return std::isinf(c) ? tail : model.sill / c + tail;
}

McTruth mc_truth(const Scenario& scenario, std::size_t S, std::uint64_t base_seed, std::size_t workers) {
  const std::size_t p = scenario.weights.parameters();
  std::vector<std::optional<Vec>> estimates(S);
  parallel_for(S, workers, [&](std::size_t s) {
    try {
      estimates[s] = fit(generate_sample(scenario, base_seed, s), scenario.score).beta_hat;
    } catch (const NumericError&) {
    }
  });
  McTruth out;
  std::vector<Vec> ok;
  for (auto& e : estimates) {
    if (e) ok.push_back(*e);
    else ++out.failures;
  }
  out.warning = static_cast<double>(out.failures) > 0.01 * static_cast<double>(S);
  out.estimates.resize(static_cast<Eigen::Index>(ok.size()), static_cast<Eigen::Index>(p));
  for (std::size_t r = 0; r < ok.size(); ++r) out.estimates.row(static_cast<Eigen::Index>(r)) = ok[r].transpose();
  out.variance.resize(static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double> column;
    for (const auto& v : ok) column.push_back(v[static_cast<Eigen::Index>(j)]);
    out.variance[static_cast<Eigen::Index>(j)] = sample_variance(column);
  }
  return out;
}

TableResult run_table(const std::vector<TableScenario>& grid, std::size_t S, std::size_t M, std::uint64_t base_seed,
                      std::size_t workers) {
  if (grid.empty()) throw ConfigError("run_table: the scenario grid is empty");
  TableResult result;
  for (const auto& cell : grid) {
    const Scenario& scenario = cell.scenario;
    const std::uint64_t key = hash_key(scenario.key());
    const std::size_t p = scenario.weights.parameters();
    const std::size_t configs = cell.blocks.size() * cell.variants.size();

    struct SampleResult {
      std::optional<Vec> beta_hat;
      std::vector<std::optional<Vec>> estimates;  // per config
      std::vector<std::vector<bool>> covered;     // per config, per component
      std::optional<double> selected;
    };
    std::vector<SampleResult> samples(S);
    parallel_for(S, workers, [&](std::size_t s) {
      SampleResult& out = samples[s];
      out.estimates.resize(configs);
      out.covered.resize(configs);
      Dataset data;
      FitResult fitted;
      try {
        data = generate_sample(scenario, base_seed, s);
        fitted = fit(data, scenario.score);
      } catch (const NumericError&) {
        return;
      }
      out.beta_hat = fitted.beta_hat;
      for (std::size_t bi = 0; bi < cell.blocks.size(); ++bi) {
        const double b = cell.blocks[bi];
        const ResamplingGeometry geometry = make_geometry(scenario.region, data.sites, b);
        for (std::size_t vi = 0; vi < cell.variants.size(); ++vi) {
          const std::size_t c = bi * cell.variants.size() + vi;
          BootstrapPlan plan{cell.variants[vi], b, M, cell.ci_method, cell.level,
                             derive_seed(base_seed, {key, s, static_cast<std::uint64_t>(StreamPurpose::bootstrap),
                                                     static_cast<std::uint64_t>(cell.variants[vi]), block_bits(b)})};
          try {
            const BlockTable table(plan.variant, geometry, data.sites);
            const BootstrapEngine engine(table, data, fitted, scenario.score);
            const BootstrapOutput boot = run_bootstrap(engine, data, fitted, plan);
            out.estimates[c] = boot.var_estimate;
            for (std::size_t j = 0; j < p; ++j) {
              const double truth = scenario.beta_true[static_cast<Eigen::Index>(j)];
              out.covered[c].push_back(boot.ci[j].first <= truth && truth <= boot.ci[j].second);
            }
          } catch (const NumericError&) {
          }
        }
      }
      if (cell.selection) {
        SelectionConfig config = *cell.selection;
        if (config.candidates.empty()) config.candidates = cell.blocks;
        try {
          out.selected = select_block_size(data, fitted, scenario.region, scenario.score, config,
                                           derive_seed(base_seed, key, s, StreamPurpose::selection))
                             .block;
        } catch (const NumericError&) {
        }
      }
    });

    std::vector<std::vector<double>> beta_columns(p);
    for (const auto& sample : samples) {
      if (!sample.beta_hat) continue;
      for (std::size_t j = 0; j < p; ++j) beta_columns[j].push_back((*sample.beta_hat)[static_cast<Eigen::Index>(j)]);
    }
    Vec truth(static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) truth[static_cast<Eigen::Index>(j)] = sample_variance(beta_columns[j]);

    std::optional<double> modal;
    if (cell.selection) {
      std::map<double, std::size_t> votes;
      for (const auto& sample : samples) {
        if (sample.selected) ++votes[*sample.selected];
      }
      std::size_t best = 0;
      for (const auto& [b, count] : votes) {
        if (count > best) {
          best = count;
          modal = b;
        }
      }
    }
    result.modal_block.push_back(modal);

    for (std::size_t bi = 0; bi < cell.blocks.size(); ++bi) {
      for (std::size_t vi = 0; vi < cell.variants.size(); ++vi) {
        const std::size_t c = bi * cell.variants.size() + vi;
        TableRow row;
        row.scenario = scenario.name.empty() ? scenario.key() : scenario.name;
        row.variant = cell.variants[vi];
        row.block = cell.blocks[bi];
        row.true_variance = truth;
        row.root_mse = Vec::Zero(static_cast<Eigen::Index>(p));
        row.coverage = Vec::Zero(static_cast<Eigen::Index>(p));
        row.mean_estimate = Vec::Zero(static_cast<Eigen::Index>(p));
        row.modal_selected = modal && *modal == row.block;
        std::size_t used = 0;
        for (std::size_t s = 0; s < S; ++s) {
          const auto& estimate = samples[s].estimates.empty() ? std::nullopt : samples[s].estimates[c];
          if (!estimate) {
            ++row.failures;
            continue;
          }
          ++used;
          for (std::size_t j = 0; j < p; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            const double diff = (*estimate)[jj] - truth[jj];
            row.root_mse[jj] += diff * diff;
            row.mean_estimate[jj] += (*estimate)[jj];
            row.coverage[jj] += samples[s].covered[c][j] ? 1.0 : 0.0;
            result.boxplot.push_back({row.scenario, row.variant, row.block, s, j, (*estimate)[jj]});
          }
        }
        if (used > 0) {
          row.root_mse = (row.root_mse / static_cast<double>(used)).cwiseSqrt();
          row.mean_estimate /= static_cast<double>(used);
          row.coverage /= static_cast<double>(used);
        }
        result.rows.push_back(std::move(row));
      }
    }
  }
  return result;
}

DemoReport inconsistency_demo(const DemoConfig& config, std::uint64_t base_seed, std::size_t workers) {
  const Region region(Prototype::unit_cube, 2, config.lambda);
  const Design design = config.design == DesignKind::strip ? Design::strip(config.a)
                        : config.design == DesignKind::uniform ? Design::uniform()
                                                               : Design::normal_mixture();
  const auto n = static_cast<std::size_t>(std::llround(std::pow(config.lambda, 4)));
  if (n > config.max_sites) {
    throw NumericError("inconsistency demo: n = lambda^4 = " + std::to_string(n) + " exceeds the field simulation cap " +
                       std::to_string(config.max_sites));
  }
  Scenario scenario;
  scenario.name = "dssbb-demo";
  scenario.design = design;
  scenario.region = region;
  scenario.n = n;
  scenario.field = config.field;
  scenario.weights = WeightSpec::intercept_only();
  scenario.beta_true = Vec::Zero(1);
  scenario.error_mode = config.error_mode;
  scenario.max_sites = config.max_sites;
  const std::uint64_t key = hash_key(scenario.key());

  DemoReport report;
  report.n = n;
  report.sigma_infinity_sq = sigma_infinity_sq(config.field, design);
  const double scale = std::pow(config.lambda, 2);

  {
    RandomStream site_rng = make_stream(derive_seed(base_seed, key, config.S, StreamPurpose::auxiliary));
    const SiteMatrix sites = draw_sites(design, region, n, site_rng);
    const GaussianFieldSampler sampler(config.field, sites, config.max_sites);
    std::vector<double> means(config.field_redraws);
    for (std::size_t r = 0; r < config.field_redraws; ++r) {
      RandomStream rng = make_stream(derive_seed(base_seed, key, config.S + 1 + r, StreamPurpose::field));
      means[r] = field_values(sampler, config.field, config.error_mode, rng).mean();
    }
    report.conditional_variance = scale * sample_variance(means);
  }

  const std::size_t nb = config.blocks.size();
  std::vector<std::vector<double>> dssbb(nb, std::vector<double>(config.S)), gbbb(nb, std::vector<double>(config.S));
  parallel_for(config.S, workers, [&](std::size_t s) {
    const Dataset data = generate_sample(scenario, base_seed, s);
    const FitResult fitted = fit(data, Score::identity());
    for (std::size_t bi = 0; bi < nb; ++bi) {
      const double b = config.blocks[bi];
      const ResamplingGeometry geometry = make_geometry(region, data.sites, b);
      BootstrapPlan plan{Variant::dssbb, b, config.M, CiMethod::normal, 0.9,
                         derive_seed(base_seed, {key, s, static_cast<std::uint64_t>(StreamPurpose::bootstrap),
                                                 static_cast<std::uint64_t>(Variant::dssbb), block_bits(b)})};
      dssbb[bi][s] = dssbb_mean_variance(data, geometry, plan);
      plan.variant = Variant::gbbb;
      plan.seed = derive_seed(base_seed, {key, s, static_cast<std::uint64_t>(StreamPurpose::bootstrap),
                                          static_cast<std::uint64_t>(Variant::gbbb), block_bits(b)});
      gbbb[bi][s] = run_bootstrap(data, fitted, plan, geometry, Score::identity()).scaled_var[0];
    }
  });

  const double cut = config.threshold * report.sigma_infinity_sq;
  for (std::size_t bi = 0; bi < nb; ++bi) {
    DemoBlockReport block;
    block.block = config.blocks[bi];
    block.dssbb = dssbb[bi];
    block.gbbb = gbbb[bi];
    block.dssbb_median = median(block.dssbb);
    block.gbbb_median = median(block.gbbb);
    auto below = [&](const std::vector<double>& v) {
      return static_cast<double>(std::count_if(v.begin(), v.end(), [&](double x) { return x < cut; })) /
             static_cast<double>(v.size());
    };
    block.dssbb_fraction_below = below(block.dssbb);
    block.gbbb_fraction_below = below(block.gbbb);
    report.blocks.push_back(std::move(block));
  }
  return report;
}

double ks_normal_statistic(std::vector<double> values, double variance) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  if (!(variance > 0.0)) {
    return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; }) ? 0.0 : 1.0;
  }
  const double sd = std::sqrt(variance);
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double f = 0.5 * std::erfc(-values[i] / (sd * std::numbers::sqrt2));
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

std::vector<ComponentDiagnostics> normality_diagnostics(const Scenario& scenario, std::size_t S,
                                                        std::uint64_t base_seed, std::size_t workers) {
  const std::size_t p = scenario.weights.parameters();
  std::vector<std::optional<Vec>> normalized(S);
  parallel_for(S, workers, [&](std::size_t s) {
    try {
      const FitResult fitted = fit(generate_sample(scenario, base_seed, s), scenario.score);
      normalized[s] = fitted.normalizer * (fitted.beta_hat - scenario.beta_true);
    } catch (const NumericError&) {
    }
  });
  std::vector<ComponentDiagnostics> out(p);
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double> values;
    for (const auto& t : normalized) {
      if (t) values.push_back((*t)[static_cast<Eigen::Index>(j)]);
    }
    ComponentDiagnostics& d = out[j];
    if (values.empty()) {
      d.degenerate = true;
      continue;
    }
    const double count = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= count;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : values) {
      const double e = v - mean;
      m2 += e * e;
      m3 += e * e * e;
      m4 += e * e * e * e;
    }
    m2 /= count;
    m3 /= count;
    m4 /= count;
    d.mean = mean;
    d.variance = sample_variance(values);
    if (!(m2 > 0.0)) {
      d.degenerate = true;
      continue;
    }
    d.skewness = m3 / std::pow(m2, 1.5);
    d.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    d.ks_statistic = ks_normal_statistic(values, d.variance);
  }
  return out;
}

}  // namespace blockboot
