#include "blockboot/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <boost/math/distributions/normal.hpp>

namespace blockboot {

Variant parse_variant(std::string_view name) {
  if (name == "gbbb") return Variant::gbbb;
  if (name == "gbbb-cb") return Variant::gbbb_cb;
  if (name == "gbbb-nonoverlap") return Variant::gbbb_nonoverlap;
  if (name == "dssbb") return Variant::dssbb;
  throw ConfigError("unknown bootstrap variant '" + std::string(name) + "'");
}

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::gbbb: return "gbbb";
    case Variant::gbbb_cb: return "gbbb-cb";
    case Variant::gbbb_nonoverlap: return "gbbb-nonoverlap";
    case Variant::dssbb: return "dssbb";
  }
  return "?";
}

CiMethod parse_ci_method(std::string_view name) {
  if (name == "normal") return CiMethod::normal;
  if (name == "percentile") return CiMethod::percentile;
  throw ConfigError("unknown confidence interval method '" + std::string(name) + "'");
}

std::string_view to_string(CiMethod method) { return method == CiMethod::normal ? "normal" : "percentile"; }

void BootstrapPlan::validate(const Region& region) const {
  if (M < 1) throw ConfigError("bootstrap plan: M must be at least 1");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("bootstrap plan: level must lie in (0, 1)");
  if (!(b > 0.0)) throw ConfigError("bootstrap plan: block side must be positive");
  if (b > region.lambda() * (1.0 + 1e-12)) {
    throw ConfigError("bootstrap plan: block side " + std::to_string(b) + " exceeds lambda " +
                      std::to_string(region.lambda()));
  }
}

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal_distribution<double>(), p); }

double empirical_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("empirical_quantile: no values");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ResamplingGeometry make_geometry(const Region& region, const SiteMatrix& sites, double b) {
  return ResamplingGeometry{partition(region, b), template_positions(region, b), build_site_index(region, sites, b)};
}

// --------------------------------------------------------------------------
// BlockTable

BlockTable::BlockTable(Variant variant, const ResamplingGeometry& geometry, const SiteMatrix& sites)
    : variant_(variant), dim_(geometry.region().dim()), b_(geometry.block_side()) {
  const Region& region = geometry.region();
  const auto& cells = geometry.partition.cells();
  const auto dim = static_cast<std::size_t>(dim_);

  switch (variant) {
    case Variant::gbbb:
    case Variant::gbbb_cb:
      for (const auto& position : geometry.templates.positions) {
        for (long v : position) offsets_.push_back(static_cast<double>(v));
      }
      break;
    case Variant::gbbb_nonoverlap:
      for (const auto& cell : cells) {
        if (!cell.complete) continue;
        for (long v : cell.key) offsets_.push_back(static_cast<double>(v) * b_);
      }
      break;
    case Variant::dssbb: {
      std::vector<Eigen::Index> admissible;
      for (Eigen::Index i = 0; i < sites.rows(); ++i) {
        if (region.contains_cube(site_at(sites, i), b_)) admissible.push_back(i);
      }
      // Coordinate order keeps the offset list independent of site labelling.
      std::sort(admissible.begin(), admissible.end(), [&](Eigen::Index x, Eigen::Index y) {
        const auto a = site_at(sites, x);
        const auto c = site_at(sites, y);
        return std::lexicographical_compare(a.begin(), a.end(), c.begin(), c.end());
      });
      for (Eigen::Index i : admissible) {
        for (double v : site_at(sites, i)) offsets_.push_back(v);
      }
      break;
    }
  }
  offset_count_ = offsets_.size() / dim;
  if (offset_count_ == 0) {
    throw std::invalid_argument("no admissible blocks for variant " + std::string(to_string(variant)) +
                                " with block side " + std::to_string(b_));
  }

  struct ShapeClass {
    std::size_t representative;
    BlockShape shape;
  };
  std::vector<ShapeClass> shapes;
  std::optional<std::size_t> cube_class;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    cell_keys_.push_back(cells[k].key);
    if (variant == Variant::gbbb_cb || cells[k].complete) {
      if (!cube_class) {
        cube_class = shapes.size();
        shapes.push_back({k, BlockShape::cube});
      }
      shape_of_cell_.push_back(*cube_class);
    } else {
      shape_of_cell_.push_back(shapes.size());
      shapes.push_back({k, BlockShape::cell});
    }
  }
  shape_count_ = shapes.size();
  blocks_.resize(shape_count_ * offset_count_);
  for (std::size_t s = 0; s < shape_count_; ++s) {
    const auto& cell = cells[shapes[s].representative];
    for (std::size_t o = 0; o < offset_count_; ++o) {
      blocks_[s * offset_count_ + o] =
          sites_in_translate(geometry.partition, geometry.index, sites, cell, offset(o), shapes[s].shape);
    }
  }
}

double BlockTable::expected_count(std::size_t cell) const {
  double total = 0.0;
  for (std::size_t o = 0; o < offset_count_; ++o) total += static_cast<double>(block(cell, o).size());
  return total / static_cast<double>(offset_count_);
}

double BlockTable::expected_total() const {
  double total = 0.0;
  for (std::size_t k = 0; k < cell_count(); ++k) total += expected_count(k);
  return total;
}

// --------------------------------------------------------------------------
// Resamples and pseudo-data

Resample resample_from_draws(const BlockTable& table, std::vector<std::size_t> draws) {
  if (draws.size() != table.cell_count()) throw std::invalid_argument("resample: one draw per cell is required");
  Resample out;
  out.draws = std::move(draws);
  out.block_site_ids.reserve(table.cell_count());
  for (std::size_t k = 0; k < table.cell_count(); ++k) {
    if (out.draws[k] >= table.offset_count()) throw std::invalid_argument("resample: offset index out of range");
    const auto ids = table.block(k, out.draws[k]);
    out.block_site_ids.emplace_back(ids.begin(), ids.end());
    out.counts.push_back(ids.size());
    out.n_star += ids.size();
  }
  return out;
}

Resample draw_blocks(const BlockTable& table, RandomStream& rng) {
  std::vector<std::size_t> draws(table.cell_count());
  for (auto& d : draws) d = uniform_index(rng, table.offset_count());
  return resample_from_draws(table, std::move(draws));
}

Mat centering_constants(const BlockTable& table, const Dataset& data, const FitResult& fit, const Score& score) {
  const Eigen::Index p = data.weights.cols();
  Vec psi(fit.residuals.size());
  for (Eigen::Index i = 0; i < psi.size(); ++i) psi[i] = score.psi(fit.residuals[i]);
  Mat per_shape = Mat::Zero(p, static_cast<Eigen::Index>(table.shape_count()));
  for (std::size_t s = 0; s < table.shape_count(); ++s) {
    Vec total = Vec::Zero(p);
    for (std::size_t o = 0; o < table.offset_count(); ++o) {
      for (std::size_t j : table.shape_block(s, o)) {
        total.noalias() += data.weights.row(static_cast<Eigen::Index>(j)).transpose() * psi[static_cast<Eigen::Index>(j)];
      }
    }
    per_shape.col(static_cast<Eigen::Index>(s)) = total / static_cast<double>(table.offset_count());
  }
  Mat out(p, static_cast<Eigen::Index>(table.cell_count()));
  for (std::size_t k = 0; k < table.cell_count(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) = per_shape.col(static_cast<Eigen::Index>(table.shape_of(k)));
  }
  return out;
}

BootstrapDataset assemble_pseudo_data(const Resample& resample, const BlockTable& table, const FitResult& fit,
                                      const Dataset& data) {
  const auto rows = static_cast<Eigen::Index>(resample.n_star);
  const Eigen::Index dim = table.dim();
  BootstrapDataset out;
  out.sites.resize(rows, dim);
  out.weights.resize(rows, data.weights.cols());
  out.y.resize(rows);
  out.errors.resize(rows);
  Eigen::Index row = 0;
  for (std::size_t k = 0; k < resample.block_site_ids.size(); ++k) {
    const auto offset = table.offset(resample.draws[k]);
    const auto& key = table.cell_key(k);
    for (std::size_t j : resample.block_site_ids[k]) {
      const auto src = static_cast<Eigen::Index>(j);
      for (Eigen::Index c = 0; c < dim; ++c) {
        out.sites(row, c) = data.sites(src, c) - offset[c] + static_cast<double>(key[c]) * table.block_side();
      }
      out.weights.row(row) = data.weights.row(src);
      out.errors[row] = fit.residuals[src];
      out.y[row] = data.weights.row(src).dot(fit.beta_hat) + fit.residuals[src];
      out.cell_of_row.push_back(k);
      out.source.push_back(j);
      ++row;
    }
  }
  return out;
}

std::optional<Vec> solve_bootstrap(const BootstrapDataset& bdata, const Mat& centering, const Score& score,
                                   const Vec& beta_hat) {
  if (bdata.size() == 0) return std::nullopt;
  const Vec shift = centering.rowwise().sum();
  const Mat gram = bdata.weights.transpose() * bdata.weights;
  if (score.is_identity()) return solve_psd(gram, bdata.weights.transpose() * bdata.y - shift);
  if (!solve_psd(gram, Vec::Zero(gram.rows()))) return std::nullopt;
  const NewtonResult newton = solve_m_equation(bdata.weights, bdata.y, shift, score, beta_hat);
  if (!newton.converged) return std::nullopt;
  return newton.t;
}

double mean_case_closed_form(const Resample& resample, const BlockTable& table, const Dataset& data,
                             const FitResult& fit) {
  if (data.weights.cols() != 1 || (data.weights.array() != 1.0).any()) {
    throw std::invalid_argument("mean_case_closed_form: requires the intercept-only model");
  }
  if (resample.n_star == 0) throw NumericError("mean_case_closed_form: empty resample");
  const double n_star = static_cast<double>(resample.n_star);
  double resampled_total = 0.0;
  for (const auto& ids : resample.block_site_ids) {
    for (std::size_t j : ids) resampled_total += fit.beta_hat[0] + fit.residuals[static_cast<Eigen::Index>(j)];
  }
  double mu_total = 0.0;
  for (std::size_t k = 0; k < table.cell_count(); ++k) {
    double sum = 0.0;
    for (std::size_t o = 0; o < table.offset_count(); ++o) {
      for (std::size_t j : table.block(k, o)) sum += data.y[static_cast<Eigen::Index>(j)];
    }
    mu_total += sum / static_cast<double>(table.offset_count());
  }
  return resampled_total / n_star - mu_total / n_star;
}

// --------------------------------------------------------------------------
// Engine

BootstrapEngine::BootstrapEngine(const BlockTable& table, const Dataset& data, const FitResult& fit,
                                 const Score& score)
    : table_(&table), data_(&data), fit_(&fit), score_(score) {
  centering_ = centering_constants(table, data, fit, score);
  centering_total_ = centering_.rowwise().sum();
  if (!score.is_identity()) return;
  const Eigen::Index p = data.weights.cols();
  const std::size_t entries = table.shape_count() * table.offset_count();
  gram_.assign(entries, Mat::Zero(p, p));
  cross_.assign(entries, Vec::Zero(p));
  for (std::size_t s = 0; s < table.shape_count(); ++s) {
    for (std::size_t o = 0; o < table.offset_count(); ++o) {
      const std::size_t e = s * table.offset_count() + o;
      for (std::size_t j : table.shape_block(s, o)) {
        const auto row = data.weights.row(static_cast<Eigen::Index>(j));
        gram_[e].noalias() += row.transpose() * row;
        cross_[e].noalias() += row.transpose() * fit.residuals[static_cast<Eigen::Index>(j)];
      }
    }
  }
}

std::size_t BootstrapEngine::n_star(std::span<const std::size_t> draws) const {
  std::size_t total = 0;
  for (std::size_t k = 0; k < draws.size(); ++k) total += table_->block(k, draws[k]).size();
  return total;
}

std::optional<Vec> BootstrapEngine::replicate(std::span<const std::size_t> draws) const {
  if (!score_.is_identity()) {
    const Resample resample = resample_from_draws(*table_, std::vector<std::size_t>(draws.begin(), draws.end()));
    return solve_bootstrap(assemble_pseudo_data(resample, *table_, *fit_, *data_), centering_, score_,
                           fit_->beta_hat);
  }
  const Eigen::Index p = data_->weights.cols();
  Mat gram = Mat::Zero(p, p);
  Vec cross = -centering_total_;
  const std::size_t offsets = table_->offset_count();
  for (std::size_t k = 0; k < draws.size(); ++k) {
    const std::size_t e = table_->shape_of(k) * offsets + draws[k];
    gram += gram_[e];
    cross += cross_[e];
  }
  auto delta = solve_psd(gram, cross);
  if (!delta) return std::nullopt;
  return Vec(fit_->beta_hat + *delta);
}

// --------------------------------------------------------------------------
// Replicate loops

std::size_t resample_space_size(const BlockTable& table, std::size_t cap) {
  std::size_t total = 1;
  for (std::size_t k = 0; k < table.cell_count(); ++k) {
    if (total > (cap + 1) / table.offset_count()) return cap + 1;
    total *= table.offset_count();
  }
  return std::min(total, cap + 1);
}

namespace {

// Calls fn(draws) either for every equally likely resample (exact) or for M
// seeded Monte Carlo resamples.
template <typename Fn>
bool for_each_resample(const BlockTable& table, const BootstrapPlan& plan, Fn&& fn) {
  const std::size_t cells = table.cell_count();
  const std::size_t offsets = table.offset_count();
  std::vector<std::size_t> draws(cells, 0);
  if (plan.exact_mode && resample_space_size(table, kExactModeLimit) <= kExactModeLimit) {
    while (true) {
      fn(std::span<const std::size_t>(draws));
      std::size_t k = 0;
      for (; k < cells; ++k) {
        if (++draws[k] < offsets) break;
        draws[k] = 0;
      }
      if (k == cells) return true;
    }
  }
  for (std::size_t r = 0; r < plan.M; ++r) {
    RandomStream rng = make_stream(derive_seed(plan.seed, {static_cast<std::uint64_t>(r)}));
    for (auto& d : draws) d = uniform_index(rng, offsets);
    fn(std::span<const std::size_t>(draws));
  }
  return false;
}

double variance_of(const std::vector<double>& values, bool population) {
  if (values.size() < 2) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(population ? values.size() : values.size() - 1);
}

}  // namespace

BootstrapOutput run_bootstrap(const BootstrapEngine& engine, const Dataset& data, const FitResult& fit,
                              const BootstrapPlan& plan) {
  const Eigen::Index p = fit.beta_hat.size();
  std::vector<Vec> successes;
  BootstrapOutput out;
  double n_star_total = 0.0;
  out.exact = for_each_resample(engine.table(), plan, [&](std::span<const std::size_t> draws) {
    ++out.attempted;
    n_star_total += static_cast<double>(engine.n_star(draws));
    if (auto beta = engine.replicate(draws)) {
      successes.push_back(std::move(*beta));
    } else {
      ++out.failure_count;
    }
  });
  if (successes.empty()) throw NumericError("run_bootstrap: every replicate failed");
  out.n_star_mean = n_star_total / static_cast<double>(out.attempted);
  out.warning = static_cast<double>(out.failure_count) > 0.01 * static_cast<double>(out.attempted);
  out.beta_hat = fit.beta_hat;
  out.replicates.resize(static_cast<Eigen::Index>(successes.size()), p);
  for (std::size_t r = 0; r < successes.size(); ++r) out.replicates.row(static_cast<Eigen::Index>(r)) = successes[r].transpose();

  out.var_estimate.resize(p);
  out.ci.resize(static_cast<std::size_t>(p));
  const double z = normal_quantile(0.5 * (1.0 + plan.level));
  for (Eigen::Index j = 0; j < p; ++j) {
    std::vector<double> column(successes.size());
    for (std::size_t r = 0; r < successes.size(); ++r) column[r] = successes[r][j];
    out.var_estimate[j] = variance_of(column, out.exact);
    if (plan.ci_method == CiMethod::normal) {
      const double half = z * std::sqrt(out.var_estimate[j]);
      out.ci[static_cast<std::size_t>(j)] = {fit.beta_hat[j] - half, fit.beta_hat[j] + half};
    } else {
      out.ci[static_cast<std::size_t>(j)] = {empirical_quantile(column, 0.5 * (1.0 - plan.level)),
                                             empirical_quantile(column, 0.5 * (1.0 + plan.level))};
    }
  }
  out.scaled_var = out.var_estimate * std::pow(data.lambda, data.dim);
  return out;
}

BootstrapOutput run_bootstrap(const Dataset& data, const FitResult& fit, const BootstrapPlan& plan,
                              const ResamplingGeometry& geometry, const Score& score) {
  plan.validate(geometry.region());
  const BlockTable table(plan.variant, geometry, data.sites);
  const BootstrapEngine engine(table, data, fit, score);
  return run_bootstrap(engine, data, fit, plan);
}

double resampled_mean_variance(const Dataset& data, const BlockTable& table, const BootstrapPlan& plan,
                               MeanDenominator denominator) {
  const std::size_t entries = table.shape_count() * table.offset_count();
  std::vector<double> sums(entries, 0.0);
  std::vector<double> counts(entries, 0.0);
  for (std::size_t s = 0; s < table.shape_count(); ++s) {
    for (std::size_t o = 0; o < table.offset_count(); ++o) {
      const std::size_t e = s * table.offset_count() + o;
      for (std::size_t j : table.shape_block(s, o)) sums[e] += data.y[static_cast<Eigen::Index>(j)];
      counts[e] = static_cast<double>(table.shape_block(s, o).size());
    }
  }
  const double expected = table.expected_total();
  std::vector<double> values;
  const bool exact = for_each_resample(table, plan, [&](std::span<const std::size_t> draws) {
    double sum = 0.0;
    double count = 0.0;
    for (std::size_t k = 0; k < draws.size(); ++k) {
      const std::size_t e = table.shape_of(k) * table.offset_count() + draws[k];
      sum += sums[e];
      count += counts[e];
    }
    if (count == 0.0) return;
    values.push_back(sum / (denominator == MeanDenominator::resampled ? count : expected));
  });
  if (values.empty()) throw NumericError("resampled_mean_variance: every resample was empty");
  return std::pow(data.lambda, data.dim) * variance_of(values, exact);
}

double dssbb_mean_variance(const Dataset& data, const ResamplingGeometry& geometry, const BootstrapPlan& plan,
                           MeanDenominator denominator) {
  const BlockTable table(Variant::dssbb, geometry, data.sites);
  return resampled_mean_variance(data, table, plan, denominator);
}

}  // namespace blockboot
