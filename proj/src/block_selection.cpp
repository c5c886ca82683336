#include "blockboot/block_selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace blockboot {

namespace {

struct Subregion {
  std::vector<double> origin;
};

std::vector<Subregion> corner_subregions(const Region& region, double side, std::size_t count) {
  const int dim = region.dim();
  const std::size_t total = std::size_t{1} << dim;
  if (count == 0 || count > total) count = total;
  std::vector<Subregion> out;
  for (std::size_t mask = 0; mask < count; ++mask) {
    Subregion sub{std::vector<double>(static_cast<std::size_t>(dim))};
    for (int c = 0; c < dim; ++c) sub.origin[c] = ((mask >> c) & 1U) ? region.lambda() - side : 0.0;
    out.push_back(std::move(sub));
  }
  return out;
}

Dataset restrict_to(const Dataset& data, const Subregion& sub, double side, double lambda) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < data.sites.rows(); ++i) {
    bool inside = true;
    for (Eigen::Index c = 0; c < data.sites.cols() && inside; ++c) {
      const double x = data.sites(i, c);
      const double lo = sub.origin[c];
      const bool upper_open = lo + side < lambda;
      inside = x >= lo && (upper_open ? x < lo + side : x <= lo + side);
    }
    if (inside) rows.push_back(i);
  }
  Dataset out;
  out.lambda = side;
  out.dim = data.dim;
  out.sites.resize(static_cast<Eigen::Index>(rows.size()), data.sites.cols());
  out.weights.resize(static_cast<Eigen::Index>(rows.size()), data.weights.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = rows[r];
    const auto row = static_cast<Eigen::Index>(r);
    for (Eigen::Index c = 0; c < data.sites.cols(); ++c) {
      out.sites(row, c) = std::clamp(data.sites(i, c) - sub.origin[c], 0.0, side);
    }
    out.weights.row(row) = data.weights.row(i);
    out.y[row] = data.y[i];
  }
  return out;
}

double snap_to_candidate(double value, const std::vector<double>& candidates) {
  double best = candidates.front();
  for (double c : candidates) {
    if (std::abs(c - value) < std::abs(best - value)) best = c;
  }
  return best;
}

}  // namespace

SelectionResult select_block_size(const Dataset& data, const FitResult& fit, const Region& region,
                                  const Score& score, const SelectionConfig& config, std::uint64_t seed) {
  if (config.candidates.empty()) throw ConfigError("block selection: candidate list is empty");
  if (!std::is_sorted(config.candidates.begin(), config.candidates.end())) {
    throw ConfigError("block selection: candidates must be ascending");
  }
  if (region.prototype() != Prototype::unit_cube) {
    throw ConfigError("block selection: corner sub-squares require a unit-cube region");
  }
  const double lambda = region.lambda();
  const double side = config.subregion_side > 0.0 ? config.subregion_side : 0.5 * lambda;
  if (!(side < lambda)) throw ConfigError("block selection: subregion side must be smaller than lambda");

  SelectionResult result;
  result.dimension_warning = region.dim() != 2;
  result.scale_factor = std::sqrt(lambda / side);
  result.pilot_block = config.pilot_rule == PilotRule::fixed
                           ? config.pilot_block
                           : config.candidates[(config.candidates.size() - 1) / 2];

  BootstrapPlan pilot{config.variant, result.pilot_block, config.M_pilot, CiMethod::normal, 0.9,
                      derive_seed(seed, {static_cast<std::uint64_t>(StreamPurpose::selection), 0})};
  const ResamplingGeometry full = make_geometry(region, data.sites, result.pilot_block);
  result.pilot_scaled_var = run_bootstrap(data, fit, pilot, full, score).scaled_var;
  const Eigen::Index p = result.pilot_scaled_var.size();

  const std::size_t ncand = config.candidates.size();
  for (double c : config.candidates) result.sub_blocks.push_back(c / result.scale_factor);

  Mat sum_sq = Mat::Zero(static_cast<Eigen::Index>(ncand), p);
  std::vector<bool> usable(ncand, true);
  const auto subregions = corner_subregions(region, side, config.subregion_count);
  const Region sub_region(Prototype::unit_cube, region.dim(), side);
  for (std::size_t i = 0; i < subregions.size(); ++i) {
    const Dataset local = restrict_to(data, subregions[i], side, lambda);
    if (local.size() < config.min_sites) continue;
    Mat estimates(static_cast<Eigen::Index>(ncand), p);
    std::vector<bool> ok(ncand, false);
    try {
      const FitResult local_fit = blockboot::fit(local, score);
      for (std::size_t c = 0; c < ncand; ++c) {
        const double b = result.sub_blocks[c];
        if (b > side) continue;
        BootstrapPlan plan{config.variant, b, config.M_sub, CiMethod::normal, 0.9,
                           derive_seed(seed, {static_cast<std::uint64_t>(StreamPurpose::selection), i + 1, c})};
        const ResamplingGeometry geometry = make_geometry(sub_region, local.sites, b);
        estimates.row(static_cast<Eigen::Index>(c)) =
            run_bootstrap(local, local_fit, plan, geometry, score).scaled_var.transpose();
        ok[c] = true;
      }
    } catch (const Error&) {
      continue;
    } catch (const std::invalid_argument&) {
      continue;
    }
    ++result.subregions_used;
    for (std::size_t c = 0; c < ncand; ++c) {
      if (!ok[c]) {
        usable[c] = false;
        continue;
      }
      const auto r = static_cast<Eigen::Index>(c);
      sum_sq.row(r) += (estimates.row(r) - result.pilot_scaled_var.transpose()).array().square().matrix();
    }
  }
  if (result.subregions_used == 0) {
    throw NumericError("block selection: every subregion was skipped (fewer than " +
                       std::to_string(config.min_sites) + " sites or singular fit)");
  }
  result.mse = sum_sq / static_cast<double>(result.subregions_used);

  // MSE differences below what rounding in y can produce count as ties, so a
  // noiseless response still resolves to the smallest candidate.
  const double y_scale = data.y.size() ? data.y.cwiseAbs().maxCoeff() : 0.0;
  const double resolution = std::pow(lambda, region.dim()) * std::pow(1e-10 * y_scale, 2);
  const double floor = resolution * resolution;
  auto argmin = [&](auto&& criterion) {
    std::size_t best = ncand;
    double best_value = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < ncand; ++c) {
      if (!usable[c]) continue;
      const double v = criterion(static_cast<Eigen::Index>(c));
      if (best == ncand || v < best_value - floor - 1e-12 * std::abs(best_value)) {
        best_value = v;
        best = c;
      }
    }
    if (best == ncand) throw NumericError("block selection: no candidate block size fits the subregions");
    return snap_to_candidate(result.sub_blocks[best] * result.scale_factor, config.candidates);
  };
  for (Eigen::Index j = 0; j < p; ++j) {
    result.component_blocks.push_back(argmin([&](Eigen::Index c) { return result.mse(c, j); }));
  }
  result.block = config.aggregate_components ? argmin([&](Eigen::Index c) { return result.mse.row(c).sum(); })
                                             : result.component_blocks.front();
  return result;
}

}  // namespace blockboot
