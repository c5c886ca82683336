#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "blockboot/random.hpp"
#include "blockboot/region.hpp"
#include "blockboot/regression.hpp"
#include "blockboot/types.hpp"

namespace blockboot {

enum class Variant { gbbb, gbbb_cb, gbbb_nonoverlap, dssbb };
enum class CiMethod { normal, percentile };

Variant parse_variant(std::string_view name);
std::string_view to_string(Variant variant);
CiMethod parse_ci_method(std::string_view name);
std::string_view to_string(CiMethod method);

struct BootstrapPlan {
  Variant variant = Variant::gbbb;
  double b = 1.0;
  std::size_t M = 1000;
  CiMethod ci_method = CiMethod::normal;
  double level = 0.90;
  std::uint64_t seed = 0;
  bool exact_mode = false;

  void validate(const Region& region) const;
};

/// Partition, lattice anchors and site index for one site configuration.
struct ResamplingGeometry {
  BlockPartition partition;
  TemplateIndexSet templates;
  SiteIndex index;

  const Region& region() const { return partition.region(); }
  double block_side() const { return partition.block_side(); }
};

ResamplingGeometry make_geometry(const Region& region, const SiteMatrix& sites, double b);

/// Admissible offsets of one resampling variant and the site ids of every
/// translated block, shared across all resamples of a dataset.
///
/// Complete cells share a single cube-shaped block class; each boundary cell
/// has its own class (all cells use the cube class under gbbb-cb).
class BlockTable {
 public:
  BlockTable(Variant variant, const ResamplingGeometry& geometry, const SiteMatrix& sites);

  Variant variant() const { return variant_; }
  std::size_t cell_count() const { return shape_of_cell_.size(); }
  std::size_t offset_count() const { return offset_count_; }
  std::size_t shape_count() const { return shape_count_; }
  int dim() const { return dim_; }
  double block_side() const { return b_; }
  std::span<const double> offset(std::size_t o) const {
    return {offsets_.data() + o * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  const LatticePoint& cell_key(std::size_t cell) const { return cell_keys_[cell]; }
  std::size_t shape_of(std::size_t cell) const { return shape_of_cell_[cell]; }
  std::span<const std::size_t> block(std::size_t cell, std::size_t o) const {
    return blocks_[shape_of_cell_[cell] * offset_count_ + o];
  }
  std::span<const std::size_t> shape_block(std::size_t shape, std::size_t o) const {
    return blocks_[shape * offset_count_ + o];
  }
  /// E_* L_k, the block count averaged over all admissible offsets.
  double expected_count(std::size_t cell) const;
  /// E_* N* = sum_k E_* L_k.
  double expected_total() const;

 private:
  Variant variant_;
  int dim_;
  double b_;
  std::size_t offset_count_ = 0;
  std::size_t shape_count_ = 0;
  std::vector<double> offsets_;
  std::vector<LatticePoint> cell_keys_;
  std::vector<std::size_t> shape_of_cell_;
  std::vector<std::vector<std::size_t>> blocks_;  // [shape * offset_count + offset]
};

/// One bootstrap draw: an offset per cell and the sites it brings.
struct Resample {
  std::vector<std::size_t> draws;  // offset index per cell
  std::vector<std::vector<std::size_t>> block_site_ids;
  std::vector<std::size_t> counts;  // L_k*
  std::size_t n_star = 0;
};

/// Independent uniform offset per cell.
Resample draw_blocks(const BlockTable& table, RandomStream& rng);
Resample resample_from_draws(const BlockTable& table, std::vector<std::size_t> draws);

/// c_hat(k) for every cell as the columns of a p x K matrix: the exact
/// average over admissible offsets of the block score sum sum_j w_j psi(Z_hat_j).
Mat centering_constants(const BlockTable& table, const Dataset& data, const FitResult& fit, const Score& score);

/// Pseudo-observations of one resample. Covariate weights travel with the
/// resampled observation; the pseudo-site is the source site relocated into
/// its target cell.
struct BootstrapDataset {
  SiteMatrix sites;
  Mat weights;
  Vec y;
  Vec errors;
  std::vector<std::size_t> cell_of_row;
  std::vector<std::size_t> source;

  std::size_t size() const { return static_cast<std::size_t>(y.size()); }
};

BootstrapDataset assemble_pseudo_data(const Resample& resample, const BlockTable& table, const FitResult& fit,
                                      const Dataset& data);

/// Root of sum_k [S*(k; t) - c_hat(k)] = 0; nullopt when the replicate fails
/// (empty resample, singular bootstrap Gram matrix, Newton failure).
std::optional<Vec> solve_bootstrap(const BootstrapDataset& bdata, const Mat& centering, const Score& score,
                                   const Vec& beta_hat);

/// Sample-mean shortcut Ybar* - mu_tilde for the intercept-only identity model,
/// mu_tilde = sum_k mu_hat(k) / N* with mu_hat(k) the offset-averaged block Y-sum.
double mean_case_closed_form(const Resample& resample, const BlockTable& table, const Dataset& data,
                             const FitResult& fit);

/// Precomputed block aggregates for fast replicate solves.
class BootstrapEngine {
 public:
  BootstrapEngine(const BlockTable& table, const Dataset& data, const FitResult& fit, const Score& score);

  const Mat& centering() const { return centering_; }
  const BlockTable& table() const { return *table_; }
  /// beta* for the given offset draws, or nullopt for a failed replicate.
  std::optional<Vec> replicate(std::span<const std::size_t> draws) const;
  std::size_t n_star(std::span<const std::size_t> draws) const;

 private:
  const BlockTable* table_;
  const Dataset* data_;
  const FitResult* fit_;
  Score score_;
  Mat centering_;
  Vec centering_total_;
  std::vector<Mat> gram_;   // per (shape, offset)
  std::vector<Vec> cross_;  // sum w Z_hat per (shape, offset)
};

struct BootstrapOutput {
  Mat replicates;  // successful beta* values, one per row
  Vec beta_hat;
  Vec var_estimate;
  Vec scaled_var;
  std::vector<std::pair<double, double>> ci;
  double n_star_mean = 0.0;
  std::size_t failure_count = 0;
  std::size_t attempted = 0;
  bool exact = false;
  bool warning = false;
};

/// Number of equally likely resamples, saturating at `cap + 1`.
std::size_t resample_space_size(const BlockTable& table, std::size_t cap);

inline constexpr std::size_t kExactModeLimit = 100000;

/// M bootstrap replicates of the M-estimator with variance and confidence
/// intervals. Replicate r draws from a stream derived from (plan.seed, r).
BootstrapOutput run_bootstrap(const Dataset& data, const FitResult& fit, const BootstrapPlan& plan,
                              const ResamplingGeometry& geometry, const Score& score);
BootstrapOutput run_bootstrap(const BootstrapEngine& engine, const Dataset& data, const FitResult& fit,
                              const BootstrapPlan& plan);

enum class MeanDenominator {
  resampled,  // N**, the realized resample size
  expected,   // E_* N**, the linearized statistic
};

/// lambda^d Var_*(T**) for the block-resampled mean of the raw observations.
double resampled_mean_variance(const Dataset& data, const BlockTable& table, const BootstrapPlan& plan,
                               MeanDenominator denominator = MeanDenominator::resampled);

/// DSSBB estimator of the scaled variance of the sample mean.
double dssbb_mean_variance(const Dataset& data, const ResamplingGeometry& geometry, const BootstrapPlan& plan,
                           MeanDenominator denominator = MeanDenominator::resampled);

/// Standard normal quantile.
double normal_quantile(double p);
/// Type-7 empirical quantile of unsorted values.
double empirical_quantile(std::vector<double> values, double p);

}  // namespace blockboot
