#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "blockboot/bootstrap.hpp"
#include "blockboot/region.hpp"
#include "blockboot/regression.hpp"

namespace blockboot {

enum class PilotRule { median_candidate, fixed };

struct SelectionConfig {
  std::vector<double> candidates;  // ascending, full-region scale
  std::size_t subregion_count = 0;  // 0: all 2^d corner sub-cubes
  double subregion_side = 0.0;      // 0: lambda / 2
  PilotRule pilot_rule = PilotRule::median_candidate;
  double pilot_block = 0.0;
  std::size_t M_pilot = 200;
  std::size_t M_sub = 200;
  Variant variant = Variant::gbbb;
  bool aggregate_components = false;
  std::size_t min_sites = 10;
};

struct SelectionResult {
  double block = 0.0;                     // chosen full-region block side
  std::vector<double> component_blocks;   // per-coefficient choices
  double scale_factor = 1.0;              // (lambda / lambda_sub)^{1/2}
  double pilot_block = 0.0;
  Vec pilot_scaled_var;
  std::vector<double> sub_blocks;         // candidates mapped to subregion scale
  Mat mse;                                // candidates x p
  std::size_t subregions_used = 0;
  bool dimension_warning = false;         // square-root rule applied with d != 2
};

/// Empirical block-size rule: pick the subregion block size whose scaled
/// variance estimates best match the full-region pilot estimate, then rescale
/// by the square root of the region-to-subregion size ratio.
SelectionResult select_block_size(const Dataset& data, const FitResult& fit, const Region& region,
                                  const Score& score, const SelectionConfig& config, std::uint64_t seed);

}  // namespace blockboot
