#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "blockboot/block_selection.hpp"
#include "blockboot/experiments.hpp"
#include "helpers.hpp"

using namespace blockboot;
using testing_helpers::vec_of;

namespace {

Dataset sample(std::size_t n, std::uint64_t seed) {
  Scenario s;
  s.region = Region(Prototype::unit_cube, 2, 12);
  s.n = n;
  return generate_sample(s, seed, 0);
}

SelectionConfig small_config(std::vector<double> candidates) {
  SelectionConfig c;
  c.candidates = std::move(candidates);
  c.M_pilot = 60;
  c.M_sub = 60;
  return c;
}

}  // namespace

TEST(Selection, ZeroResidualsPickSmallestCandidate) {
  auto data = sample(200, 3);
  data.y = data.weights * vec_of({1.0, -2.0});
  const auto fitted = fit(data, Score::identity());
  const Region region(Prototype::unit_cube, 2, 12);
  const auto r = select_block_size(data, fitted, region, Score::identity(), small_config({2, 3, 4}), 1);
  EXPECT_EQ(r.block, 2.0);
  EXPECT_TRUE(r.mse.isZero(1e-20));
  EXPECT_TRUE(r.pilot_scaled_var.isZero(1e-20));
}

TEST(Selection, SquareRootScaling) {
  const auto data = sample(300, 4);
  const auto fitted = fit(data, Score::identity());
  const Region region(Prototype::unit_cube, 2, 12);
  auto cfg = small_config({2, 4, 6});
  cfg.subregion_side = 6;
  const auto r = select_block_size(data, fitted, region, Score::identity(), cfg, 2);
  EXPECT_DOUBLE_EQ(r.scale_factor, std::sqrt(2.0));
  ASSERT_EQ(r.sub_blocks.size(), 3u);
  EXPECT_DOUBLE_EQ(r.sub_blocks[1], 4.0 / std::sqrt(2.0));
  EXPECT_EQ(r.pilot_block, 4.0);
  EXPECT_EQ(r.subregions_used, 4u);
  EXPECT_FALSE(r.dimension_warning);
}

TEST(Selection, ResultIsACandidateAndDeterministic) {
  const Region region(Prototype::unit_cube, 2, 12);
  for (std::uint64_t seed : {5, 6, 7}) {
    const auto data = sample(250, seed);
    const auto fitted = fit(data, Score::identity());
    const std::vector<double> candidates{1.5, 2, 3, 4};
    const auto a = select_block_size(data, fitted, region, Score::identity(), small_config(candidates), seed);
    const auto b = select_block_size(data, fitted, region, Score::identity(), small_config(candidates), seed);
    EXPECT_NE(std::find(candidates.begin(), candidates.end(), a.block), candidates.end());
    for (double c : a.component_blocks) EXPECT_NE(std::find(candidates.begin(), candidates.end(), c), candidates.end());
    EXPECT_EQ(a.block, b.block);
    EXPECT_TRUE((a.mse.array() == b.mse.array()).all());
  }
}

TEST(Selection, SparseSubregionsAreSkipped) {
  const Region region(Prototype::unit_cube, 2, 12);
  const auto data = sample(30, 8);
  const auto fitted = fit(data, Score::identity());
  auto cfg = small_config({2, 3});
  cfg.min_sites = 1000;
  EXPECT_THROW(select_block_size(data, fitted, region, Score::identity(), cfg, 1), NumericError);
}

TEST(Selection, ConfigErrors) {
  const Region region(Prototype::unit_cube, 2, 12);
  const auto data = sample(100, 9);
  const auto fitted = fit(data, Score::identity());
  EXPECT_THROW(select_block_size(data, fitted, region, Score::identity(), small_config({}), 1), ConfigError);
  EXPECT_THROW(select_block_size(data, fitted, region, Score::identity(), small_config({3, 2}), 1), ConfigError);
  EXPECT_THROW(select_block_size(data, fitted, Region(Prototype::unit_disk, 2, 12), Score::identity(),
                                 small_config({2, 3}), 1),
               ConfigError);
}
