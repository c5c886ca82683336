#pragma once

#include <initializer_list>
#include <vector>

#include "blockboot/random.hpp"
#include "blockboot/region.hpp"
#include "blockboot/regression.hpp"

namespace testing_helpers {

using namespace blockboot;

inline SiteMatrix sites_of(std::initializer_list<std::initializer_list<double>> rows) {
  SiteMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m(i, c++) = v;
    ++i;
  }
  return m;
}

inline Vec vec_of(std::initializer_list<double> values) {
  Vec v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

/// d = 1, lambda = 2, sites {0.5, 1.5}, y = (1, 3), intercept only.
inline Dataset toy() {
  Dataset d;
  d.sites = sites_of({{0.5}, {1.5}});
  d.weights = Mat::Ones(2, 1);
  d.y = vec_of({1.0, 3.0});
  d.lambda = 2.0;
  d.dim = 1;
  return d;
}

/// Uniform sites in [0, lambda]^dim with i.i.d. normal responses and an
/// optional binary covariate.
inline Dataset random_dataset(const Region& region, std::size_t n, bool covariate, std::uint64_t seed) {
  RandomStream rng(seed);
  Dataset d;
  d.dim = region.dim();
  d.lambda = region.lambda();
  d.sites.resize(static_cast<Eigen::Index>(n), region.dim());
  for (Eigen::Index i = 0; i < d.sites.rows(); ++i) {
    while (true) {
      for (int c = 0; c < region.dim(); ++c) d.sites(i, c) = region.lambda() * (0.02 + 0.96 * uniform01(rng));
      if (region.contains(site_at(d.sites, i))) break;
    }
  }
  d.weights = Mat::Ones(static_cast<Eigen::Index>(n), covariate ? 2 : 1);
  if (covariate) {
    for (Eigen::Index i = 0; i < d.weights.rows(); ++i) d.weights(i, 1) = uniform01(rng) < 0.5 ? 0.0 : 1.0;
    d.weights(0, 1) = 0.0;
    d.weights(1, 1) = 1.0;
  }
  d.y.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < d.y.size(); ++i) d.y[i] = standard_normal(rng);
  return d;
}

}  // namespace testing_helpers
