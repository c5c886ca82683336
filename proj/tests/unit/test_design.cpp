#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "blockboot/design.hpp"

using namespace blockboot;
using boost::math::quadrature::gauss_kronrod;

namespace {

// Integral of the strip marginal to a power, split at its breakpoints.
double strip_power_integral(const Design& d, int power) {
  const double a = d.strip_a();
  const std::vector<double> cuts{-0.5, -2 / a, -1 / a, 0.0, 1 / a, 2 / a, 0.5};
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    total += gauss_kronrod<double, 31>::integrate([&](double x) { return std::pow(d.strip_marginal(x), power); },
                                                  cuts[i], cuts[i + 1], 15, 1e-14);
  }
  return total;
}

template <typename F>
double square_integral(F&& f) {
  return gauss_kronrod<double, 31>::integrate(
      [&](double x) {
        return gauss_kronrod<double, 31>::integrate(
            [&](double y) {
              const std::array<double, 2> p{x, y};
              return f(std::span<const double>(p));
            },
            -0.5, 0.5, 10, 1e-13);
      },
      -0.5, 0.5, 10, 1e-13);
}

}  // namespace

TEST(Density, UniformIsOne) {
  const auto d = Design::uniform();
  EXPECT_EQ(density(d, std::vector<double>{0.1, -0.3}), 1.0);
  EXPECT_EQ(density(d, std::vector<double>{0.5, 0.5}), 1.0);
  EXPECT_THROW(density(d, std::vector<double>{0.7, 0.0}), std::invalid_argument);
}

TEST(Density, StripPieces) {
  const auto d = Design::strip(8);
  EXPECT_DOUBLE_EQ(density(d, std::vector<double>{0.05, 0.0}), 2.0);
  EXPECT_DOUBLE_EQ(density(d, std::vector<double>{0.4, 0.0}), 0.4);
}

TEST(Density, StripIsSymmetric) {
  for (double a : {4.5, 8.0, 40.0}) {
    const auto d = Design::strip(a);
    for (double x = 0.0; x < 0.5; x += 0.0123) {
      EXPECT_EQ(density(d, std::vector<double>{x, 0.2}), density(d, std::vector<double>{-x, 0.2}));
    }
  }
}

TEST(Density, StripRejectsSmallA) { EXPECT_THROW(Design::strip(4.0), std::invalid_argument); }

TEST(DensityMoment, NormalizationForAllDesigns) {
  for (const auto& d : {Design::uniform(), Design::strip(8), Design::strip(40), Design::normal_mixture(),
                        Design::uniform(Prototype::unit_disk, 2)}) {
    EXPECT_NEAR(density_moment(d, 1), 1.0, 1e-6) << to_string(d.kind());
  }
}

TEST(DensityMoment, StripSquareMatchesQuadrature) {
  const auto d = Design::strip(8);
  const double closed = 2.0 * (0.5 + 4.96 / 24.0 + 0.04);
  EXPECT_NEAR(density_moment(d, 2), closed, 1e-12);
  EXPECT_NEAR(density_moment(d, 2), 1.4933333333333334, 1e-12);
  for (double a : {5.0, 8.0, 40.0}) {
    const auto s = Design::strip(a);
    for (int power : {1, 2, 3}) {
      EXPECT_NEAR(density_moment(s, power), strip_power_integral(s, power), 1e-10) << "a=" << a << " power=" << power;
    }
  }
}

TEST(DensityMoment, UniformSquareAndDisk) {
  EXPECT_DOUBLE_EQ(density_moment(Design::uniform(), 2), 1.0);
  EXPECT_NEAR(density_moment(Design::uniform(Prototype::unit_disk, 2), 2), 1.0 / unit_disk_volume(2), 1e-12);
}

TEST(DensityMoment, MixtureMatchesAdaptiveQuadrature) {
  const auto d = Design::normal_mixture();
  for (int power : {1, 2, 3}) {
    const double ref = square_integral([&](std::span<const double> x) { return std::pow(density(d, x), power); });
    EXPECT_NEAR(density_moment(d, power), ref, 1e-9) << "power " << power;
  }
}

TEST(Strip, CentralStripHoldsHalfTheMass) {
  for (double a : {4.5, 6.0, 8.0, 40.0, 100.0}) {
    const auto d = Design::strip(a);
    EXPECT_NEAR(d.strip_cdf(1 / a) - d.strip_cdf(-1 / a), 0.5, 1e-14) << a;
    EXPECT_NEAR(d.strip_cdf(0.5), 1.0, 1e-14);
    EXPECT_NEAR(d.strip_cdf(-0.5), 0.0, 1e-14);
  }
}

TEST(Strip, QuantileRoundTrip) {
  RandomStream rng(3);
  for (double a : {5.0, 8.0, 40.0}) {
    const auto d = Design::strip(a);
    for (int i = 0; i < 10000; ++i) {
      const double u = uniform01(rng);
      ASSERT_NEAR(d.strip_cdf(d.strip_quantile(u)), u, 1e-10);
    }
  }
}

TEST(Strip, DrawsFollowTheMarginal) {
  const auto d = Design::strip(8);
  const Region unit(Prototype::unit_cube, 2, 1.0);
  RandomStream rng(17);
  const auto sites = draw_sites(d, unit, 10000, rng);
  std::vector<double> x(static_cast<std::size_t>(sites.rows()));
  for (Eigen::Index i = 0; i < sites.rows(); ++i) x[static_cast<std::size_t>(i)] = sites(i, 0) - 0.5;
  std::sort(x.begin(), x.end());
  double ks = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = d.strip_cdf(x[i]);
    ks = std::max({ks, (i + 1) / n - f, f - i / n});
  }
  EXPECT_LT(ks, 1.628 / std::sqrt(n));  // 1% critical value

  const auto many = draw_sites(d, unit, 40000, rng);
  double central = 0.0;
  for (Eigen::Index i = 0; i < many.rows(); ++i) central += std::abs(many(i, 0) - 0.5) < 0.125 ? 1.0 : 0.0;
  EXPECT_NEAR(central / 40000.0, 0.5, 4.0 * std::sqrt(0.25 / 40000.0));
}

TEST(DrawSites, UniformIsContainedAndReproducible) {
  const Region region(Prototype::unit_cube, 2, 12);
  RandomStream a(1), b(1);
  const auto s1 = draw_sites(Design::uniform(), region, 100, a);
  const auto s2 = draw_sites(Design::uniform(), region, 100, b);
  ASSERT_EQ(s1.rows(), 100);
  EXPECT_TRUE((s1.array() == s2.array()).all());
  EXPECT_GE(s1.minCoeff(), 0.0);
  EXPECT_LE(s1.maxCoeff(), 12.0);
}

TEST(DrawSites, DiskSitesStayInside) {
  const Region disk(Prototype::unit_disk, 2, 10);
  RandomStream rng(4);
  const auto sites = draw_sites(Design::uniform(Prototype::unit_disk, 2), disk, 500, rng);
  for (Eigen::Index i = 0; i < sites.rows(); ++i) EXPECT_TRUE(disk.contains(site_at(sites, i)));
}

TEST(DrawSites, MixtureMeanMatchesQuadrature) {
  const auto d = Design::normal_mixture();
  const Region region(Prototype::unit_cube, 2, 24);
  for (int axis : {0, 1}) {
    const double mean = square_integral([&](std::span<const double> x) { return x[axis] * density(d, x); });
    const double second = square_integral([&](std::span<const double> x) { return x[axis] * x[axis] * density(d, x); });
    const double sd = std::sqrt(second - mean * mean);
    RandomStream rng(100 + axis);
    const std::size_t n = 400;
    const auto sites = draw_sites(d, region, n, rng);
    const double empirical = (sites.col(axis).array() / 24.0 - 0.5).mean();
    EXPECT_NEAR(empirical, mean, 4.0 * sd / std::sqrt(static_cast<double>(n)));
  }
}
