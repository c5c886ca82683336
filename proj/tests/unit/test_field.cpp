#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "blockboot/design.hpp"
#include "blockboot/field.hpp"
#include "helpers.hpp"

using namespace blockboot;
using testing_helpers::sites_of;

namespace {

double radial_integral(const CovarianceModel& m) {
  using boost::math::quadrature::gauss_kronrod;
  const double upper = m.family == CovarianceFamily::spherical ? m.range : std::numeric_limits<double>::infinity();
  return 2.0 * std::numbers::pi *
         gauss_kronrod<double, 61>::integrate([&](double h) { return h * cov(m, h); }, 0.0, upper, 15, 1e-15);
}

}  // namespace

TEST(Covariance, SphericalValues) {
  const CovarianceModel m{CovarianceFamily::spherical, 1.0, 2.0};
  EXPECT_EQ(cov(m, 0.0), 1.0);
  EXPECT_EQ(cov(m, 2.0), 0.0);
  EXPECT_EQ(cov(m, 5.0), 0.0);
  EXPECT_DOUBLE_EQ(cov(m, 1.0), 0.3125);
}

TEST(Covariance, ExponentialPracticalRange) {
  const CovarianceModel m{CovarianceFamily::exponential, 2.0, 3.0};
  EXPECT_EQ(cov(m, 0.0), 2.0);
  EXPECT_NEAR(cov(m, 3.0), 2.0 * std::exp(-3.0), 1e-15);
}

TEST(Covariance, MatrixExamples) {
  const CovarianceModel m{CovarianceFamily::spherical, 1.0, 2.0};
  const Mat one = cov_matrix(m, sites_of({{3.0, 4.0}}));
  ASSERT_EQ(one.rows(), 1);
  EXPECT_EQ(one(0, 0), 1.0);

  const Mat far = cov_matrix(m, sites_of({{0.0, 0.0}, {2.0, 0.0}}));
  EXPECT_TRUE(far.isDiagonal());

  const Mat line = cov_matrix(m, sites_of({{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}}));
  EXPECT_DOUBLE_EQ(line(0, 1), 0.3125);
  EXPECT_DOUBLE_EQ(line(1, 2), 0.3125);
  EXPECT_EQ(line(0, 2), 0.0);
  EXPECT_TRUE(line.isApprox(line.transpose()));
}

TEST(CovIntegral, ClosedFormsMatchRadialQuadrature) {
  EXPECT_NEAR(cov_integral({CovarianceFamily::spherical, 1.0, 2.0}, 2), 4.0 * std::numbers::pi / 5.0, 1e-14);
  EXPECT_NEAR(cov_integral({CovarianceFamily::spherical, 1.0, 4.0}, 2), 16.0 * std::numbers::pi / 5.0, 1e-13);
  EXPECT_EQ(cov_integral({CovarianceFamily::spherical, 0.0, 2.0}, 2), 0.0);
  for (const CovarianceModel m : {CovarianceModel{CovarianceFamily::spherical, 1.0, 2.0},
                                  CovarianceModel{CovarianceFamily::spherical, 2.5, 1.0},
                                  CovarianceModel{CovarianceFamily::exponential, 1.0, 2.0},
                                  CovarianceModel{CovarianceFamily::exponential, 0.7, 5.0}}) {
    const double ref = radial_integral(m);
    EXPECT_NEAR(cov_integral(m, 2) / ref, 1.0, 1e-10);
  }
}

TEST(Simulate, SingleSiteMarginal) {
  const CovarianceModel m{CovarianceFamily::spherical, 2.0, 2.0};
  const GaussianFieldSampler sampler(m, sites_of({{1.0, 1.0}}));
  RandomStream rng(9);
  const int reps = 100000;
  double s = 0.0, ss = 0.0;
  for (int r = 0; r < reps; ++r) {
    const double z = sampler.draw(rng)[0];
    s += z;
    ss += z * z;
  }
  const double var = (ss - s * s / reps) / (reps - 1);
  EXPECT_NEAR(var, 2.0, 4.0 * 2.0 * std::sqrt(2.0 / reps));
}

TEST(Simulate, PairCovarianceAndIndependence) {
  const CovarianceModel m{CovarianceFamily::spherical, 1.0, 2.0};
  const int reps = 100000;
  for (double distance : {1.0, 2.5}) {
    const GaussianFieldSampler sampler(m, sites_of({{0.0, 0.0}, {distance, 0.0}}));
    RandomStream rng(21);
    double sxy = 0.0, sx = 0.0, sy = 0.0;
    for (int r = 0; r < reps; ++r) {
      const Vec z = sampler.draw(rng);
      sx += z[0];
      sy += z[1];
      sxy += z[0] * z[1];
    }
    const double c = (sxy - sx * sy / reps) / (reps - 1);
    const double target = cov(m, distance);
    EXPECT_NEAR(c, target, 4.0 * std::sqrt(2.0 / reps) * std::sqrt(1.0 + target * target)) << distance;
  }
}

TEST(Simulate, FactorReconstructsCovariance) {
  const Region region(Prototype::unit_cube, 2, 12);
  RandomStream rng(5);
  const auto sites = draw_sites(Design::uniform(), region, 400, rng);
  for (const CovarianceModel m : {CovarianceModel{CovarianceFamily::spherical, 1.0, 2.0},
                                  CovarianceModel{CovarianceFamily::exponential, 3.0, 4.0}}) {
    const GaussianFieldSampler sampler(m, sites);
    EXPECT_LE(sampler.reconstruction_error(), 1e-8 * m.sill);
    const Mat l = sampler.factor();
    EXPECT_LE((l * l.transpose() - cov_matrix(m, sites)).cwiseAbs().maxCoeff(), 1e-8 * m.sill);
  }
}

TEST(Simulate, DuplicateSitesNeedJitter) {
  const CovarianceModel m{CovarianceFamily::spherical, 1.0, 2.0};
  const GaussianFieldSampler sampler(m, sites_of({{1.0, 1.0}, {1.0, 1.0}, {2.0, 1.0}}));
  EXPECT_LE(sampler.reconstruction_error(), 1e-8);
}

TEST(Simulate, EmpiricalCovariancesWithinFiveStandardErrors) {
  const CovarianceModel m{CovarianceFamily::spherical, 1.0, 2.0};
  const Region region(Prototype::unit_cube, 2, 5);
  RandomStream site_rng(8);
  const auto sites = draw_sites(Design::uniform(), region, 50, site_rng);
  const GaussianFieldSampler sampler(m, sites);
  const Mat sigma = cov_matrix(m, sites);
  const int reps = 2000;
  Mat draws(reps, 50);
  RandomStream rng(13);
  for (int r = 0; r < reps; ++r) draws.row(r) = sampler.draw(rng).transpose();
  const Mat centered = draws.rowwise() - draws.colwise().mean();
  const Mat empirical = centered.transpose() * centered / (reps - 1);
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double se = std::sqrt((sigma(i, i) * sigma(j, j) + sigma(i, j) * sigma(i, j)) / reps);
      EXPECT_NEAR(empirical(i, j), sigma(i, j), 5.0 * se) << i << "," << j;
    }
  }
}

TEST(Simulate, DeterministicUnderStream) {
  const CovarianceModel m{CovarianceFamily::exponential, 1.0, 2.0};
  RandomStream site_rng(2);
  const auto sites = draw_sites(Design::uniform(), Region(Prototype::unit_cube, 2, 6), 30, site_rng);
  RandomStream a(77), b(77);
  const Vec za = simulate(m, sites, a);
  const Vec zb = simulate(m, sites, b);
  EXPECT_TRUE((za.array() == zb.array()).all());
}

TEST(Simulate, ZeroSillAndSiteCap) {
  RandomStream rng(1);
  const auto sites = sites_of({{0.0, 0.0}, {1.0, 0.0}});
  EXPECT_TRUE(simulate({CovarianceFamily::spherical, 0.0, 2.0}, sites, rng).isZero(0.0));
  EXPECT_THROW(simulate({CovarianceFamily::spherical, 1.0, 2.0}, sites, rng, 1), NumericError);
}
