#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>

#include "blockboot/random.hpp"
#include "blockboot/region.hpp"
#include "blockboot/types.hpp"

namespace blockboot {

enum class DesignKind { uniform, normal_mixture, strip };

DesignKind parse_design_kind(std::string_view name);
std::string_view to_string(DesignKind kind);

/// Two isotropic bivariate normals, truncated to the prototype square.
struct MixtureParams {
  std::array<double, 2> mean1{0.0, 0.0};
  std::array<double, 2> mean2{0.25, 0.25};
  double var1 = 1.0;
  double var2 = 2.0;
  double weight1 = 0.5;
};

/// Sampling density f on the prototype region, expressed in the centered
/// frame (-1/2, 1/2]^d (cube) or the ball of radius 1/2 at the origin (disk).
class Design {
 public:
  static Design uniform(Prototype prototype = Prototype::unit_cube, int dim = 2);
  static Design normal_mixture(MixtureParams params = {});
  /// Counterexample density f_a(x1, x2) = g_a(x1) on the unit square, a > 4.
  static Design strip(double a);

  DesignKind kind() const { return kind_; }
  Prototype prototype() const { return prototype_; }
  int dim() const { return dim_; }
  double strip_a() const { return a_; }
  const MixtureParams& mixture() const { return mixture_; }
  /// Mass of the untruncated mixture inside the prototype square.
  double mixture_mass() const { return mixture_mass_; }

  /// g_a and its distribution function on (-1/2, 1/2).
  double strip_marginal(double x1) const;
  double strip_cdf(double x1) const;
  double strip_quantile(double u) const;

  /// Untruncated mixture density.
  double mixture_raw(std::span<const double> x) const;

 private:
  Design(DesignKind kind, Prototype prototype, int dim) : kind_(kind), prototype_(prototype), dim_(dim) {}

  double strip_half_cdf(double t) const;     // integral of g_a over (0, t)
  double strip_half_quantile(double m) const;  // inverse of strip_half_cdf

  DesignKind kind_;
  Prototype prototype_;
  int dim_;
  double a_ = 0.0;
  MixtureParams mixture_{};
  double mixture_mass_ = 1.0;
};

/// True when x lies in the closed centered prototype.
bool in_prototype(Prototype prototype, std::span<const double> x);

/// f(x) for x in the centered prototype frame.
double density(const Design& design, std::span<const double> x);

/// Integral of f^power over the prototype, power in {1, 2, 3}.
double density_moment(const Design& design, int power);

/// n sites s_i = lambda * x_i with x_i ~ f, in the anchored region frame.
SiteMatrix draw_sites(const Design& design, const Region& region, std::size_t n, RandomStream& rng);

}  // namespace blockboot
