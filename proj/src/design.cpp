#include "blockboot/design.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace blockboot {

DesignKind parse_design_kind(std::string_view name) {
  if (name == "uniform") return DesignKind::uniform;
  if (name == "normal-mixture" || name == "mixture") return DesignKind::normal_mixture;
  if (name == "strip" || name == "strip-counterexample") return DesignKind::strip;
  throw ConfigError("unknown design kind '" + std::string(name) + "'");
}

std::string_view to_string(DesignKind kind) {
  switch (kind) {
    case DesignKind::uniform: return "uniform";
    case DesignKind::normal_mixture: return "normal-mixture";
    case DesignKind::strip: return "strip";
  }
  return "?";
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double prototype_volume(Prototype prototype, int dim) {
  return prototype == Prototype::unit_cube ? 1.0 : unit_disk_volume(dim);
}

// Composite 5-point Gauss-Legendre on [-1/2, 1/2]^2 with m x m panels.
template <typename F>
double square_quadrature(F&& f, int m) {
  static constexpr std::array<double, 5> node{0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                              0.9061798459386640};
  static constexpr std::array<double, 5> weight{0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                                0.2369268850561891, 0.2369268850561891};
  const double h = 1.0 / m;
  double total = 0.0;
  std::array<double, 2> x{};
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const double ci = -0.5 + (i + 0.5) * h;
      const double cj = -0.5 + (j + 0.5) * h;
      for (std::size_t a = 0; a < node.size(); ++a) {
        x[0] = ci + 0.5 * h * node[a];
        for (std::size_t b = 0; b < node.size(); ++b) {
          x[1] = cj + 0.5 * h * node[b];
          total += weight[a] * weight[b] * f(std::span<const double>(x));
        }
      }
    }
  }
  return total * 0.25 * h * h;
}

}  // namespace

bool in_prototype(Prototype prototype, std::span<const double> x) {
  constexpr double tol = 1e-12;
  if (prototype == Prototype::unit_cube) {
    for (double v : x) {
      if (v < -0.5 - tol || v > 0.5 + tol) return false;
    }
    return true;
  }
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return std::sqrt(r2) <= 0.5 + tol;
}

Design Design::uniform(Prototype prototype, int dim) {
  if (dim < 1) throw std::invalid_argument("uniform design: dimension must be >= 1");
  return Design(DesignKind::uniform, prototype, dim);
}

Design Design::normal_mixture(MixtureParams params) {
  if (!(params.var1 > 0.0) || !(params.var2 > 0.0)) throw std::invalid_argument("mixture variances must be positive");
  if (!(params.weight1 >= 0.0 && params.weight1 <= 1.0)) throw std::invalid_argument("mixture weight must lie in [0, 1]");
  Design d(DesignKind::normal_mixture, Prototype::unit_cube, 2);
  d.mixture_ = params;
  auto component_mass = [](const std::array<double, 2>& mean, double var) {
    const double sd = std::sqrt(var);
    double mass = 1.0;
    for (double mu : mean) mass *= normal_cdf((0.5 - mu) / sd) - normal_cdf((-0.5 - mu) / sd);
    return mass;
  };
  d.mixture_mass_ = params.weight1 * component_mass(params.mean1, params.var1) +
                    (1.0 - params.weight1) * component_mass(params.mean2, params.var2);
  return d;
}

Design Design::strip(double a) {
  if (!(a > 4.0)) throw std::invalid_argument("strip design requires a > 4");
  Design d(DesignKind::strip, Prototype::unit_cube, 2);
  d.a_ = a;
  return d;
}

double Design::strip_marginal(double x1) const {
  const double a = a_;
  const double t = std::abs(x1);
  const double high = a / 4.0;
  const double low = a / (4.0 * (a - 3.0));
  if (t < 1.0 / a) return high;
  if (t < 2.0 / a) return high + (low - high) * (t - 1.0 / a) * a;
  if (t <= 0.5) return low;
  return 0.0;
}

double Design::strip_half_cdf(double t) const {
  const double a = a_;
  const double high = a / 4.0;
  const double low = a / (4.0 * (a - 3.0));
  if (t <= 1.0 / a) return high * t;
  const double core = high / a;
  if (t <= 2.0 / a) {
    const double y = t - 1.0 / a;
    return core + high * y + 0.5 * (low - high) * a * y * y;
  }
  const double ramp = (high + low) / (2.0 * a);
  return core + ramp + low * (std::min(t, 0.5) - 2.0 / a);
}

double Design::strip_half_quantile(double m) const {
  const double a = a_;
  const double high = a / 4.0;
  const double low = a / (4.0 * (a - 3.0));
  const double core = high / a;
  if (m <= core) return m / high;
  const double ramp = (high + low) / (2.0 * a);
  if (m <= core + ramp) {
    // Solve c y^2 + high y - r = 0 on the linear ramp (c < 0); stable root form.
    const double r = m - core;
    const double c = 0.5 * (low - high) * a;
    const double disc = std::max(0.0, high * high + 4.0 * c * r);
    return 1.0 / a + 2.0 * r / (high + std::sqrt(disc));
  }
  return 2.0 / a + (m - core - ramp) / low;
}

double Design::strip_cdf(double x1) const {
  if (x1 <= -0.5) return 0.0;
  if (x1 >= 0.5) return 1.0;
  return x1 >= 0.0 ? 0.5 + strip_half_cdf(x1) : 0.5 - strip_half_cdf(-x1);
}

double Design::strip_quantile(double u) const {
  if (u >= 0.5) return std::min(0.5, strip_half_quantile(u - 0.5));
  return -std::min(0.5, strip_half_quantile(0.5 - u));
}

double Design::mixture_raw(std::span<const double> x) const {
  auto component = [&](const std::array<double, 2>& mean, double var) {
    const double dx = x[0] - mean[0];
    const double dy = x[1] - mean[1];
    return std::exp(-(dx * dx + dy * dy) / (2.0 * var)) / (2.0 * std::numbers::pi * var);
  };
  return mixture_.weight1 * component(mixture_.mean1, mixture_.var1) +
         (1.0 - mixture_.weight1) * component(mixture_.mean2, mixture_.var2);
}

double density(const Design& design, std::span<const double> x) {
  if (static_cast<int>(x.size()) != design.dim()) throw std::invalid_argument("density: point dimension mismatch");
  if (!in_prototype(design.prototype(), x)) throw std::invalid_argument("density: point outside the prototype region");
  switch (design.kind()) {
    case DesignKind::uniform: return 1.0 / prototype_volume(design.prototype(), design.dim());
    case DesignKind::normal_mixture: return design.mixture_raw(x) / design.mixture_mass();
    case DesignKind::strip: return design.strip_marginal(x[0]);
  }
  return 0.0;
}

double density_moment(const Design& design, int power) {
  if (power < 1 || power > 3) throw std::invalid_argument("density_moment: power must be 1, 2 or 3");
  switch (design.kind()) {
    case DesignKind::uniform: return std::pow(prototype_volume(design.prototype(), design.dim()), 1 - power);
    case DesignKind::strip: {
      const double a = design.strip_a();
      const double high = a / 4.0;
      const double low = a / (4.0 * (a - 3.0));
      const double core = 2.0 * std::pow(high, power) / a;
      const double ramp = 2.0 / a * (std::pow(low, power + 1) - std::pow(high, power + 1)) / ((power + 1) * (low - high));
      const double outer = 2.0 * std::pow(low, power) * (0.5 - 2.0 / a);
      return core + ramp + outer;
    }
    case DesignKind::normal_mixture: {
      auto integrand = [&](std::span<const double> x) { return std::pow(design.mixture_raw(x) / design.mixture_mass(), power); };
      double previous = square_quadrature(integrand, 2);
      for (int m = 4; m <= 256; m *= 2) {
        const double current = square_quadrature(integrand, m);
        if (std::abs(current - previous) < 1e-12) return current;
        previous = current;
      }
      return previous;
    }
  }
  return 0.0;
}

SiteMatrix draw_sites(const Design& design, const Region& region, std::size_t n, RandomStream& rng) {
  if (design.prototype() != region.prototype() || design.dim() != region.dim()) {
    throw std::invalid_argument("draw_sites: design is not defined on the region's prototype");
  }
  const int dim = region.dim();
  const double lambda = region.lambda();
  SiteMatrix sites(static_cast<Eigen::Index>(n), dim);
  std::size_t attempts = 0;
  std::size_t accepted = 0;
  auto guard = [&] {
    if (attempts > 1000 && static_cast<double>(accepted) < 1e-3 * static_cast<double>(attempts)) {
      throw NumericError("draw_sites: rejection acceptance rate below 1e-3, design is misconfigured");
    }
  };
  std::vector<double> x(static_cast<std::size_t>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    switch (design.kind()) {
      case DesignKind::uniform:
        while (true) {
          ++attempts;
          for (auto& v : x) v = uniform01(rng) - 0.5;
          if (design.prototype() == Prototype::unit_cube || in_prototype(Prototype::unit_disk, x)) break;
          guard();
        }
        break;
      case DesignKind::normal_mixture: {
        const auto& p = design.mixture();
        while (true) {
          ++attempts;
          const bool first = uniform01(rng) < p.weight1;
          const auto& mean = first ? p.mean1 : p.mean2;
          const double sd = std::sqrt(first ? p.var1 : p.var2);
          x[0] = mean[0] + sd * standard_normal(rng);
          x[1] = mean[1] + sd * standard_normal(rng);
          if (x[0] > -0.5 && x[0] <= 0.5 && x[1] > -0.5 && x[1] <= 0.5) break;
          guard();
        }
        break;
      }
      case DesignKind::strip:
        ++attempts;
        x[0] = design.strip_quantile(uniform01(rng));
        x[1] = uniform01(rng) - 0.5;
        break;
    }
    ++accepted;
    for (int c = 0; c < dim; ++c) sites(static_cast<Eigen::Index>(i), c) = lambda * (x[c] + 0.5);
  }
  return sites;
}

}  // namespace blockboot
