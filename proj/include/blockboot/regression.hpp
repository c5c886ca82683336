#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "blockboot/types.hpp"

namespace blockboot {

/// Score function psi of the estimating equation.
class Score {
 public:
  enum class Kind { identity, pseudo_huber };

  static Score identity() { return Score(Kind::identity, 0.0); }
  /// psi(x) = x / sqrt(1 + (x/k)^2), a smooth Huber-type score.
  static Score pseudo_huber(double k);

  Kind kind() const { return kind_; }
  double k() const { return k_; }
  bool is_identity() const { return kind_ == Kind::identity; }

  double psi(double x) const {
    if (kind_ == Kind::identity) return x;
    const double u = x / k_;
    return x / std::sqrt(1.0 + u * u);
  }
  double psi_prime(double x) const {
    if (kind_ == Kind::identity) return 1.0;
    const double u = x / k_;
    const double q = 1.0 + u * u;
    return 1.0 / (q * std::sqrt(q));
  }

 private:
  Score(Kind kind, double k) : kind_(kind), k_(k) {}
  Kind kind_;
  double k_;
};

Score parse_score(std::string_view name, double k = 1.345);

/// Solves a x = rhs for symmetric positive semidefinite a, or nullopt when the
/// pivots of its LDLT factorization span more than 12 orders of magnitude.
std::optional<Vec> solve_psd(const Mat& a, const Vec& rhs);

/// Built-in weight functions w(s).
struct WeightSpec {
  enum class Kind { intercept_only, intercept_covariates };
  Kind kind = Kind::intercept_only;
  std::size_t covariates = 0;  // q, for intercept_covariates

  static WeightSpec intercept_only() { return {}; }
  static WeightSpec with_covariates(std::size_t q) { return {Kind::intercept_covariates, q}; }
  std::size_t parameters() const { return kind == Kind::intercept_only ? 1 : 1 + covariates; }
};

/// The weight vector at one site. The built-ins depend only on the covariates.
Vec eval_weights(const WeightSpec& spec, std::span<const double> site, std::span<const double> covariates);

/// Observations Y(s_i) = w(s_i)' beta + Z(s_i).
struct Dataset {
  SiteMatrix sites;
  Mat weights;  // n x p, row i is w(s_i)'
  Vec y;
  double lambda = 1.0;
  int dim = 1;

  std::size_t size() const { return static_cast<std::size_t>(y.size()); }
  std::size_t parameters() const { return static_cast<std::size_t>(weights.cols()); }
  void validate() const;
};

/// Assembles W from per-site covariate rows (n x q) through a weight spec.
Mat weight_matrix(const WeightSpec& spec, const SiteMatrix& sites, const Mat& covariates);

struct FitResult {
  Vec beta_hat;
  Vec residuals;
  Mat gram;        // n^{-1} sum w w'
  Mat normalizer;  // lambda^{d/2} gram^{1/2}
  double chi0_hat = 1.0;
  int iterations = 0;
  double step_norm = 0.0;
};

/// Solves sum_i w(s_i) psi(Y(s_i) - w(s_i)' t) = 0.
///
/// The identity score is solved exactly through the normal equations. Other
/// scores use damped Newton from the least-squares solution (step max-norm
/// below 1e-10, at most 50 iterations).
FitResult fit(const Dataset& data, const Score& score);

/// n^{-1} sum psi'(Z_hat(s_i)).
double mean_psi_prime(const FitResult& fit, const Score& score);

/// Symmetric square root of a symmetric positive definite matrix.
Mat symmetric_sqrt(const Mat& m);

struct NewtonOptions {
  double step_tolerance = 1e-10;
  int max_iterations = 50;
};

struct NewtonResult {
  Vec t;
  int iterations = 0;
  double step_norm = 0.0;
  bool converged = false;
};

/// Damped Newton for sum_i w_i psi(y_i - w_i' t) - shift = 0, started at t0.
NewtonResult solve_m_equation(const Mat& w, const Vec& y, const Vec& shift, const Score& score, const Vec& t0,
                              NewtonOptions options = {});

}  // namespace blockboot
