#include "blockboot/regression.hpp"

#include <cmath>
#include <string>

namespace blockboot {

Score Score::pseudo_huber(double k) {
  if (!(k > 0.0)) throw std::invalid_argument("pseudo-huber score requires k > 0");
  return Score(Kind::pseudo_huber, k);
}

Score parse_score(std::string_view name, double k) {
  if (name == "identity") return Score::identity();
  if (name == "pseudo-huber" || name == "huber") return Score::pseudo_huber(k);
  throw ConfigError("unknown score '" + std::string(name) + "'");
}

Vec eval_weights(const WeightSpec& spec, std::span<const double> /*site*/, std::span<const double> covariates) {
  const std::size_t expected = spec.kind == WeightSpec::Kind::intercept_only ? 0 : spec.covariates;
  if (covariates.size() != expected) {
    throw std::invalid_argument("eval_weights: expected " + std::to_string(expected) + " covariates, got " +
                                std::to_string(covariates.size()));
  }
  Vec w(static_cast<Eigen::Index>(spec.parameters()));
  w[0] = 1.0;
  for (std::size_t j = 0; j < expected; ++j) w[static_cast<Eigen::Index>(j + 1)] = covariates[j];
  return w;
}

Mat weight_matrix(const WeightSpec& spec, const SiteMatrix& sites, const Mat& covariates) {
  const Eigen::Index n = sites.rows();
  Mat w(n, static_cast<Eigen::Index>(spec.parameters()));
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec row = covariates.cols() > 0 ? Vec(covariates.row(i).transpose()) : Vec();
    w.row(i) = eval_weights(spec, site_at(sites, i), {row.data(), static_cast<std::size_t>(row.size())}).transpose();
  }
  return w;
}

void Dataset::validate() const {
  if (weights.rows() != y.size() || sites.rows() != y.size()) {
    throw DataError("dataset row counts disagree (sites " + std::to_string(sites.rows()) + ", weights " +
                    std::to_string(weights.rows()) + ", responses " + std::to_string(y.size()) + ")");
  }
  if (weights.cols() < 1) throw DataError("dataset needs at least one weight component");
  if (!weights.allFinite() || !y.allFinite()) throw DataError("dataset contains non-finite values");
  if (sites.rows() > 0 && sites.cols() != dim) throw DataError("site dimension disagrees with region dimension");
}

Mat symmetric_sqrt(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(m);
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

namespace {

Vec score_sum(const Mat& w, const Vec& y, const Vec& t, const Score& score) {
  const Vec r = y - w * t;
  Vec out = Vec::Zero(w.cols());
  for (Eigen::Index i = 0; i < w.rows(); ++i) out.noalias() += w.row(i).transpose() * score.psi(r[i]);
  return out;
}

}  // namespace

std::optional<Vec> solve_psd(const Mat& a, const Vec& rhs) {
  // Eigen's LDLT::rcond() is not reliable for exactly singular input, so the
  // pivot spread is used instead.
  Eigen::LDLT<Mat> ldlt(a);
  if (ldlt.info() != Eigen::Success) return std::nullopt;
  const Vec d = ldlt.vectorD();
  const double top = d.cwiseAbs().maxCoeff();
  if (!(d.minCoeff() > 1e-12 * top)) return std::nullopt;
  return Vec(ldlt.solve(rhs));
}

NewtonResult solve_m_equation(const Mat& w, const Vec& y, const Vec& shift, const Score& score, const Vec& t0,
                              NewtonOptions options) {
  NewtonResult result{t0, 0, 0.0, false};
  Vec g = score_sum(w, y, result.t, score) - shift;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    const Vec r = y - w * result.t;
    Mat jac = Mat::Zero(w.cols(), w.cols());
    for (Eigen::Index i = 0; i < w.rows(); ++i) jac.noalias() += score.psi_prime(r[i]) * w.row(i).transpose() * w.row(i);
    const auto solved = solve_psd(jac, g);
    if (!solved) break;
    const Vec& step = *solved;
    // Halve the step until the estimating-equation residual decreases.
    double scale = 1.0;
    Vec candidate = result.t + step;
    Vec g_new = score_sum(w, y, candidate, score) - shift;
    for (int halving = 0; halving < 30 && g_new.squaredNorm() > g.squaredNorm(); ++halving) {
      scale *= 0.5;
      candidate = result.t + scale * step;
      g_new = score_sum(w, y, candidate, score) - shift;
    }
    result.t = candidate;
    g = g_new;
    result.iterations = iter;
    result.step_norm = (scale * step).cwiseAbs().maxCoeff();
    if (result.step_norm < options.step_tolerance) {
      result.converged = true;
      break;
    }
  }
  return result;
}

FitResult fit(const Dataset& data, const Score& score) {
  data.validate();
  const auto n = static_cast<double>(data.size());
  if (data.size() == 0) throw DataError("fit: empty dataset");
  const Mat& w = data.weights;
  FitResult out;
  out.gram = (w.transpose() * w) / n;

  Eigen::SelfAdjointEigenSolver<Mat> eig(out.gram);
  const double top = eig.eigenvalues().maxCoeff();
  const double bottom = eig.eigenvalues().minCoeff();
  if (!(bottom > 0.0) || top / bottom > 1e12) {
    throw NumericError("fit: weight Gram matrix is singular (condition number above 1e12)");
  }

  const Vec ols = (w.transpose() * w).ldlt().solve(w.transpose() * data.y);
  if (score.is_identity()) {
    out.beta_hat = ols;
  } else {
    const NewtonResult newton = solve_m_equation(w, data.y, Vec::Zero(w.cols()), score, ols);
    if (!newton.converged) {
      std::string last;
      for (Eigen::Index j = 0; j < newton.t.size(); ++j) last += (j ? ", " : "") + std::to_string(newton.t[j]);
      throw NumericError("fit: Newton iteration did not converge (last iterate [" + last + "], step norm " +
                         std::to_string(newton.step_norm) + ")");
    }
    out.beta_hat = newton.t;
    out.iterations = newton.iterations;
    out.step_norm = newton.step_norm;
  }
  out.residuals = data.y - w * out.beta_hat;
  out.normalizer = std::pow(data.lambda, data.dim / 2.0) *
                   (eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose());
  double total = 0.0;
  for (Eigen::Index i = 0; i < out.residuals.size(); ++i) total += score.psi_prime(out.residuals[i]);
  out.chi0_hat = total / n;
  return out;
}

double mean_psi_prime(const FitResult& fit, const Score& score) {
  if (score.is_identity()) return 1.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < fit.residuals.size(); ++i) total += score.psi_prime(fit.residuals[i]);
  const double value = total / static_cast<double>(fit.residuals.size());
  if (std::abs(value) < 1e-8) throw NumericError("mean_psi_prime: degenerate score (mean derivative is zero)");
  return value;
}

}  // namespace blockboot
