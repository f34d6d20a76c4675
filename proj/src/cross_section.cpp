#include "premia/cross_section.hpp"

#include <cmath>
#include <limits>

#include "premia/errors.hpp"

namespace premia {

std::string to_string(SeKind kind) {
  switch (kind) {
    case SeKind::none: return "none";
    case SeKind::plain: return "plain";
    case SeKind::shanken: return "shanken";
  }
  return "?";
}

Eigen::MatrixXd PopulationModel::b_direction() const {
  const double o = beta_magnitude();
  if (o == 0.0) throw DegeneracyError("beta direction undefined: beta is zero");
  return beta / o;
}

Eigen::VectorXd PopulationModel::a_direction() const {
  const double o = e_magnitude();
  if (o == 0.0) throw DegeneracyError("e direction undefined: e_tilde is zero");
  return e_tilde / o;
}

PopulationModel PopulationModel::rescaled(double beta_scale, double e_scale) const {
  PopulationModel out = *this;
  out.beta = beta_scale * b_direction();
  out.e_tilde = e_scale == 0.0 ? Eigen::VectorXd::Zero(N()).eval()
                               : (e_scale * a_direction()).eval();
  out.mu_r = out.beta * lambda_f + out.e_tilde;
  return out;
}

void PopulationModel::check_consistent(double tol) const {
  const double gap = (mu_r - beta * lambda_f - e_tilde).norm();
  if (gap > tol * (1.0 + mu_r.norm()))
    throw ValidationError("inconsistent population model: mu_r != beta lambda + e");
}

namespace {

// Report which two regressor columns are closest to collinear.
std::string collinear_pair(const Eigen::MatrixXd& X, const std::vector<std::string>& names) {
  long bi = 0, bj = 1;
  double best = -1.0;
  for (long i = 0; i < X.cols(); ++i)
    for (long j = i + 1; j < X.cols(); ++j) {
      const double ni = X.col(i).norm(), nj = X.col(j).norm();
      if (ni == 0.0 || nj == 0.0) return names[static_cast<std::size_t>(ni == 0.0 ? i : j)] + " (zero column)";
      const double c = std::fabs(X.col(i).dot(X.col(j))) / (ni * nj);
      if (c > best) {
        best = c;
        bi = i;
        bj = j;
      }
    }
  return names[static_cast<std::size_t>(bi)] + " and " + names[static_cast<std::size_t>(bj)];
}

struct SecondPassDesign {
  Eigen::MatrixXd X;                // N x p regressors
  bool has_intercept = false;
  std::vector<std::string> names;   // p column labels
};

SecondPassDesign build_design(const FirstPassEstimates& fp, ZeroBetaMode mode) {
  SecondPassDesign d;
  const long N = fp.N();
  const long K = fp.K();
  d.has_intercept = (mode == ZeroBetaMode::intercept_estimated);
  const long p = K + (d.has_intercept ? 1 : 0);
  d.X.resize(N, p);
  long c = 0;
  if (d.has_intercept) {
    d.X.col(c++) = Eigen::VectorXd::Ones(N);
    d.names.push_back("intercept");
  }
  for (long k = 0; k < K; ++k) {
    d.X.col(c++) = fp.beta.col(k);
    d.names.push_back(k < static_cast<long>(fp.factor_names.size())
                          ? fp.factor_names[static_cast<std::size_t>(k)]
                          : "factor" + std::to_string(k + 1));
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(d.X);
  const auto& s = svd.singularValues();
  if (!(s(s.size() - 1) > 1e-10 * s(0)))
    throw DegeneracyError("rank-deficient cross-section regressors: " +
                          collinear_pair(d.X, d.names));
  return d;
}

}  // namespace

PremiaResult fm_two_pass(const FirstPassEstimates& fp, ZeroBetaMode mode) {
  const auto d = build_design(fp, mode);
  const Eigen::VectorXd coef = (d.X.transpose() * d.X).ldlt().solve(d.X.transpose() * fp.mu);

  PremiaResult r;
  r.method = "FM";
  const long K = fp.K();
  if (d.has_intercept) {
    r.lambda_0 = coef(0);
    r.lambda_f = coef.tail(K);
  } else {
    r.lambda_f = coef;
  }

  const Eigen::VectorXd fitted = d.X * coef;
  const Eigen::VectorXd resid = fp.mu - fitted;
  const double mean_mu = fp.mu.mean();
  const double sst = (fp.mu.array() - mean_mu).matrix().squaredNorm();
  const double ssr = resid.squaredNorm();
  r.r_squared = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
  return r;
}

PremiaResult fm_tstats(const FirstPassEstimates& fp, const PremiaResult& result, SeKind kind) {
  if (result.method != "FM")
    throw ValidationError("fm_tstats requires an FM result");
  if (kind == SeKind::none) {
    PremiaResult r = result;
    r.se_kind = SeKind::none;
    return r;
  }
  const ZeroBetaMode mode =
      result.lambda_0 ? ZeroBetaMode::intercept_estimated : ZeroBetaMode::imposed_zero;
  const auto d = build_design(fp, mode);
  const long K = fp.K();
  const long p = d.X.cols();
  const double T = static_cast<double>(fp.T);

  const Eigen::MatrixXd xtx_inv = (d.X.transpose() * d.X).inverse();
  const Eigen::MatrixXd H = xtx_inv * d.X.transpose();  // p x N

  // Plain FM variance: sample covariance of the per-period cross-section
  // estimates; cov(R_t) = omega + beta qff beta' by the OLS decomposition.
  const Eigen::MatrixXd cov_r = fp.omega + fp.beta * fp.qff * fp.beta.transpose();
  const Eigen::MatrixXd var_plain = (H * cov_r * H.transpose()) / T;

  Eigen::MatrixXd var_f(K, K);
  double var_0 = 0.0;
  const long off = d.has_intercept ? 1 : 0;
  if (kind == SeKind::plain) {
    var_f = var_plain.block(off, off, K, K);
    if (d.has_intercept) var_0 = var_plain(0, 0);
  } else {
    // Shanken correction on the lambda_f block; the intercept keeps its
    // plain standard error.
    const Eigen::MatrixXd w = H * fp.omega * H.transpose();
    const double c = result.lambda_f.dot(fp.qff.inverse() * result.lambda_f);
    var_f = (w.block(off, off, K, K) * (1.0 + c) + fp.qff) / T;
    if (d.has_intercept) var_0 = var_plain(0, 0);
  }

  PremiaResult r = result;
  r.se_kind = kind;
  Eigen::VectorXd se(K), t(K);
  for (long k = 0; k < K; ++k) {
    se(k) = std::sqrt(std::max(var_f(k, k), 0.0));
    t(k) = se(k) > 0.0 ? result.lambda_f(k) / se(k)
                       : std::copysign(std::numeric_limits<double>::infinity(),
                                       result.lambda_f(k));
  }
  r.se_f = se;
  r.t_f = t;
  if (d.has_intercept) {
    r.se_0 = std::sqrt(std::max(var_0, 0.0));
    r.t_0 = *r.se_0 > 0.0 ? *result.lambda_0 / *r.se_0
                          : std::copysign(std::numeric_limits<double>::infinity(),
                                          *result.lambda_0);
  }
  return r;
}

Eigen::VectorXd fm_pseudo_true(const PopulationModel& pm) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(pm.beta);
  const auto& s = svd.singularValues();
  if (!(s(s.size() - 1) > 1e-10 * s(0)))
    throw DegeneracyError("fm_pseudo_true: beta is rank deficient");
  return (pm.beta.transpose() * pm.beta).ldlt().solve(pm.beta.transpose() * pm.mu_r);
}

namespace {

void check_repackaging(const Eigen::MatrixXd& A, long N) {
  if (A.rows() != N || A.cols() != N)
    throw ValidationError("repackaging matrix has wrong shape");
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(N);
  if (((A * ones) - ones).lpNorm<Eigen::Infinity>() > 1e-8)
    throw ValidationError("repackaging matrix must satisfy A iota = iota");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& s = svd.singularValues();
  if (!(s(s.size() - 1) > 1e-10 * s(0)) || s(0) / s(s.size() - 1) > 1e10)
    throw DegeneracyError("repackaging matrix is singular or badly conditioned");
}

}  // namespace

PopulationModel repackage(const PopulationModel& pm, const Eigen::MatrixXd& A) {
  check_repackaging(A, pm.N());
  PopulationModel out = pm;
  out.mu_r = A * pm.mu_r;
  out.beta = A * pm.beta;
  out.omega = A * pm.omega * A.transpose();
  out.omega = 0.5 * (out.omega + out.omega.transpose());
  out.e_tilde = A * pm.e_tilde;
  return out;
}

FirstPassEstimates repackage(const FirstPassEstimates& fp, const Eigen::MatrixXd& A) {
  check_repackaging(A, fp.N());
  FirstPassEstimates out = fp;
  out.mu = A * fp.mu;
  out.beta = A * fp.beta;
  out.omega = A * fp.omega * A.transpose();
  out.omega = 0.5 * (out.omega + out.omega.transpose());
  // t-statistics follow the transformed per-equation residual variances
  const Eigen::MatrixXd qinv = fp.qff.inverse();
  const double dof = static_cast<double>(fp.T - fp.K() - 1);
  for (long i = 0; i < out.N(); ++i) {
    const double sigma2 = out.omega(i, i) * static_cast<double>(fp.T) / dof;
    for (long k = 0; k < out.K(); ++k) {
      const double var = sigma2 * qinv(k, k) / static_cast<double>(fp.T);
      out.beta_tstats(i, k) = var > 0.0 ? out.beta(i, k) / std::sqrt(var)
                                        : std::copysign(std::numeric_limits<double>::infinity(),
                                                        out.beta(i, k));
    }
  }
  return out;
}

}  // namespace premia
