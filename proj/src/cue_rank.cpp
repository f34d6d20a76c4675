#include "premia/cue_rank.hpp"

#include <cmath>
#include <string>

#include "premia/chi_square.hpp"
#include "premia/errors.hpp"

namespace premia {

Eigen::MatrixXd checked_spd_inverse(const Eigen::MatrixXd& S, const char* what,
                                    double max_condition) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const auto& ev = es.eigenvalues();
  const double lmin = ev.minCoeff();
  const double lmax = ev.maxCoeff();
  if (!(lmin > 0.0) || lmax / lmin > max_condition)
    throw DegeneracyError(std::string("singular or near-singular ") + what +
                          " (eigenvalue range [" + std::to_string(lmin) + ", " +
                          std::to_string(lmax) + "])");
  return es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

FirstPassEstimates effective_first_pass(const FirstPassEstimates& fp, ZeroBetaMode mode) {
  if (mode != ZeroBetaMode::intercept_estimated) return fp;
  return difference_against(fp, fp.N() - 1);
}

namespace {

EigenSolution bordered_pencil(const FirstPassEstimates& e) {
  const long K = e.K();
  const Eigen::MatrixXd omega_inv = checked_spd_inverse(e.omega, "residual covariance");
  Eigen::MatrixXd G(e.N(), K + 1);
  G.col(0) = e.mu;
  G.rightCols(K) = e.beta;
  Eigen::MatrixXd M = G.transpose() * omega_inv * G;
  M = 0.5 * (M + M.transpose());
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(K + 1, K + 1);
  D(0, 0) = 1.0;
  D.bottomRightCorner(K, K) = checked_spd_inverse(e.qff, "factor covariance");
  return solve_pencil(M, D);
}

}  // namespace

JStatResult j_statistic(const FirstPassEstimates& fp, ZeroBetaMode mode) {
  const FirstPassEstimates e = effective_first_pass(fp, mode);
  JStatResult r;
  r.n_effective = e.N();
  r.eig = bordered_pencil(e);
  r.j = static_cast<double>(e.T) * r.eig.smallest_root;
  r.df = static_cast<int>(e.N() - e.K());
  if (r.df <= 0) throw ValidationError("J statistic needs more assets than factors");
  r.p = chi2_pvalue(r.j, r.df);
  return r;
}

IsStatResult is_statistic(const FirstPassEstimates& fp, ZeroBetaMode mode) {
  const FirstPassEstimates e = effective_first_pass(fp, mode);
  IsStatResult r;
  r.n_effective = e.N();
  const Eigen::MatrixXd omega_inv = checked_spd_inverse(e.omega, "residual covariance");
  Eigen::MatrixXd M = e.beta.transpose() * omega_inv * e.beta;
  M = 0.5 * (M + M.transpose());
  const Eigen::MatrixXd D = checked_spd_inverse(e.qff, "factor covariance");
  const EigenSolution sol = solve_pencil(M, D);
  r.is = static_cast<double>(e.T) * sol.smallest_root;
  r.df = static_cast<int>(e.N() - e.K() + 1);
  if (r.df <= 0) throw ValidationError("IS statistic needs more assets than factors");
  r.p = chi2_pvalue(r.is, r.df);
  return r;
}

DiagnosticPair j_is_pair(const FirstPassEstimates& fp, ZeroBetaMode mode) {
  const auto j = j_statistic(fp, mode);
  const auto is = is_statistic(fp, mode);
  DiagnosticPair d;
  d.j_stat = j.j;
  d.is_stat = is.is;
  d.df_j = j.df;
  d.df_is = is.df;
  d.p_j = j.p;
  d.p_is = is.p;
  return d;
}

namespace {

Eigen::VectorXd premia_from_eigvec(const Eigen::VectorXd& v) {
  const long K = v.size() - 1;
  if (std::fabs(v(0)) <= 1e-8 * v.norm())
    throw DegeneracyError(
        "CUE unbounded / premia not identified: smallest-root eigenvector has "
        "near-zero first component");
  return (-v.tail(K) / v(0)).eval();
}

}  // namespace

PremiaResult cue_estimate(const FirstPassEstimates& fp, ZeroBetaMode mode) {
  const auto j = j_statistic(fp, mode);
  PremiaResult r;
  r.method = "CUE";
  r.lambda_f = premia_from_eigvec(j.eig.eigvec);
  r.se_kind = SeKind::none;
  return r;
}

std::pair<Eigen::VectorXd, double> cue_pseudo_true(const PopulationModel& pm) {
  const long K = pm.K();
  const Eigen::MatrixXd omega_inv = checked_spd_inverse(pm.omega, "population omega");
  Eigen::MatrixXd G(pm.N(), K + 1);
  G.col(0) = pm.mu_r;
  G.rightCols(K) = pm.beta;
  Eigen::MatrixXd M = G.transpose() * omega_inv * G;
  M = 0.5 * (M + M.transpose());
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(K + 1, K + 1);
  D(0, 0) = 1.0;
  D.bottomRightCorner(K, K) = checked_spd_inverse(pm.qff, "population qff");
  const EigenSolution sol = solve_pencil(M, D);
  return {premia_from_eigvec(sol.eigvec), sol.smallest_root};
}

}  // namespace premia
