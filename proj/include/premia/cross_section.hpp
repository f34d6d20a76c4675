#ifndef PREMIA_CROSS_SECTION_HPP
#define PREMIA_CROSS_SECTION_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "premia/first_pass.hpp"

namespace premia {

enum class SeKind { none, plain, shanken };

std::string to_string(SeKind kind);

/// Point estimate of the risk premia with optional inference fields.
/// lambda_0 is present iff the estimate carries a zero-beta return
/// (FM under intercept_estimated); CUE results never do.
struct PremiaResult {
  std::string method;  // "FM" or "CUE"
  Eigen::VectorXd lambda_f;
  std::optional<double> lambda_0;
  std::optional<Eigen::VectorXd> se_f;
  std::optional<double> se_0;
  std::optional<Eigen::VectorXd> t_f;
  std::optional<double> t_0;
  std::optional<double> r_squared;
  SeKind se_kind = SeKind::none;
};

/// Population counterpart of the estimated model, mu_r = beta lambda_f + e_tilde.
/// a and b are the normalized misspecification and identification directions.
struct PopulationModel {
  Eigen::VectorXd mu_r;
  Eigen::MatrixXd beta;
  Eigen::MatrixXd omega;  // N x N SPD (or PSD)
  Eigen::MatrixXd qff;    // K x K SPD
  Eigen::VectorXd lambda_f;
  Eigen::VectorXd e_tilde;

  long N() const { return beta.rows(); }
  long K() const { return beta.cols(); }
  double beta_magnitude() const { return beta.norm(); }    // O(beta), Frobenius
  double e_magnitude() const { return e_tilde.norm(); }    // O(e~)
  Eigen::MatrixXd b_direction() const;                     // beta / O(beta)
  Eigen::VectorXd a_direction() const;                     // e~ / O(e~)

  /// Rebuild with beta = beta_scale * b, e~ = e_scale * a and consistent mu_r.
  PopulationModel rescaled(double beta_scale, double e_scale) const;

  void check_consistent(double tol = 1e-10) const;
};

/// Second-pass cross-sectional OLS of mean returns on the betas
/// (plus an intercept column under intercept_estimated).
PremiaResult fm_two_pass(const FirstPassEstimates& fp, ZeroBetaMode mode);

/// Attach standard errors, t-statistics and 95% CIs to an FM result.
/// plain: FM asymptotic variance; shanken: multiplicative correction
/// (1 + lambda' qff^-1 lambda) on the residual-covariance part plus qff,
/// applied to the lambda_f block only.
PremiaResult fm_tstats(const FirstPassEstimates& fp, const PremiaResult& result, SeKind kind);

/// Minimizer of the population FM objective: (beta'beta)^-1 beta' mu_r.
Eigen::VectorXd fm_pseudo_true(const PopulationModel& pm);

/// Asset repackaging R -> A R with A invertible and A iota = iota.
PopulationModel repackage(const PopulationModel& pm, const Eigen::MatrixXd& A);
FirstPassEstimates repackage(const FirstPassEstimates& fp, const Eigen::MatrixXd& A);

}  // namespace premia

#endif
