#ifndef PREMIA_FIRST_PASS_HPP
#define PREMIA_FIRST_PASS_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "premia/panel.hpp"

namespace premia {

/// Time-series OLS moments every downstream statistic consumes:
///   beta  = sum R~_t F~_t' (sum F~_t F~_t')^-1     (~ = demeaned)
///   omega = (1/T) sum u_t u_t',  u_t = R~_t - beta F~_t
///   qff   = (1/T) sum F~_t F~_t'
struct FirstPassEstimates {
  Eigen::MatrixXd beta;         // N x K
  Eigen::MatrixXd omega;        // N x N, symmetric PSD
  Eigen::MatrixXd qff;          // K x K, symmetric PD
  Eigen::VectorXd mu;           // N, sample mean of returns
  Eigen::VectorXd fbar;         // K, sample mean of factors
  long T = 0;
  Eigen::MatrixXd beta_tstats;  // N x K, per-equation OLS t-statistics
  std::vector<std::string> asset_names;
  std::vector<std::string> factor_names;

  long N() const { return beta.rows(); }
  long K() const { return beta.cols(); }
};

FirstPassEstimates estimate_first_pass(const AlignedDataset& ds);

struct BetaTableRow {
  std::string asset;
  std::vector<double> beta;
  std::vector<double> tstat;  // +/-inf when the equation has zero residual
};

/// N rows of (beta, t) pairs per factor, in input asset order.
std::vector<BetaTableRow> beta_significance_table(const FirstPassEstimates& fp);

/// First-pass estimates of the differenced assets R_i - R_ref, derived
/// from the undifferenced estimates (differencing is linear in returns).
FirstPassEstimates difference_against(const FirstPassEstimates& fp, long ref_index);

}  // namespace premia

#endif
