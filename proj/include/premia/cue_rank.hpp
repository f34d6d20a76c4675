#ifndef PREMIA_CUE_RANK_HPP
#define PREMIA_CUE_RANK_HPP

#include <Eigen/Dense>
#include <utility>

#include "premia/cross_section.hpp"
#include "premia/first_pass.hpp"
#include "premia/pencil.hpp"

namespace premia {

/// Misspecification and identification diagnostics with their chi-square
/// reference distributions. j_stat <= is_stat always (interlacing).
struct DiagnosticPair {
  double j_stat = 0.0;
  double is_stat = 0.0;
  int df_j = 0;
  int df_is = 0;
  double p_j = 1.0;
  double p_is = 1.0;
};

struct JStatResult {
  double j = 0.0;
  int df = 0;
  double p = 1.0;
  long n_effective = 0;  // asset count after any internal differencing
  EigenSolution eig;
};

struct IsStatResult {
  double is = 0.0;
  int df = 0;
  double p = 1.0;
  long n_effective = 0;
};

/// First-pass moments actually entering the statistics: unchanged under
/// imposed_zero / reference_differenced, differenced against the last
/// asset under intercept_estimated (the statistics are invariant to
/// which asset is chosen).
FirstPassEstimates effective_first_pass(const FirstPassEstimates& fp, ZeroBetaMode mode);

/// T x smallest root of | tau diag(1, qff^-1) - (mu : beta)' omega^-1 (mu : beta) |.
/// Chi-square with N - K degrees of freedom under correct specification.
JStatResult j_statistic(const FirstPassEstimates& fp, ZeroBetaMode mode);

/// T x smallest root of | tau qff^-1 - beta' omega^-1 beta |.
/// Chi-square with N - K + 1 degrees of freedom under rank(beta) = K - 1.
IsStatResult is_statistic(const FirstPassEstimates& fp, ZeroBetaMode mode);

DiagnosticPair j_is_pair(const FirstPassEstimates& fp, ZeroBetaMode mode);

/// CUE of the premia from the smallest-root eigenvector (1, -lambda')'.
/// Throws DegeneracyError when the first eigenvector component vanishes
/// (premia unbounded / not identified).
PremiaResult cue_estimate(const FirstPassEstimates& fp, ZeroBetaMode mode);

/// Population pseudo-true value and population objective minimum
/// (smallest root, no T scaling).
std::pair<Eigen::VectorXd, double> cue_pseudo_true(const PopulationModel& pm);

/// Inverse of a symmetric PSD matrix with a condition-number gate;
/// shared by the statistics above and the DRLM module.
Eigen::MatrixXd checked_spd_inverse(const Eigen::MatrixXd& S, const char* what,
                                    double max_condition = 1e12);

}  // namespace premia

#endif
