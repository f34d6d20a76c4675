#ifndef PREMIA_DRLM_HPP
#define PREMIA_DRLM_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "premia/cue_rank.hpp"
#include "premia/first_pass.hpp"

namespace premia {

enum class SqrtKind { symmetric, cholesky };

/// Repeated-evaluation workspace for the i.i.d. DRLM statistic. Holds the
/// whitened moments of the (mode-adjusted) first pass so each grid point
/// costs only small-matrix algebra.
class DrlmEvaluator {
 public:
  DrlmEvaluator(const FirstPassEstimates& fp, ZeroBetaMode mode,
                SqrtKind sqrt_kind = SqrtKind::symmetric);

  ///   mu*(l) = sqrt(T) omega^-1/2 (mu - beta l) (1 + l' qff^-1 l)^-1/2
  ///   D(l)   = -(beta qff + mu l') (qff + l l')^-1
  ///   D*(l)  = sqrt(T) omega^-1/2 D(l) (qff + l l')^1/2
  ///   DRLM   = mu*' D* [ (mu*'mu*) I_K + D*'D* ]^-1 D*' mu*
  double operator()(const Eigen::VectorXd& l) const;

  long K() const { return w_beta_.cols(); }

 private:
  Eigen::MatrixXd w_beta_;   // omega^-1/2 beta
  Eigen::VectorXd w_mu_;     // omega^-1/2 mu
  Eigen::MatrixXd qff_;
  Eigen::MatrixXd qff_inv_;
  double sqrt_t_ = 0.0;
  SqrtKind sqrt_kind_;
};

double drlm_stat(const FirstPassEstimates& fp, const Eigen::VectorXd& l, ZeroBetaMode mode,
                 SqrtKind sqrt_kind = SqrtKind::symmetric);

enum class ShapeClass { bounded_convex, unbounded_convex, unbounded_disjoint };

std::string to_string(ShapeClass s);

/// K-dimensional grid of hypothesized premia with DRLM values and
/// accept/reject flags. Flat storage in C order (last axis fastest).
struct CsGrid {
  std::vector<std::vector<double>> axes;
  std::vector<double> drlm_values;
  std::vector<std::uint8_t> reject_raw;
  std::vector<std::uint8_t> reject_final;
  double alpha = 0.05;
  double critical_value = 0.0;
  Eigen::VectorXd cue_point;
  bool cue_valid = false;
  bool power_rule_applied = false;
  bool power_rule_disabled = false;  // CUE unbounded: rule skipped with a warning
  ShapeClass shape_class = ShapeClass::bounded_convex;

  std::size_t size() const { return drlm_values.size(); }
  std::size_t flat_index(const std::vector<std::size_t>& idx) const;
  std::vector<std::size_t> multi_index(std::size_t flat) const;
  Eigen::VectorXd point(std::size_t flat) const;
};

/// Evaluate DRLM over the full Cartesian grid, mark rejections at the
/// chi2_K(alpha) critical value, apply the power rule (unless disabled),
/// and classify the accepted set's shape.
CsGrid confidence_set(const FirstPassEstimates& fp, ZeroBetaMode mode,
                      std::vector<std::vector<double>> axes, double alpha,
                      bool apply_power_rule = true, int segment_samples = 100);

/// Re-run the power rule on an existing grid: an accepted point is
/// additionally rejected when some sampled interior point of the segment
/// from it to the CUE has a significant DRLM value.
CsGrid power_improvement(const FirstPassEstimates& fp, ZeroBetaMode mode, CsGrid grid,
                         int segment_samples = 100);

struct ProjectedInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_censored = false;  // touches the grid edge
  bool hi_censored = false;
};

/// Union of maximal contiguous accepted ranges along one axis, merged
/// across the other dimensions.
std::vector<ProjectedInterval> project(const CsGrid& grid, int axis);

/// Per-axis default: lambda_fm +/- max(5, 10 se_plain), step 0.05.
std::vector<std::vector<double>> default_axes(const FirstPassEstimates& fp, ZeroBetaMode mode,
                                              double step = 0.05);

}  // namespace premia

#endif
