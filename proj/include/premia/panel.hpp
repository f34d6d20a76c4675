#ifndef PREMIA_PANEL_HPP
#define PREMIA_PANEL_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace premia {

enum class PanelKind { returns, factors };

enum class ZeroBetaMode { imposed_zero, reference_differenced, intercept_estimated };

std::string to_string(ZeroBetaMode mode);

/// One CSV panel as loaded: date labels, column names, T x M value matrix.
/// Values are percent per period throughout the toolkit.
struct RawPanel {
  std::vector<std::string> dates;
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // T x M

  long T() const { return values.rows(); }
  long M() const { return values.cols(); }
};

/// Return and factor panels restricted to a common, date-matched sample.
struct AlignedDataset {
  std::vector<std::string> dates;
  std::vector<std::string> return_names;
  std::vector<std::string> factor_names;
  Eigen::MatrixXd returns;  // T x N
  Eigen::MatrixXd factors;  // T x K
  ZeroBetaMode zero_beta_mode = ZeroBetaMode::intercept_estimated;
  std::optional<std::string> reference_asset;

  long T() const { return returns.rows(); }
  long N() const { return returns.cols(); }
  long K() const { return factors.cols(); }
};

/// Load a comma-delimited panel: header row, first column "date", all
/// remaining cells finite reals. Dates must be strictly increasing
/// (numeric comparison when every label is purely numeric, lexicographic
/// otherwise). Errors name the offending row/column.
RawPanel load_csv(const std::string& path, PanelKind kind);

/// Inverse of load_csv at full precision (values round-trip to <= 1 ulp).
void write_csv(const RawPanel& panel, const std::string& path);

/// Restrict both panels to their common dates, rows matched by label.
/// zero_beta_mode starts as intercept_estimated.
AlignedDataset align(const RawPanel& returns, const RawPanel& factors);

/// Replace the N+1 return columns by the N differences against the
/// reference column; the reference column is dropped.
AlignedDataset reference_difference(const AlignedDataset& ds, const std::string& reference);

/// Switch between imposed_zero and intercept_estimated.
/// reference_differenced is only reachable via reference_difference.
AlignedDataset set_zero_beta_mode(const AlignedDataset& ds, ZeroBetaMode mode);

}  // namespace premia

#endif
