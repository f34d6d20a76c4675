#include "premia/first_pass.hpp"

#include <cmath>
#include <limits>

#include "premia/errors.hpp"

namespace premia {

namespace {

Eigen::MatrixXd tstats_from_moments(const Eigen::MatrixXd& beta, const Eigen::MatrixXd& omega,
                                    const Eigen::MatrixXd& qff, long T) {
  // Per-equation OLS on (1, F_t): residual variance with the 1/(T-K-1)
  // divisor, slope covariance sigma2 * (sum F~F~')^-1 = sigma2 * qff^-1 / T.
  const long N = beta.rows();
  const long K = beta.cols();
  const double dof = static_cast<double>(T - K - 1);
  const Eigen::MatrixXd qinv = qff.inverse();
  Eigen::MatrixXd t(N, K);
  for (long i = 0; i < N; ++i) {
    const double ssr = omega(i, i) * static_cast<double>(T);
    const double sigma2 = ssr / dof;
    for (long k = 0; k < K; ++k) {
      const double var = sigma2 * qinv(k, k) / static_cast<double>(T);
      if (var <= 0.0) {
        t(i, k) = beta(i, k) >= 0 ? std::numeric_limits<double>::infinity()
                                  : -std::numeric_limits<double>::infinity();
      } else {
        t(i, k) = beta(i, k) / std::sqrt(var);
      }
    }
  }
  return t;
}

}  // namespace

FirstPassEstimates estimate_first_pass(const AlignedDataset& ds) {
  const long T = ds.T();
  const long N = ds.N();
  const long K = ds.K();
  if (T <= K + 1)
    throw ValidationError("first pass needs T > K+1 (T=" + std::to_string(T) +
                          ", K=" + std::to_string(K) + ")");

  FirstPassEstimates fp;
  fp.T = T;
  fp.asset_names = ds.return_names;
  fp.factor_names = ds.factor_names;
  fp.mu = ds.returns.colwise().mean();
  fp.fbar = ds.factors.colwise().mean();

  const Eigen::MatrixXd Rd = ds.returns.rowwise() - fp.mu.transpose();
  const Eigen::MatrixXd Fd = ds.factors.rowwise() - fp.fbar.transpose();

  const Eigen::MatrixXd sff = Fd.transpose() * Fd;  // sum F~F~'
  fp.qff = sff / static_cast<double>(T);
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fp.qff);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (!(lmin > 1e-12 * lmax))
      throw DegeneracyError("singular factor covariance (smallest eigenvalue " +
                            std::to_string(lmin) + ")");
  }

  const Eigen::MatrixXd srf = Rd.transpose() * Fd;  // sum R~F~'
  fp.beta = sff.ldlt().solve(srf.transpose()).transpose();

  const Eigen::MatrixXd U = Rd - Fd * fp.beta.transpose();
  fp.omega = (U.transpose() * U) / static_cast<double>(T);
  fp.omega = 0.5 * (fp.omega + fp.omega.transpose());

  fp.beta_tstats = tstats_from_moments(fp.beta, fp.omega, fp.qff, T);
  return fp;
}

std::vector<BetaTableRow> beta_significance_table(const FirstPassEstimates& fp) {
  std::vector<BetaTableRow> rows;
  rows.reserve(static_cast<std::size_t>(fp.N()));
  for (long i = 0; i < fp.N(); ++i) {
    BetaTableRow row;
    row.asset = i < static_cast<long>(fp.asset_names.size())
                    ? fp.asset_names[static_cast<std::size_t>(i)]
                    : "asset" + std::to_string(i + 1);
    for (long k = 0; k < fp.K(); ++k) {
      row.beta.push_back(fp.beta(i, k));
      row.tstat.push_back(fp.beta_tstats(i, k));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

FirstPassEstimates difference_against(const FirstPassEstimates& fp, long ref_index) {
  const long N = fp.N();
  if (ref_index < 0 || ref_index >= N)
    throw ValidationError("reference index out of range");
  if (N < 2) throw ValidationError("differencing needs at least 2 assets");

  // J = (I : -iota) reordered so the reference column carries the -1s.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(N - 1, N);
  long r = 0;
  for (long i = 0; i < N; ++i) {
    if (i == ref_index) continue;
    J(r, i) = 1.0;
    J(r, ref_index) = -1.0;
    ++r;
  }

  FirstPassEstimates out;
  out.T = fp.T;
  out.factor_names = fp.factor_names;
  out.fbar = fp.fbar;
  out.qff = fp.qff;
  out.mu = J * fp.mu;
  out.beta = J * fp.beta;
  out.omega = J * fp.omega * J.transpose();
  out.omega = 0.5 * (out.omega + out.omega.transpose());
  for (long i = 0; i < N; ++i) {
    if (i == ref_index) continue;
    out.asset_names.push_back(
        i < static_cast<long>(fp.asset_names.size())
            ? fp.asset_names[static_cast<std::size_t>(i)] + "-ref"
            : "asset" + std::to_string(i + 1) + "-ref");
  }
  out.beta_tstats = tstats_from_moments(out.beta, out.omega, out.qff, out.T);
  return out;
}

}  // namespace premia
