#include "premia/pencil.hpp"

#include "premia/errors.hpp"

namespace premia {

EigenSolution solve_pencil(const Eigen::MatrixXd& M, const Eigen::MatrixXd& D) {
  if (M.rows() != M.cols() || D.rows() != D.cols() || M.rows() != D.rows())
    throw ValidationError("solve_pencil: M and D must be square and same size");
  const double scale = M.norm();
  if ((M - M.transpose()).norm() > 1e-10 * (scale > 0 ? scale : 1.0))
    throw ValidationError("solve_pencil: M is not symmetric");

  Eigen::LLT<Eigen::MatrixXd> llt(D);
  if (llt.info() != Eigen::Success)
    throw DegeneracyError("solve_pencil: D is not positive definite (Cholesky failed)");
  const Eigen::MatrixXd L = llt.matrixL();

  // C = L^-1 M L^-T
  const Eigen::MatrixXd tmp = L.triangularView<Eigen::Lower>().solve(M);
  Eigen::MatrixXd C =
      L.triangularView<Eigen::Lower>().solve(tmp.transpose()).transpose();
  C = 0.5 * (C + C.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  if (es.info() != Eigen::Success)
    throw DegeneracyError("solve_pencil: eigendecomposition failed");

  EigenSolution sol;
  sol.all_roots = es.eigenvalues();  // ascending
  sol.smallest_root = sol.all_roots(0);
  Eigen::VectorXd v =
      L.transpose().triangularView<Eigen::Upper>().solve(es.eigenvectors().col(0));
  sol.eigvec = v / v.norm();
  return sol;
}

}  // namespace premia
