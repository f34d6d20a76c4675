#ifndef PREMIA_PENCIL_HPP
#define PREMIA_PENCIL_HPP

#include <Eigen/Dense>

namespace premia {

/// Roots and smallest-root eigenvector of the symmetric-definite pencil
/// |tau D - M| = 0.
struct EigenSolution {
  double smallest_root = 0.0;
  Eigen::VectorXd eigvec;     // unit Euclidean norm
  Eigen::VectorXd all_roots;  // ascending
};

/// Cholesky reduction D = LL', symmetric eigendecomposition of
/// L^-1 M L^-T, eigenvectors back-transformed through L^-T.
/// M must be symmetric (within 1e-10 relative), D SPD.
EigenSolution solve_pencil(const Eigen::MatrixXd& M, const Eigen::MatrixXd& D);

}  // namespace premia

#endif
