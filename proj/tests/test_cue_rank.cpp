#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "premia/cue_rank.hpp"
#include "premia/errors.hpp"
#include "premia/pencil.hpp"

using namespace premia;

namespace {

Eigen::MatrixXd random_spd(std::mt19937_64& rng, long n, double ridge = 0.5) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd G(n, n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) G(i, j) = gauss(rng);
  return G * G.transpose() / static_cast<double>(n) +
         ridge * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

TEST_CASE("solve_pencil trivial cases") {
  SUBCASE("M = D gives all roots 1") {
    std::mt19937_64 rng(1);
    const Eigen::MatrixXd D = random_spd(rng, 4);
    const EigenSolution sol = solve_pencil(D, D);
    for (long i = 0; i < 4; ++i) CHECK(sol.all_roots(i) == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("diagonal case") {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(2, 2);
    M(0, 0) = 3.0;
    M(1, 1) = 5.0;
    const EigenSolution sol = solve_pencil(M, Eigen::MatrixXd::Identity(2, 2));
    CHECK(sol.smallest_root == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(std::fabs(sol.eigvec(0)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::fabs(sol.eigvec(1)) < 1e-12);
    CHECK(sol.eigvec.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("asymmetric M and indefinite D are rejected") {
    Eigen::MatrixXd M(2, 2);
    M << 1, 2, 3, 4;
    CHECK_THROWS_AS(solve_pencil(M, Eigen::MatrixXd::Identity(2, 2)), ValidationError);
    Eigen::MatrixXd D = Eigen::MatrixXd::Identity(2, 2);
    D(1, 1) = -1.0;
    CHECK_THROWS_AS(solve_pencil(Eigen::MatrixXd::Identity(2, 2), D), DegeneracyError);
  }
}

TEST_CASE("solve_pencil matches the determinant-polynomial oracle") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::MatrixXd M = random_spd(rng, 4, 0.1);
    const Eigen::MatrixXd D = random_spd(rng, 4, 0.5);
    const EigenSolution sol = solve_pencil(M, D);
    const double hi = sol.all_roots(3) * 1.5 + 1.0;
    const auto roots = oracles::pencil_roots_by_determinant(M, D, -0.5, hi);
    REQUIRE(roots.size() == 4);
    for (long i = 0; i < 4; ++i)
      CHECK(std::fabs(sol.all_roots(i) - roots[static_cast<std::size_t>(i)]) < 1e-8);
    // generalized eigen equation holds for the returned vector
    const Eigen::VectorXd resid = M * sol.eigvec - sol.smallest_root * D * sol.eigvec;
    CHECK(resid.norm() < 1e-9 * (1.0 + M.norm()));
  }
}

TEST_CASE("J is zero under exact pricing and the CUE recovers lambda") {
  std::mt19937_64 rng(3);
  AlignedDataset ds = oracles::random_dataset(rng, 60, 8, 2);
  FirstPassEstimates fp = estimate_first_pass(ds);
  Eigen::VectorXd lambda(2);
  lambda << 1.5, -0.7;
  fp.mu = fp.beta * lambda;  // impose exact pricing on the moments
  const JStatResult j = j_statistic(fp, ZeroBetaMode::imposed_zero);
  CHECK(j.j < 1e-8);
  CHECK(j.df == 6);
  const PremiaResult cue = cue_estimate(fp, ZeroBetaMode::imposed_zero);
  CHECK((cue.lambda_f - lambda).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(cue.method == "CUE");
}

TEST_CASE("IS is zero when a beta column is exactly zero") {
  std::mt19937_64 rng(4);
  AlignedDataset ds = oracles::random_dataset(rng, 50, 7, 2);
  FirstPassEstimates fp = estimate_first_pass(ds);
  fp.beta.col(1).setZero();
  const IsStatResult is = is_statistic(fp, ZeroBetaMode::imposed_zero);
  CHECK(is.is < 1e-10);
  CHECK(is.df == 6);
}

TEST_CASE("J <= IS interlacing on random instances") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 1000; ++rep) {
    const long N = 4 + static_cast<long>(rng() % 8);
    const long K = 1 + static_cast<long>(rng() % 3);
    if (K >= N) continue;
    const AlignedDataset ds = oracles::random_dataset(rng, 30 + static_cast<long>(rng() % 40),
                                                      N, K, 0.8, 1.0, 0.5);
    const FirstPassEstimates fp = estimate_first_pass(ds);
    const DiagnosticPair d = j_is_pair(fp, ZeroBetaMode::imposed_zero);
    CHECK(d.j_stat <= d.is_stat + 1e-8);
    CHECK(d.df_is == d.df_j + 1);
  }
}

TEST_CASE("grid oracle: CUE minimizes the sample objective (K=1)") {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 5; ++rep) {
    const AlignedDataset ds = oracles::random_dataset(rng, 80, 6, 1, 1.2, 1.0, 0.4);
    const FirstPassEstimates fp = estimate_first_pass(ds);
    const PremiaResult cue = cue_estimate(fp, ZeroBetaMode::imposed_zero);
    const JStatResult j = j_statistic(fp, ZeroBetaMode::imposed_zero);
    const auto grid = oracles::cue_grid_min(fp, cue.lambda_f(0) - 3.0,
                                            cue.lambda_f(0) + 3.0, 1e-4);
    CHECK(std::fabs(grid.arg - cue.lambda_f(0)) <= 1e-3);
    CHECK(std::fabs(grid.value - j.j) <= 1e-4);
    // the eigen route and the objective route agree at the minimizer
    CHECK(oracles::sample_cue_objective(fp, cue.lambda_f) ==
          doctest::Approx(j.j).epsilon(1e-10));
  }
}

TEST_CASE("intercept mode differences internally and is reference-invariant") {
  std::mt19937_64 rng(7);
  const AlignedDataset ds = oracles::random_dataset(rng, 70, 8, 2, 1.0, 1.0, 0.6);
  const FirstPassEstimates fp = estimate_first_pass(ds);

  const DiagnosticPair with_intercept = j_is_pair(fp, ZeroBetaMode::intercept_estimated);
  CHECK(with_intercept.df_j == 8 - 1 - 2);
  CHECK(with_intercept.df_is == 8 - 1 - 2 + 1);

  // differencing against any reference asset gives the same statistics
  for (long ref : {0L, 3L, 7L}) {
    AlignedDataset manual = ds;
    manual.returns.resize(ds.T(), 7);
    long c = 0;
    for (long jcol = 0; jcol < 8; ++jcol) {
      if (jcol == ref) continue;
      manual.returns.col(c++) = ds.returns.col(jcol) - ds.returns.col(ref);
    }
    manual.return_names.resize(7);
    const FirstPassEstimates fp_ref = estimate_first_pass(manual);
    const DiagnosticPair d = j_is_pair(fp_ref, ZeroBetaMode::imposed_zero);
    CHECK(std::fabs(d.j_stat - with_intercept.j_stat) < 1e-8);
    CHECK(std::fabs(d.is_stat - with_intercept.is_stat) < 1e-8);
  }
}

TEST_CASE("CUE repackaging invariance on sample moments") {
  std::mt19937_64 rng(8);
  const AlignedDataset ds = oracles::random_dataset(rng, 60, 7, 2, 1.0, 1.0, 0.5);
  const FirstPassEstimates fp = estimate_first_pass(ds);
  const PremiaResult cue0 = cue_estimate(fp, ZeroBetaMode::imposed_zero);

  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::MatrixXd G(7, 7);
    for (long i = 0; i < 7; ++i)
      for (long j = 0; j < 7; ++j) G(i, j) = gauss(rng);
    G.array().colwise() -= G.rowwise().mean().array();
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(7, 7) + 0.25 * G;
    const FirstPassEstimates rp = repackage(fp, A);
    const PremiaResult cue1 = cue_estimate(rp, ZeroBetaMode::imposed_zero);
    CHECK((cue1.lambda_f - cue0.lambda_f).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("CUE equivariance under diagonal factor scalings") {
  std::mt19937_64 rng(9);
  const AlignedDataset ds = oracles::random_dataset(rng, 60, 7, 2, 1.0, 1.0, 0.5);
  const FirstPassEstimates fp = estimate_first_pass(ds);
  const PremiaResult cue0 = cue_estimate(fp, ZeroBetaMode::imposed_zero);

  AlignedDataset scaled = ds;
  scaled.factors.col(0) *= 2.5;
  scaled.factors.col(1) *= 0.4;
  const FirstPassEstimates fp2 = estimate_first_pass(scaled);
  const PremiaResult cue1 = cue_estimate(fp2, ZeroBetaMode::imposed_zero);
  CHECK(cue1.lambda_f(0) == doctest::Approx(2.5 * cue0.lambda_f(0)).epsilon(1e-8));
  CHECK(cue1.lambda_f(1) == doctest::Approx(0.4 * cue0.lambda_f(1)).epsilon(1e-8));
}

TEST_CASE("population pseudo-true values") {
  std::mt19937_64 rng(10);
  SUBCASE("correct specification recovers lambda with zero objective") {
    PopulationModel pm;
    pm.beta = Eigen::MatrixXd::Ones(6, 1) + 0.3 * Eigen::VectorXd::LinSpaced(6, -1, 1);
    pm.lambda_f = Eigen::VectorXd::Constant(1, 2.0);
    pm.e_tilde = Eigen::VectorXd::Zero(6);
    pm.omega = random_spd(rng, 6);
    pm.qff = Eigen::MatrixXd::Identity(1, 1);
    pm.mu_r = pm.beta * pm.lambda_f;
    const auto [lambda, jpop] = cue_pseudo_true(pm);
    CHECK(lambda(0) == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(jpop < 1e-12);
  }
  SUBCASE("matches the population grid oracle under misspecification") {
    for (int rep = 0; rep < 5; ++rep) {
      PopulationModel pm;
      const long N = 6;
      std::normal_distribution<double> gauss(0.0, 1.0);
      Eigen::VectorXd b(N), a(N);
      for (long i = 0; i < N; ++i) {
        b(i) = 1.0 + 0.4 * gauss(rng);
        a(i) = gauss(rng);
      }
      pm.beta = b;
      pm.lambda_f = Eigen::VectorXd::Constant(1, 2.0);
      pm.e_tilde = 0.8 * a.normalized();
      pm.omega = random_spd(rng, N);
      pm.qff = Eigen::MatrixXd::Identity(1, 1) * 1.3;
      pm.mu_r = pm.beta * pm.lambda_f + pm.e_tilde;
      const auto [lambda, jpop] = cue_pseudo_true(pm);
      const auto grid = oracles::population_cue_grid_min(pm.mu_r, pm.beta, pm.omega, pm.qff,
                                                         lambda(0) - 3.0, lambda(0) + 3.0, 1e-4);
      CHECK(std::fabs(grid.arg - lambda(0)) <= 1e-3);
      CHECK(std::fabs(grid.value - jpop) <= 1e-6);
    }
  }
  SUBCASE("strong misspecification over weak identification moves the CUE far") {
    PopulationModel pm;
    const long N = 8;
    Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(N, 0.8, 1.2).normalized();
    Eigen::VectorXd a(N);
    for (long i = 0; i < N; ++i) a(i) = std::cos(2.0 * static_cast<double>(i));
    a = (a - b * b.dot(a) * 0.5).normalized();
    pm.lambda_f = Eigen::VectorXd::Constant(1, 2.0);
    pm.omega = Eigen::MatrixXd::Identity(N, N);
    pm.qff = Eigen::MatrixXd::Identity(1, 1);
    pm.beta = 0.05 * b;  // weak identification
    pm.e_tilde = 3.0 * a;  // strong misspecification
    pm.mu_r = pm.beta * pm.lambda_f + pm.e_tilde;
    const auto [lambda, jpop] = cue_pseudo_true(pm);
    CHECK(std::fabs(lambda(0) - 2.0) > 1.0);
  }
}

TEST_CASE("unbounded CUE surfaces as a typed error") {
  // mu orthogonal to beta in the omega metric pushes the smallest-root
  // eigenvector's first component to zero
  FirstPassEstimates fp;
  fp.T = 100;
  fp.beta = Eigen::MatrixXd::Zero(5, 1);
  fp.beta.col(0) = Eigen::VectorXd::LinSpaced(5, 0.9, 1.1);
  fp.mu = Eigen::VectorXd::Zero(5);
  fp.mu(0) = 5.0;
  fp.mu(1) = -5.0;  // large pricing component outside the beta span
  fp.mu = fp.mu * 1e6;  // dominate: smallest root belongs to beta
  fp.omega = Eigen::MatrixXd::Identity(5, 5);
  fp.qff = Eigen::MatrixXd::Identity(1, 1);
  fp.fbar = Eigen::VectorXd::Zero(1);
  fp.beta_tstats = Eigen::MatrixXd::Zero(5, 1);
  fp.beta *= 1e-9;  // nearly reduced rank
  CHECK_THROWS_AS(cue_estimate(fp, ZeroBetaMode::imposed_zero), DegeneracyError);
}

TEST_CASE("singular omega is a degeneracy error") {
  std::mt19937_64 rng(11);
  AlignedDataset ds = oracles::random_dataset(rng, 40, 4, 1);
  FirstPassEstimates fp = estimate_first_pass(ds);
  fp.omega.setZero();
  CHECK_THROWS_AS(j_statistic(fp, ZeroBetaMode::imposed_zero), DegeneracyError);
}
