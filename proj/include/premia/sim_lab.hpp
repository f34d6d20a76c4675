#ifndef PREMIA_SIM_LAB_HPP
#define PREMIA_SIM_LAB_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "premia/cross_section.hpp"
#include "premia/first_pass.hpp"

namespace premia {

/// Data-generating process: i.i.d. Gaussian factors and errors around a
/// population model whose identification and misspecification magnitudes
/// are set by beta_scale and e_scale (multipliers on the normalized
/// directions b and a).
struct DgpSpec {
  PopulationModel pm;
  Eigen::VectorXd mu_f;  // factor mean
  long T = 0;
  std::uint64_t seed = 0;
  double beta_scale = 1.0;
  double e_scale = 0.0;

  PopulationModel effective_pm() const { return pm.rescaled(beta_scale, e_scale); }

  /// Spec that reproduces pm at its own magnitudes.
  static DgpSpec from_model(PopulationModel pm, Eigen::VectorXd mu_f, long T,
                            std::uint64_t seed);
};

enum class EDirection { residual, custom };

/// Population model calibrated to data: omega, qff from the first pass,
/// b from the estimated betas, a from the FM second-pass residual (or a
/// supplied custom direction), lambda_f as given.
PopulationModel calibrate(const FirstPassEstimates& fp, const Eigen::VectorXd& lambda_f,
                          EDirection e_direction,
                          const std::optional<Eigen::VectorXd>& custom_a = std::nullopt);

/// R_t = mu_R + beta (F_t - mu_f) + u_t with F_t ~ N(mu_f, qff) and
/// u_t ~ N(0, omega), i.i.d.; deterministic given the seed.
AlignedDataset generate(const DgpSpec& spec);

enum class TestKind { fm_t, shanken_t, drlm };
enum class H0Rule { zero, pseudo_true_fm, pseudo_true_cue };

const char* to_string(TestKind t);
const char* to_string(H0Rule r);

struct SurfaceCell {
  double beta_scale = 0.0;
  double e_scale = 0.0;
  double rate = 0.0;
  double mc_se = 0.0;       // sqrt(r(1-r)/reps)
  bool flagged = false;     // H0 value not computable for this cell
  int failed_reps = 0;      // reps lost to numerical degeneracy
  Eigen::VectorXd h0;
};

struct RejectionSurface {
  std::vector<SurfaceCell> cells;  // row-major over (beta_scale, e_scale)
  int reps = 0;
  double alpha = 0.05;
  TestKind test = TestKind::fm_t;
  H0Rule h0_rule = H0Rule::zero;
};

struct SurfaceSpec {
  PopulationModel base;
  Eigen::VectorXd mu_f;
  long T = 0;
  std::uint64_t seed = 0;
  std::vector<double> beta_scales;
  std::vector<double> e_scales;
};

/// Per-cell rejection frequency of the alpha-level test of the
/// cell-specific H0. Per-rep seeds are counter-mixed from the master
/// seed, so results are bit-identical for any worker count.
RejectionSurface rejection_surface(const SurfaceSpec& spec, TestKind test, H0Rule h0_rule,
                                   int reps, double alpha, bool drlm_power_rule = false,
                                   int segment_samples = 100);

struct ContourSurfaces {
  std::vector<double> beta_scales;
  std::vector<double> e_scales;
  Eigen::MatrixXd fm_deviation;   // |lambda*_FM - lambda_F|
  Eigen::MatrixXd cue_deviation;  // |lambda*_CUE - lambda_F|
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> fm_defined;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> cue_defined;
};

/// Pseudo-true-value deviation surfaces over the (beta_scale, e_scale)
/// grid; undefined cells (unbounded CUE, zero beta) carry NaN sentinels.
ContourSurfaces pseudo_true_contours(const PopulationModel& base,
                                     const std::vector<double>& beta_scales,
                                     const std::vector<double>& e_scales);

struct Theorem2Summary {
  long T = 0;
  int reps = 0;
  double lambda_star = 0.0;       // component 1
  double mean_comp2 = 0.0, se_comp2 = 0.0;
  double mean_comp3 = 0.0, se_comp3 = 0.0;
  double mean_comp4 = 0.0, se_comp4 = 0.0;
  double ks_distance = 0.0;       // direct vs component-sum draws
  std::vector<double> direct_draws;
  std::vector<double> component_draws;
};

/// Single-factor decomposition check: the Monte Carlo distribution of the
/// four-component sum against direct FM estimates on generated data.
Theorem2Summary theorem2_decomposition(const DgpSpec& spec, int reps);

/// Two-sample Kolmogorov-Smirnov distance.
double ks_distance(std::vector<double> x, std::vector<double> y);

}  // namespace premia

#endif
