#include "premia/sim_lab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "premia/chi_square.hpp"
#include "premia/cue_rank.hpp"
#include "premia/drlm.hpp"
#include "premia/errors.hpp"
#include "premia/parallel.hpp"
#include "premia/rng.hpp"

namespace premia {

const char* to_string(TestKind t) {
  switch (t) {
    case TestKind::fm_t: return "fm_t";
    case TestKind::shanken_t: return "shanken_t";
    case TestKind::drlm: return "drlm";
  }
  return "?";
}

const char* to_string(H0Rule r) {
  switch (r) {
    case H0Rule::zero: return "zero";
    case H0Rule::pseudo_true_fm: return "pseudo_true_fm";
    case H0Rule::pseudo_true_cue: return "pseudo_true_cue";
  }
  return "?";
}

DgpSpec DgpSpec::from_model(PopulationModel pm, Eigen::VectorXd mu_f, long T,
                           std::uint64_t seed) {
  DgpSpec s;
  s.beta_scale = pm.beta_magnitude();
  s.e_scale = pm.e_magnitude();
  s.pm = std::move(pm);
  s.mu_f = std::move(mu_f);
  s.T = T;
  s.seed = seed;
  return s;
}

PopulationModel calibrate(const FirstPassEstimates& fp, const Eigen::VectorXd& lambda_f,
                          EDirection e_direction,
                          const std::optional<Eigen::VectorXd>& custom_a) {
  if (lambda_f.size() != fp.K())
    throw ValidationError("calibrate: lambda_f has wrong dimension");
  PopulationModel pm;
  pm.omega = fp.omega;
  pm.qff = fp.qff;
  pm.beta = fp.beta;
  pm.lambda_f = lambda_f;
  if (e_direction == EDirection::residual) {
    const PremiaResult fm = fm_two_pass(fp, ZeroBetaMode::imposed_zero);
    const Eigen::VectorXd resid = fp.mu - fp.beta * fm.lambda_f;
    if (resid.norm() <= 1e-12 * (1.0 + fp.mu.norm()))
      throw DegeneracyError("calibrate: second-pass residual is zero, no e direction");
    pm.e_tilde = resid;
  } else {
    if (!custom_a) throw ValidationError("calibrate: custom e direction not supplied");
    if (custom_a->size() != fp.N())
      throw ValidationError("calibrate: custom e direction has wrong dimension");
    const double norm = custom_a->norm();
    if (norm == 0.0) throw ValidationError("calibrate: custom e direction is zero");
    pm.e_tilde = *custom_a / norm;
  }
  pm.mu_r = pm.beta * pm.lambda_f + pm.e_tilde;
  return pm;
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

AlignedDataset generate(const DgpSpec& spec) {
  if (spec.T < 3) throw ValidationError("generate: T too small");
  const PopulationModel pm = spec.effective_pm();
  const long N = pm.N();
  const long K = pm.K();
  if (spec.mu_f.size() != K) throw ValidationError("generate: mu_f has wrong dimension");

  const Eigen::MatrixXd q_sqrt = psd_sqrt(pm.qff);
  const Eigen::MatrixXd o_sqrt = psd_sqrt(pm.omega);

  Rng rng(spec.seed);
  AlignedDataset ds;
  ds.returns.resize(spec.T, N);
  ds.factors.resize(spec.T, K);
  for (long t = 0; t < spec.T; ++t) {
    const Eigen::VectorXd f = spec.mu_f + q_sqrt * rng.normal_vector(K);
    const Eigen::VectorXd u = o_sqrt * rng.normal_vector(N);
    ds.factors.row(t) = f.transpose();
    ds.returns.row(t) = (pm.mu_r + pm.beta * (f - spec.mu_f) + u).transpose();
  }

  const int width = static_cast<int>(std::to_string(spec.T).size());
  ds.dates.reserve(static_cast<std::size_t>(spec.T));
  for (long t = 1; t <= spec.T; ++t) {
    std::string label = std::to_string(t);
    ds.dates.push_back(std::string(static_cast<std::size_t>(width) - label.size(), '0') + label);
  }
  for (long i = 0; i < N; ++i) ds.return_names.push_back("a" + std::to_string(i + 1));
  for (long k = 0; k < K; ++k) ds.factor_names.push_back("f" + std::to_string(k + 1));
  ds.zero_beta_mode = ZeroBetaMode::imposed_zero;
  return ds;
}

namespace {

bool reject_t_test(const FirstPassEstimates& fp, const Eigen::VectorXd& h0, SeKind kind,
                   double z_crit) {
  const PremiaResult fm = fm_tstats(fp, fm_two_pass(fp, ZeroBetaMode::imposed_zero), kind);
  for (long k = 0; k < fm.lambda_f.size(); ++k) {
    const double se = (*fm.se_f)(k);
    if (se <= 0.0) return true;
    if (std::fabs((fm.lambda_f(k) - h0(k)) / se) > z_crit) return true;
  }
  return false;
}

bool reject_drlm_test(const FirstPassEstimates& fp, const Eigen::VectorXd& h0, double crit,
                      bool power_rule, int segment_samples) {
  const DrlmEvaluator eval(fp, ZeroBetaMode::imposed_zero);
  if (eval(h0) > crit) return true;
  if (!power_rule) return false;
  Eigen::VectorXd cue;
  try {
    cue = cue_estimate(fp, ZeroBetaMode::imposed_zero).lambda_f;
  } catch (const DegeneracyError&) {
    return false;  // rule disabled when the CUE is unbounded
  }
  for (int s = 1; s <= segment_samples; ++s) {
    const double t = static_cast<double>(s) / (segment_samples + 1);
    const Eigen::VectorXd mid = (1.0 - t) * h0 + t * cue;
    try {
      if (eval(mid) > crit) return true;
    } catch (const DegeneracyError&) {
    }
  }
  return false;
}

}  // namespace

RejectionSurface rejection_surface(const SurfaceSpec& spec, TestKind test, H0Rule h0_rule,
                                   int reps, double alpha, bool drlm_power_rule,
                                   int segment_samples) {
  if (reps < 100) throw ValidationError("rejection_surface: reps must be >= 100");
  RejectionSurface surf;
  surf.reps = reps;
  surf.alpha = alpha;
  surf.test = test;
  surf.h0_rule = h0_rule;

  const long K = spec.base.K();
  const double z_crit = normal_two_sided_critical(alpha);
  const double chi_crit = chi2_upper_quantile(static_cast<double>(K), alpha);

  std::size_t cell_id = 0;
  for (double bs : spec.beta_scales) {
    for (double es : spec.e_scales) {
      SurfaceCell cell;
      cell.beta_scale = bs;
      cell.e_scale = es;

      PopulationModel pm_cell;
      bool pm_ok = true;
      try {
        pm_cell = spec.base.rescaled(bs, es);
      } catch (const DegeneracyError&) {
        pm_ok = false;
      }

      if (pm_ok) {
        try {
          switch (h0_rule) {
            case H0Rule::zero:
              cell.h0 = Eigen::VectorXd::Zero(K);
              break;
            case H0Rule::pseudo_true_fm:
              cell.h0 = fm_pseudo_true(pm_cell);
              break;
            case H0Rule::pseudo_true_cue:
              cell.h0 = cue_pseudo_true(pm_cell).first;
              break;
          }
        } catch (const DegeneracyError&) {
          cell.flagged = true;
        }
      } else {
        cell.flagged = true;
      }

      if (!cell.flagged) {
        const std::uint64_t cell_seed = mix_seed(spec.seed, cell_id);
        std::atomic<int> rejections{0};
        std::atomic<int> failures{0};
        parallel_for(static_cast<std::uint64_t>(reps), [&](std::uint64_t b, std::uint64_t e) {
          for (std::uint64_t r = b; r < e; ++r) {
            DgpSpec dgp;
            dgp.pm = pm_cell;
            dgp.beta_scale = bs;
            dgp.e_scale = es;
            dgp.mu_f = spec.mu_f;
            dgp.T = spec.T;
            dgp.seed = mix_seed(cell_seed, r);
            try {
              const AlignedDataset ds = generate(dgp);
              const FirstPassEstimates fp = estimate_first_pass(ds);
              bool rej = false;
              switch (test) {
                case TestKind::fm_t:
                  rej = reject_t_test(fp, cell.h0, SeKind::plain, z_crit);
                  break;
                case TestKind::shanken_t:
                  rej = reject_t_test(fp, cell.h0, SeKind::shanken, z_crit);
                  break;
                case TestKind::drlm:
                  rej = reject_drlm_test(fp, cell.h0, chi_crit, drlm_power_rule,
                                         segment_samples);
                  break;
              }
              if (rej) rejections.fetch_add(1, std::memory_order_relaxed);
            } catch (const DegeneracyError&) {
              failures.fetch_add(1, std::memory_order_relaxed);
            }
          }
        });
        cell.failed_reps = failures.load();
        const int valid = reps - cell.failed_reps;
        cell.rate = valid > 0 ? static_cast<double>(rejections.load()) / valid : 0.0;
        cell.mc_se = valid > 0 ? std::sqrt(cell.rate * (1.0 - cell.rate) / valid) : 0.0;
      }
      surf.cells.push_back(std::move(cell));
      ++cell_id;
    }
  }
  return surf;
}

ContourSurfaces pseudo_true_contours(const PopulationModel& base,
                                     const std::vector<double>& beta_scales,
                                     const std::vector<double>& e_scales) {
  for (double s : beta_scales)
    if (s < 0.0) throw ValidationError("pseudo_true_contours: scales must be >= 0");
  for (double s : e_scales)
    if (s < 0.0) throw ValidationError("pseudo_true_contours: scales must be >= 0");

  ContourSurfaces out;
  out.beta_scales = beta_scales;
  out.e_scales = e_scales;
  const long nb = static_cast<long>(beta_scales.size());
  const long ne = static_cast<long>(e_scales.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.fm_deviation.setConstant(nb, ne, nan);
  out.cue_deviation.setConstant(nb, ne, nan);
  out.fm_defined.setZero(nb, ne);
  out.cue_defined.setZero(nb, ne);

  for (long i = 0; i < nb; ++i) {
    for (long j = 0; j < ne; ++j) {
      const double bs = beta_scales[static_cast<std::size_t>(i)];
      const double es = e_scales[static_cast<std::size_t>(j)];
      if (es == 0.0) {
        // exact pricing: every pseudo-true value equals the baseline
        out.fm_deviation(i, j) = 0.0;
        out.cue_deviation(i, j) = 0.0;
        out.fm_defined(i, j) = 1;
        out.cue_defined(i, j) = 1;
        continue;
      }
      if (bs == 0.0) continue;  // premia undefined, sentinel stays
      const PopulationModel pm = base.rescaled(bs, es);
      try {
        out.fm_deviation(i, j) = (fm_pseudo_true(pm) - pm.lambda_f).norm();
        out.fm_defined(i, j) = 1;
      } catch (const DegeneracyError&) {
      }
      try {
        out.cue_deviation(i, j) = (cue_pseudo_true(pm).first - pm.lambda_f).norm();
        out.cue_defined(i, j) = 1;
      } catch (const DegeneracyError&) {
      }
    }
  }
  return out;
}

double ks_distance(std::vector<double> x, std::vector<double> y) {
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < x.size() && j < y.size()) {
    if (x[i] <= y[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  return d;
}

Theorem2Summary theorem2_decomposition(const DgpSpec& spec, int reps) {
  if (spec.pm.K() != 1)
    throw ValidationError("theorem2_decomposition is stated for one factor (K=1)");
  const PopulationModel pm = spec.effective_pm();
  const long N = pm.N();
  const double T = static_cast<double>(spec.T);

  Theorem2Summary s;
  s.T = spec.T;
  s.reps = reps;

  // Weak-limit parameterization: beta = b/sqrt(T), misspecification = a/sqrt(T).
  const Eigen::VectorXd b = std::sqrt(T) * pm.beta.col(0);
  const Eigen::VectorXd a = std::sqrt(T) * pm.e_tilde;
  const double bb = b.squaredNorm();
  if (bb == 0.0) throw DegeneracyError("theorem2_decomposition: b is zero");
  const double lambda_star = pm.lambda_f(0) + b.dot(a) / bb;
  const Eigen::VectorXd e = a - b * (b.dot(a) / bb);
  s.lambda_star = lambda_star;

  const double q = pm.qff(0, 0);
  const Eigen::MatrixXd var_mu = pm.omega + pm.beta * pm.qff * pm.beta.transpose();
  const Eigen::MatrixXd sqrt_mu = psd_sqrt(var_mu);
  const Eigen::MatrixXd sqrt_beta = psd_sqrt(pm.omega / q);

  s.direct_draws.resize(static_cast<std::size_t>(reps));
  s.component_draws.resize(static_cast<std::size_t>(reps));
  std::vector<double> c2(static_cast<std::size_t>(reps)), c3(c2), c4(c2);

  parallel_for(static_cast<std::uint64_t>(reps), [&](std::uint64_t lo, std::uint64_t hi) {
    for (std::uint64_t r = lo; r < hi; ++r) {
      // direct simulation
      DgpSpec dgp = spec;
      dgp.seed = mix_seed(spec.seed, r);
      const AlignedDataset ds = generate(dgp);
      const FirstPassEstimates fp = estimate_first_pass(ds);
      const PremiaResult fm = fm_two_pass(fp, ZeroBetaMode::imposed_zero);
      s.direct_draws[r] = fm.lambda_f(0);

      // component construction (independent stream)
      Rng rng(mix_seed(spec.seed ^ 0x517CC1B727220A95ull, r));
      const Eigen::VectorXd psi_mu = sqrt_mu * rng.normal_vector(N);
      const Eigen::VectorXd psi_beta = sqrt_beta * rng.normal_vector(N);
      const Eigen::VectorXd bp = b + psi_beta;
      const double den = bp.squaredNorm();
      c2[r] = psi_mu.dot(bp) / den;
      c3[r] = -lambda_star * psi_beta.dot(bp) / den;
      c4[r] = e.dot(psi_beta) / den;
      s.component_draws[r] = lambda_star + c2[r] + c3[r] + c4[r];
    }
  });

  auto mean_se = [reps](const std::vector<double>& v, double& mean, double& se) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= reps;
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    var /= (reps > 1 ? reps - 1 : 1);
    mean = m;
    se = std::sqrt(var / reps);
  };
  mean_se(c2, s.mean_comp2, s.se_comp2);
  mean_se(c3, s.mean_comp3, s.se_comp3);
  mean_se(c4, s.mean_comp4, s.se_comp4);
  s.ks_distance = ks_distance(s.direct_draws, s.component_draws);
  return s;
}

}  // namespace premia
