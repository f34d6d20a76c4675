#include "premia/drlm.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

#include "premia/chi_square.hpp"
#include "premia/cross_section.hpp"
#include "premia/errors.hpp"
#include "premia/parallel.hpp"

namespace premia {

namespace {

Eigen::MatrixXd symmetric_inv_sqrt(const Eigen::MatrixXd& S, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const auto& ev = es.eigenvalues();
  if (!(ev.minCoeff() > 0.0) || ev.maxCoeff() / ev.minCoeff() > 1e12)
    throw DegeneracyError(std::string("singular or near-singular ") + what);
  return es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

Eigen::MatrixXd matrix_sqrt(const Eigen::MatrixXd& S, SqrtKind kind) {
  if (kind == SqrtKind::cholesky) {
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success)
      throw DegeneracyError("matrix square root: Cholesky failed");
    return llt.matrixL();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const auto& ev = es.eigenvalues();
  if (!(ev.minCoeff() >= 0.0))
    throw DegeneracyError("matrix square root of an indefinite matrix");
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

DrlmEvaluator::DrlmEvaluator(const FirstPassEstimates& fp, ZeroBetaMode mode, SqrtKind sqrt_kind)
    : sqrt_kind_(sqrt_kind) {
  const FirstPassEstimates e = effective_first_pass(fp, mode);
  Eigen::MatrixXd w;
  if (sqrt_kind == SqrtKind::cholesky) {
    Eigen::LLT<Eigen::MatrixXd> llt(e.omega);
    if (llt.info() != Eigen::Success)
      throw DegeneracyError("singular residual covariance (Cholesky failed)");
    w = Eigen::MatrixXd(llt.matrixL())
            .triangularView<Eigen::Lower>()
            .solve(Eigen::MatrixXd::Identity(e.N(), e.N()));
  } else {
    w = symmetric_inv_sqrt(e.omega, "residual covariance");
  }
  w_beta_ = w * e.beta;
  w_mu_ = w * e.mu;
  qff_ = e.qff;
  qff_inv_ = checked_spd_inverse(e.qff, "factor covariance");
  sqrt_t_ = std::sqrt(static_cast<double>(e.T));
}

double DrlmEvaluator::operator()(const Eigen::VectorXd& l) const {
  const long k = K();
  if (l.size() != k) throw ValidationError("drlm_stat: hypothesis has wrong dimension");

  const Eigen::MatrixXd inner = qff_ + l * l.transpose();  // (1/T) sum (F~+l)(F~+l)'
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner);
    if (!(es.eigenvalues().minCoeff() > 0.0) ||
        es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff() > 1e14)
      throw DegeneracyError("near-singular factor moment matrix at hypothesized premia");
  }

  const double s = 1.0 + l.dot(qff_inv_ * l);
  const Eigen::VectorXd mu_star = sqrt_t_ / std::sqrt(s) * (w_mu_ - w_beta_ * l);

  // omega^-1/2 D(l) = -(W_beta qff + w_mu l') (qff + ll')^-1
  const Eigen::MatrixXd wd =
      -(w_beta_ * qff_ + w_mu_ * l.transpose()) * inner.inverse();
  const Eigen::MatrixXd d_star = sqrt_t_ * wd * matrix_sqrt(inner, sqrt_kind_);

  const double c = mu_star.squaredNorm();
  const Eigen::MatrixXd bracket =
      c * Eigen::MatrixXd::Identity(k, k) + d_star.transpose() * d_star;
  const Eigen::VectorXd g = d_star.transpose() * mu_star;
  const double value = g.dot(bracket.ldlt().solve(g));
  return value < 0.0 ? 0.0 : value;
}

double drlm_stat(const FirstPassEstimates& fp, const Eigen::VectorXd& l, ZeroBetaMode mode,
                 SqrtKind sqrt_kind) {
  return DrlmEvaluator(fp, mode, sqrt_kind)(l);
}

std::string to_string(ShapeClass s) {
  switch (s) {
    case ShapeClass::bounded_convex: return "bounded_convex";
    case ShapeClass::unbounded_convex: return "unbounded_convex";
    case ShapeClass::unbounded_disjoint: return "unbounded_disjoint";
  }
  return "?";
}

std::size_t CsGrid::flat_index(const std::vector<std::size_t>& idx) const {
  std::size_t flat = 0;
  for (std::size_t d = 0; d < axes.size(); ++d) flat = flat * axes[d].size() + idx[d];
  return flat;
}

std::vector<std::size_t> CsGrid::multi_index(std::size_t flat) const {
  std::vector<std::size_t> idx(axes.size());
  for (std::size_t d = axes.size(); d-- > 0;) {
    idx[d] = flat % axes[d].size();
    flat /= axes[d].size();
  }
  return idx;
}

Eigen::VectorXd CsGrid::point(std::size_t flat) const {
  const auto idx = multi_index(flat);
  Eigen::VectorXd p(static_cast<long>(axes.size()));
  for (std::size_t d = 0; d < axes.size(); ++d)
    p(static_cast<long>(d)) = axes[d][idx[d]];
  return p;
}

namespace {

void classify_shape(CsGrid& grid) {
  const std::size_t n = grid.size();
  std::vector<std::size_t> accepted;
  bool boundary = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (grid.reject_final[i]) continue;
    accepted.push_back(i);
    const auto idx = grid.multi_index(i);
    for (std::size_t d = 0; d < grid.axes.size(); ++d)
      if (idx[d] == 0 || idx[d] + 1 == grid.axes[d].size()) boundary = true;
  }
  if (accepted.empty()) {
    grid.shape_class = ShapeClass::bounded_convex;  // degenerate: empty set
    return;
  }

  // Connected components under axis-aligned adjacency (flood fill).
  std::vector<std::uint8_t> seen(n, 0);
  int components = 0;
  for (std::size_t start : accepted) {
    if (seen[start]) continue;
    ++components;
    if (components > 1) break;
    std::deque<std::size_t> queue{start};
    seen[start] = 1;
    while (!queue.empty()) {
      const std::size_t cur = queue.front();
      queue.pop_front();
      const auto idx = grid.multi_index(cur);
      for (std::size_t d = 0; d < grid.axes.size(); ++d) {
        for (int step : {-1, +1}) {
          if (step < 0 && idx[d] == 0) continue;
          if (step > 0 && idx[d] + 1 == grid.axes[d].size()) continue;
          auto nb = idx;
          nb[d] += step;
          const std::size_t f = grid.flat_index(nb);
          if (!grid.reject_final[f] && !seen[f]) {
            seen[f] = 1;
            queue.push_back(f);
          }
        }
      }
    }
  }

  if (components > 1)
    grid.shape_class = ShapeClass::unbounded_disjoint;
  else
    grid.shape_class = boundary ? ShapeClass::unbounded_convex : ShapeClass::bounded_convex;
}

void run_power_rule(const DrlmEvaluator& eval, CsGrid& grid, int segment_samples) {
  grid.reject_final = grid.reject_raw;
  if (!grid.cue_valid) {
    grid.power_rule_disabled = true;
    grid.power_rule_applied = false;
    return;
  }
  grid.power_rule_applied = true;

  // Vacuous when nothing on the grid is significant.
  bool any_significant = false;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid.reject_raw[i]) {
      any_significant = true;
      break;
    }
  if (!any_significant) return;

  const double crit = grid.critical_value;
  const int m = segment_samples;
  parallel_for(grid.size(), [&](std::uint64_t b, std::uint64_t e) {
    for (std::uint64_t i = b; i < e; ++i) {
      if (grid.reject_raw[i]) continue;
      const Eigen::VectorXd from = grid.point(i);
      for (int s = 1; s <= m; ++s) {
        const double t = static_cast<double>(s) / (m + 1);
        const Eigen::VectorXd mid = (1.0 - t) * from + t * grid.cue_point;
        double v;
        try {
          v = eval(mid);
        } catch (const DegeneracyError&) {
          continue;  // unevaluable segment point carries no evidence
        }
        if (v > crit) {
          grid.reject_final[i] = 1;
          break;
        }
      }
    }
  });
}

}  // namespace

CsGrid confidence_set(const FirstPassEstimates& fp, ZeroBetaMode mode,
                      std::vector<std::vector<double>> axes, double alpha, bool apply_power_rule,
                      int segment_samples) {
  if (!(alpha > 0.0 && alpha <= 0.5))
    throw ValidationError("confidence_set: alpha must be in (0, 0.5]");
  const DrlmEvaluator eval(fp, mode, SqrtKind::symmetric);
  if (axes.size() != static_cast<std::size_t>(eval.K()))
    throw ValidationError("confidence_set: need one axis per factor");
  for (const auto& ax : axes) {
    if (ax.size() < 2) throw ValidationError("confidence_set: each axis needs >= 2 points");
    for (std::size_t i = 1; i < ax.size(); ++i)
      if (!(ax[i] > ax[i - 1]))
        throw ValidationError("confidence_set: axis values must be strictly increasing");
  }

  CsGrid grid;
  grid.axes = std::move(axes);
  grid.alpha = alpha;
  grid.critical_value = chi2_upper_quantile(static_cast<double>(eval.K()), alpha);

  std::size_t total = 1;
  for (const auto& ax : grid.axes) total *= ax.size();
  grid.drlm_values.assign(total, 0.0);
  grid.reject_raw.assign(total, 0);

  parallel_for(total, [&](std::uint64_t b, std::uint64_t e) {
    for (std::uint64_t i = b; i < e; ++i) {
      const double v = eval(grid.point(i));
      grid.drlm_values[i] = v;
      grid.reject_raw[i] = v > grid.critical_value ? 1 : 0;
    }
  });

  try {
    const PremiaResult cue = cue_estimate(fp, mode);
    grid.cue_point = cue.lambda_f;
    grid.cue_valid = grid.cue_point.allFinite();
  } catch (const DegeneracyError&) {
    grid.cue_valid = false;
  }

  if (apply_power_rule) {
    run_power_rule(eval, grid, segment_samples);
  } else {
    grid.reject_final = grid.reject_raw;
    grid.power_rule_applied = false;
  }
  classify_shape(grid);
  return grid;
}

CsGrid power_improvement(const FirstPassEstimates& fp, ZeroBetaMode mode, CsGrid grid,
                         int segment_samples) {
  const DrlmEvaluator eval(fp, mode, SqrtKind::symmetric);
  run_power_rule(eval, grid, segment_samples);
  classify_shape(grid);
  return grid;
}

std::vector<ProjectedInterval> project(const CsGrid& grid, int axis) {
  if (axis < 0 || static_cast<std::size_t>(axis) >= grid.axes.size())
    throw ValidationError("project: axis out of range");
  const auto& ax = grid.axes[static_cast<std::size_t>(axis)];
  std::vector<std::uint8_t> accepted(ax.size(), 0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid.reject_final[i]) continue;
    accepted[grid.multi_index(i)[static_cast<std::size_t>(axis)]] = 1;
  }

  std::vector<ProjectedInterval> intervals;
  std::size_t i = 0;
  while (i < ax.size()) {
    if (!accepted[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < ax.size() && accepted[j + 1]) ++j;
    ProjectedInterval iv;
    iv.lo = ax[i];
    iv.hi = ax[j];
    iv.lo_censored = (i == 0);
    iv.hi_censored = (j + 1 == ax.size());
    intervals.push_back(iv);
    i = j + 1;
  }
  return intervals;
}

std::vector<std::vector<double>> default_axes(const FirstPassEstimates& fp, ZeroBetaMode mode,
                                              double step) {
  const PremiaResult fm = fm_tstats(fp, fm_two_pass(fp, mode), SeKind::plain);
  std::vector<std::vector<double>> axes;
  for (long k = 0; k < fp.K(); ++k) {
    const double center = fm.lambda_f(k);
    const double half = std::max(5.0, 10.0 * (*fm.se_f)(k));
    std::vector<double> ax;
    for (double v = center - half; v <= center + half + 0.5 * step; v += step)
      ax.push_back(v);
    axes.push_back(std::move(ax));
  }
  return axes;
}

}  // namespace premia
