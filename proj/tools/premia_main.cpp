// premia: risk-premia estimation and identification diagnostics for linear
// beta-representation asset-pricing models.
//
// Subcommands: firstpass, estimate, jis, drlm-cs, simulate, zoo-scan,
// zoo-summarize. JSON results on stdout, diagnostics on stderr.
// Exit codes: 0 success, 2 input/validation error, 3 numerical degeneracy.
//
// All return/factor panels are read as percent per period (the convention
// of the usual portfolio data libraries); no unit conversion is applied.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <random>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "premia/chi_square.hpp"
#include "premia/cross_section.hpp"
#include "premia/cue_rank.hpp"
#include "premia/drlm.hpp"
#include "premia/errors.hpp"
#include "premia/first_pass.hpp"
#include "premia/panel.hpp"
#include "premia/parallel.hpp"
#include "premia/rng.hpp"
#include "premia/sim_lab.hpp"
#include "premia/zoo_scan.hpp"

namespace {

using nlohmann::json;
using namespace premia;

constexpr const char* kToolkitVersion = "1.0.0";
constexpr int kSchemaVersion = 1;

json matrix_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (long i = 0; i < m.rows(); ++i)
    for (long j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (long i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

// JSON has no inf; report non-finite t-statistics as null.
json finite_or_null(double x) {
  if (std::isfinite(x)) return json(x);
  return json(nullptr);
}

json finite_vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (long i = 0; i < v.size(); ++i) a.push_back(finite_or_null(v(i)));
  return a;
}

void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

struct InputOptions {
  std::string returns_path;
  std::string factors_path;
  std::string reference;
  std::string zero_beta = "intercept";
};

void add_input_options(CLI::App* cmd, InputOptions& opt) {
  cmd->add_option("--returns", opt.returns_path, "CSV of test-asset returns (percent per period)")
      ->required();
  cmd->add_option("--factors", opt.factors_path, "CSV of risk factors (percent per period)")
      ->required();
  cmd->add_option("--zero-beta", opt.zero_beta,
                  "zero-beta handling: zero (impose lambda0=0), intercept "
                  "(estimate the zero-beta return), diff (difference against "
                  "--reference)")
      ->check(CLI::IsMember({"zero", "intercept", "diff"}));
  cmd->add_option("--reference", opt.reference,
                  "reference asset for --zero-beta diff (default: last column)");
}

AlignedDataset load_dataset(const InputOptions& opt) {
  const RawPanel returns = load_csv(opt.returns_path, PanelKind::returns);
  const RawPanel factors = load_csv(opt.factors_path, PanelKind::factors);
  AlignedDataset ds = align(returns, factors);
  if (opt.zero_beta == "zero") {
    ds = set_zero_beta_mode(ds, ZeroBetaMode::imposed_zero);
  } else if (opt.zero_beta == "diff") {
    const std::string ref = opt.reference.empty() ? ds.return_names.back() : opt.reference;
    ds = reference_difference(ds, ref);
  }
  return ds;
}

json config_echo(const std::string& subcommand, const InputOptions& opt) {
  return json{{"subcommand", subcommand},
              {"returns", opt.returns_path},
              {"factors", opt.factors_path},
              {"zero_beta", opt.zero_beta},
              {"reference", opt.reference.empty() ? json(nullptr) : json(opt.reference)},
              {"toolkit_version", kToolkitVersion},
              {"schema_version", kSchemaVersion}};
}

std::vector<double> parse_range(const std::string& s) {
  // "lo:hi:step" or comma-separated values
  std::vector<double> out;
  if (s.find(':') != std::string::npos) {
    double lo, hi, step;
    if (std::sscanf(s.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 || step <= 0.0)
      throw ValidationError("bad range '" + s + "', expected lo:hi:step");
    for (double v = lo; v <= hi + 0.5 * step; v += step) out.push_back(v);
  } else {
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        out.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ValidationError("bad number '" + tok + "' in list '" + s + "'");
      }
    }
  }
  if (out.empty()) throw ValidationError("empty value list '" + s + "'");
  return out;
}

std::vector<std::vector<double>> parse_grid(const std::string& s, long k) {
  std::vector<std::vector<double>> axes;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) axes.push_back(parse_range(tok));
  if (static_cast<long>(axes.size()) == 1 && k > 1) {
    while (static_cast<long>(axes.size()) < k) axes.push_back(axes.front());
  }
  if (static_cast<long>(axes.size()) != k)
    throw ValidationError("grid must give one lo:hi:step range per factor");
  return axes;
}

// ---------------------------------------------------------------------------

int run_firstpass(const InputOptions& opt, const std::string& csv_path) {
  const AlignedDataset ds = load_dataset(opt);
  const FirstPassEstimates fp = estimate_first_pass(ds);

  json out;
  out["config"] = config_echo("firstpass", opt);
  out["T"] = fp.T;
  out["N"] = fp.N();
  out["K"] = fp.K();
  out["zero_beta_mode"] = to_string(ds.zero_beta_mode);
  out["asset_names"] = fp.asset_names;
  out["factor_names"] = fp.factor_names;
  out["mu"] = vector_json(fp.mu);
  out["fbar"] = vector_json(fp.fbar);
  out["beta"] = matrix_json(fp.beta);
  out["omega"] = matrix_json(fp.omega);
  out["qff"] = matrix_json(fp.qff);
  out["beta_tstats"] = [&] {
    json m = matrix_json(fp.beta_tstats);
    json data = json::array();
    for (long i = 0; i < fp.beta_tstats.rows(); ++i)
      for (long j = 0; j < fp.beta_tstats.cols(); ++j)
        data.push_back(finite_or_null(fp.beta_tstats(i, j)));
    m["data"] = std::move(data);
    return m;
  }();

  if (!csv_path.empty()) {
    std::ofstream csv(csv_path);
    if (!csv) throw ValidationError("cannot open for writing: " + csv_path);
    csv << "asset";
    for (const auto& f : fp.factor_names) csv << ",beta_" << f << ",t_" << f;
    csv << "\n";
    csv.precision(10);
    for (const auto& row : beta_significance_table(fp)) {
      csv << row.asset;
      for (std::size_t k = 0; k < row.beta.size(); ++k)
        csv << ',' << row.beta[k] << ',' << row.tstat[k];
      csv << "\n";
    }
  }
  emit(out);
  return 0;
}

int run_estimate(const InputOptions& opt, const std::string& method, const std::string& se) {
  const AlignedDataset ds = load_dataset(opt);
  const FirstPassEstimates fp = estimate_first_pass(ds);

  json out;
  out["config"] = config_echo("estimate", opt);
  out["config"]["method"] = method;
  out["config"]["se"] = se;

  PremiaResult res;
  if (method == "fm") {
    res = fm_two_pass(fp, ds.zero_beta_mode);
    res = fm_tstats(fp, res, se == "shanken" ? SeKind::shanken : SeKind::plain);
  } else {
    res = cue_estimate(fp, ds.zero_beta_mode);
  }

  out["method"] = res.method;
  out["zero_beta_mode"] = to_string(ds.zero_beta_mode);
  out["lambda_f"] = vector_json(res.lambda_f);
  out["lambda_0"] = res.lambda_0 ? json(*res.lambda_0) : json(nullptr);
  out["se_kind"] = to_string(res.se_kind);
  if (res.se_f) {
    out["se"] = vector_json(*res.se_f);
    out["t"] = finite_vector_json(*res.t_f);
    json ci = json::array();
    for (long k = 0; k < res.lambda_f.size(); ++k)
      ci.push_back(json::array({res.lambda_f(k) - 1.96 * (*res.se_f)(k),
                                res.lambda_f(k) + 1.96 * (*res.se_f)(k)}));
    out["ci"] = std::move(ci);
  } else {
    out["se"] = nullptr;
    out["t"] = nullptr;
    out["ci"] = nullptr;
  }
  out["se_0"] = res.se_0 ? json(*res.se_0) : json(nullptr);
  out["t_0"] = res.t_0 ? finite_or_null(*res.t_0) : json(nullptr);
  out["r_squared"] = res.r_squared ? json(*res.r_squared) : json(nullptr);
  emit(out);
  return 0;
}

int run_jis(const InputOptions& opt, const std::string& scatter_csv) {
  const AlignedDataset ds = load_dataset(opt);
  const FirstPassEstimates fp = estimate_first_pass(ds);
  const DiagnosticPair d = j_is_pair(fp, ds.zero_beta_mode);

  json out;
  out["config"] = config_echo("jis", opt);
  out["J"] = d.j_stat;
  out["df_J"] = d.df_j;
  out["p_J"] = d.p_j;
  out["IS"] = d.is_stat;
  out["df_IS"] = d.df_is;
  out["p_IS"] = d.p_is;
  out["gap_is_minus_j"] = d.is_stat - d.j_stat;
  try {
    const PremiaResult cue = cue_estimate(fp, ds.zero_beta_mode);
    out["lambda_cue"] = vector_json(cue.lambda_f);
    out["cue_error"] = nullptr;
  } catch (const DegeneracyError& e) {
    out["lambda_cue"] = nullptr;
    out["cue_error"] = e.what();
  }

  if (!scatter_csv.empty()) {
    std::ofstream csv(scatter_csv);
    if (!csv) throw ValidationError("cannot open for writing: " + scatter_csv);
    csv.precision(10);
    csv << "J,IS\n" << d.j_stat << ',' << d.is_stat << "\n";
  }
  emit(out);
  return 0;
}

int run_drlm_cs(const InputOptions& opt, double alpha, const std::string& grid_spec,
                bool no_power_rule, int segment_samples, const std::string& csv_path) {
  const AlignedDataset ds = load_dataset(opt);
  const FirstPassEstimates fp = estimate_first_pass(ds);
  const long k = fp.K();

  std::vector<std::vector<double>> axes =
      grid_spec.empty() ? default_axes(fp, ds.zero_beta_mode) : parse_grid(grid_spec, k);

  const CsGrid grid =
      confidence_set(fp, ds.zero_beta_mode, std::move(axes), alpha, !no_power_rule,
                     segment_samples);

  json out;
  out["config"] = config_echo("drlm-cs", opt);
  out["config"]["alpha"] = alpha;
  out["config"]["grid"] = grid_spec.empty() ? json(nullptr) : json(grid_spec);
  out["config"]["power_rule"] = !no_power_rule;
  out["alpha"] = alpha;
  out["critical_value"] = grid.critical_value;
  out["cue_point"] = grid.cue_valid ? vector_json(grid.cue_point) : json(nullptr);
  out["power_rule_applied"] = grid.power_rule_applied;
  out["power_rule_disabled"] = grid.power_rule_disabled;
  out["shape_class"] = to_string(grid.shape_class);

  std::size_t accepted = 0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (!grid.reject_final[i]) ++accepted;
  out["n_grid_points"] = grid.size();
  out["n_accepted"] = accepted;

  json projections = json::array();
  for (long a = 0; a < k; ++a) {
    json intervals = json::array();
    for (const auto& iv : project(grid, static_cast<int>(a)))
      intervals.push_back(json{{"lo", iv.lo},
                               {"hi", iv.hi},
                               {"lo_censored", iv.lo_censored},
                               {"hi_censored", iv.hi_censored}});
    projections.push_back(json{{"axis", a},
                               {"name", fp.factor_names[static_cast<std::size_t>(a)]},
                               {"intervals", std::move(intervals)}});
  }
  out["projections"] = std::move(projections);

  if (!csv_path.empty()) {
    std::ofstream csv(csv_path);
    if (!csv) throw ValidationError("cannot open for writing: " + csv_path);
    csv.precision(10);
    for (long a = 0; a < k; ++a)
      csv << "l" << (a + 1) << ',';
    csv << "drlm,reject_raw,reject_final\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Eigen::VectorXd p = grid.point(i);
      for (long a = 0; a < k; ++a) csv << p(a) << ',';
      csv << grid.drlm_values[i] << ',' << int(grid.reject_raw[i]) << ','
          << int(grid.reject_final[i]) << "\n";
    }
  }
  emit(out);
  return 0;
}

// --- simulate --------------------------------------------------------------

struct SimulateOptions {
  std::string experiment;
  int reps = 2000;
  std::uint64_t seed = 1;
  long T = 250;
  long N = 10;
  std::string beta_scales = "0:5:0.1";
  std::string e_scales = "0:5:0.1";
  double beta_scale = 2.0;
  double e_scale = 0.0;
  double lambda_f = 2.0;
  double alpha = 0.05;
  std::string test = "fm_t";
  std::string h0 = "zero";
  bool power_rule = false;
  std::string deltas = "-2:2:0.1";
  int grid_res = 51;
  std::string out_csv;
  InputOptions input;  // optional calibration data
  bool have_input = false;
};

// Stylized single-factor population when no calibration data is given:
// smoothly varying betas, a misspecification direction with a component
// inside and outside the beta span, unit factor variance.
PopulationModel synthetic_base(long N, double lambda_f) {
  PopulationModel pm;
  Eigen::VectorXd b(N), a(N);
  for (long i = 0; i < N; ++i) {
    const double x = static_cast<double>(i + 1) / static_cast<double>(N);
    b(i) = 0.5 + x;
    a(i) = std::cos(3.0 * x) + 0.5;
  }
  pm.beta = b;
  pm.e_tilde = a.normalized();
  pm.lambda_f = Eigen::VectorXd::Constant(1, lambda_f);
  pm.qff = Eigen::MatrixXd::Identity(1, 1);
  pm.omega = Eigen::MatrixXd::Identity(N, N);
  for (long i = 0; i < N; ++i) pm.omega(i, i) = 0.5 + 0.1 * static_cast<double>(i % 5);
  pm.mu_r = pm.beta * pm.lambda_f + pm.e_tilde;
  return pm;
}

PopulationModel base_model(const SimulateOptions& opt) {
  if (opt.have_input) {
    const AlignedDataset ds = load_dataset(opt.input);
    const FirstPassEstimates fp = estimate_first_pass(ds);
    Eigen::VectorXd lambda = Eigen::VectorXd::Constant(fp.K(), opt.lambda_f);
    return calibrate(fp, lambda, EDirection::residual);
  }
  return synthetic_base(opt.N, opt.lambda_f);
}

int run_simulate(const SimulateOptions& opt) {
  if (opt.out_csv.empty()) throw ValidationError("simulate requires --out CSV path");
  std::ofstream csv(opt.out_csv);
  if (!csv) throw ValidationError("cannot open for writing: " + opt.out_csv);
  csv.precision(10);

  json out;
  out["config"] = json{{"subcommand", "simulate"},
                       {"experiment", opt.experiment},
                       {"reps", opt.reps},
                       {"seed", opt.seed},
                       {"T", opt.T},
                       {"N", opt.N},
                       {"alpha", opt.alpha},
                       {"lambda_f", opt.lambda_f},
                       {"out", opt.out_csv},
                       {"toolkit_version", kToolkitVersion},
                       {"schema_version", kSchemaVersion}};

  const PopulationModel base = base_model(opt);

  if (opt.experiment == "size-surface") {
    SurfaceSpec spec;
    spec.base = base;
    spec.mu_f = Eigen::VectorXd::Zero(base.K());
    spec.T = opt.T;
    spec.seed = opt.seed;
    spec.beta_scales = parse_range(opt.beta_scales);
    spec.e_scales = parse_range(opt.e_scales);

    TestKind test = TestKind::fm_t;
    if (opt.test == "shanken_t") test = TestKind::shanken_t;
    else if (opt.test == "drlm") test = TestKind::drlm;
    else if (opt.test != "fm_t") throw ValidationError("unknown --test: " + opt.test);
    H0Rule rule = H0Rule::zero;
    if (opt.h0 == "fm") rule = H0Rule::pseudo_true_fm;
    else if (opt.h0 == "cue") rule = H0Rule::pseudo_true_cue;
    else if (opt.h0 != "zero") throw ValidationError("unknown --h0: " + opt.h0);

    const RejectionSurface surf =
        rejection_surface(spec, test, rule, opt.reps, opt.alpha, opt.power_rule);
    out["config"]["test"] = to_string(test);
    out["config"]["h0"] = to_string(rule);
    out["config"]["power_rule"] = opt.power_rule;

    csv << "beta_scale,e_scale,rate,mc_se,flagged,failed_reps\n";
    for (const auto& c : surf.cells)
      csv << c.beta_scale << ',' << c.e_scale << ',' << c.rate << ',' << c.mc_se << ','
          << int(c.flagged) << ',' << c.failed_reps << "\n";
    out["cells"] = surf.cells.size();
  } else if (opt.experiment == "power-curve") {
    const std::vector<double> deltas = parse_range(opt.deltas);
    SurfaceSpec spec;
    spec.base = base;
    spec.mu_f = Eigen::VectorXd::Zero(base.K());
    spec.T = opt.T;
    spec.seed = opt.seed;
    spec.beta_scales = {opt.beta_scale};
    spec.e_scales = {opt.e_scale};

    out["config"]["beta_scale"] = opt.beta_scale;
    out["config"]["e_scale"] = opt.e_scale;
    csv << "delta,test,rate,mc_se\n";
    const PopulationModel pm_cell = base.rescaled(opt.beta_scale, opt.e_scale);
    for (double delta : deltas) {
      // shift the tested value away from the pseudo-true value
      for (const char* test_name : {"fm_t", "shanken_t", "drlm"}) {
        TestKind test = TestKind::fm_t;
        H0Rule rule = H0Rule::pseudo_true_fm;
        if (std::string(test_name) == "shanken_t") test = TestKind::shanken_t;
        if (std::string(test_name) == "drlm") {
          test = TestKind::drlm;
          rule = H0Rule::pseudo_true_cue;
        }
        // evaluate by wrapping the base with a shifted H0 through lambda_f
        SurfaceSpec s2 = spec;
        s2.base.lambda_f.array() += 0.0;
        RejectionSurface surf;
        // Build the H0 manually: pseudo-true + delta
        Eigen::VectorXd h0;
        try {
          h0 = rule == H0Rule::pseudo_true_cue ? cue_pseudo_true(pm_cell).first
                                               : fm_pseudo_true(pm_cell);
        } catch (const DegeneracyError&) {
          csv << delta << ',' << test_name << ",nan,nan\n";
          continue;
        }
        h0.array() += delta;
        // run reps directly
        int rejections = 0, failures = 0;
        const double z_crit = normal_two_sided_critical(opt.alpha);
        const double chi_crit =
            chi2_upper_quantile(static_cast<double>(base.K()), opt.alpha);
        for (int r = 0; r < opt.reps; ++r) {
          DgpSpec dgp;
          dgp.pm = pm_cell;
          dgp.beta_scale = opt.beta_scale;
          dgp.e_scale = opt.e_scale;
          dgp.mu_f = spec.mu_f;
          dgp.T = opt.T;
          dgp.seed = mix_seed(opt.seed, static_cast<std::uint64_t>(r));
          try {
            const AlignedDataset ds = generate(dgp);
            const FirstPassEstimates fp = estimate_first_pass(ds);
            bool rej = false;
            if (test == TestKind::drlm) {
              rej = DrlmEvaluator(fp, ZeroBetaMode::imposed_zero)(h0) > chi_crit;
              if (!rej && opt.power_rule) {
                try {
                  const Eigen::VectorXd cue =
                      cue_estimate(fp, ZeroBetaMode::imposed_zero).lambda_f;
                  DrlmEvaluator eval(fp, ZeroBetaMode::imposed_zero);
                  for (int si = 1; si <= 100 && !rej; ++si) {
                    const double t = si / 101.0;
                    rej = eval(((1.0 - t) * h0 + t * cue).eval()) > chi_crit;
                  }
                } catch (const DegeneracyError&) {
                }
              }
            } else {
              const PremiaResult fm = fm_tstats(
                  fp, fm_two_pass(fp, ZeroBetaMode::imposed_zero),
                  test == TestKind::shanken_t ? SeKind::shanken : SeKind::plain);
              for (long kk = 0; kk < fm.lambda_f.size(); ++kk) {
                const double se = (*fm.se_f)(kk);
                if (se <= 0.0 || std::fabs((fm.lambda_f(kk) - h0(kk)) / se) > z_crit)
                  rej = true;
              }
            }
            if (rej) ++rejections;
          } catch (const DegeneracyError&) {
            ++failures;
          }
        }
        const int valid = opt.reps - failures;
        const double rate = valid > 0 ? double(rejections) / valid : 0.0;
        csv << delta << ',' << test_name << ',' << rate << ','
            << (valid > 0 ? std::sqrt(rate * (1 - rate) / valid) : 0.0) << "\n";
      }
    }
    out["deltas"] = deltas.size();
  } else if (opt.experiment == "contours") {
    std::vector<double> scales;
    for (int i = 0; i < opt.grid_res; ++i)
      scales.push_back(5.0 * static_cast<double>(i) / (opt.grid_res - 1));
    const ContourSurfaces cs = pseudo_true_contours(base, scales, scales);
    out["config"]["grid_res"] = opt.grid_res;
    csv << "beta_scale,e_scale,fm_deviation,cue_deviation,fm_defined,cue_defined\n";
    for (long i = 0; i < cs.fm_deviation.rows(); ++i)
      for (long j = 0; j < cs.fm_deviation.cols(); ++j)
        csv << cs.beta_scales[static_cast<std::size_t>(i)] << ','
            << cs.e_scales[static_cast<std::size_t>(j)] << ',' << cs.fm_deviation(i, j)
            << ',' << cs.cue_deviation(i, j) << ',' << int(cs.fm_defined(i, j)) << ','
            << int(cs.cue_defined(i, j)) << "\n";
    out["cells"] = static_cast<std::uint64_t>(cs.fm_deviation.size());
  } else if (opt.experiment == "theorem2") {
    DgpSpec dgp;
    dgp.pm = base;
    dgp.beta_scale = opt.beta_scale;
    dgp.e_scale = opt.e_scale;
    dgp.mu_f = Eigen::VectorXd::Zero(base.K());
    dgp.T = opt.T;
    dgp.seed = opt.seed;
    const Theorem2Summary th = theorem2_decomposition(dgp, opt.reps);
    out["config"]["beta_scale"] = opt.beta_scale;
    out["config"]["e_scale"] = opt.e_scale;
    out["lambda_star"] = th.lambda_star;
    out["mean_comp2"] = th.mean_comp2;
    out["se_comp2"] = th.se_comp2;
    out["mean_comp3"] = th.mean_comp3;
    out["se_comp3"] = th.se_comp3;
    out["mean_comp4"] = th.mean_comp4;
    out["se_comp4"] = th.se_comp4;
    out["ks_distance"] = th.ks_distance;
    csv << "rep,direct,component_sum\n";
    for (int r = 0; r < th.reps; ++r)
      csv << r << ',' << th.direct_draws[static_cast<std::size_t>(r)] << ','
          << th.component_draws[static_cast<std::size_t>(r)] << "\n";
  } else {
    throw ValidationError("unknown experiment: " + opt.experiment);
  }

  emit(out);
  return 0;
}

// --- zoo -------------------------------------------------------------------

int run_zoo_scan(const InputOptions& opt, int k, const std::string& shard_spec,
                 const std::string& out_path, int audit_n, std::uint64_t audit_seed) {
  const AlignedDataset ds = load_dataset(opt);
  const MomentStore store = precompute_moments(ds);

  unsigned shard_index = 0, shard_count = 1;
  if (!shard_spec.empty()) {
    if (std::sscanf(shard_spec.c_str(), "%u/%u", &shard_index, &shard_count) != 2 ||
        shard_count == 0 || shard_index >= shard_count)
      throw ValidationError("bad --shard, expected i/n with 0 <= i < n");
  }

  const std::vector<ScanRecord> records = scan(store, k, shard_index, shard_count);

  std::uint64_t degenerate = 0;
  for (const auto& r : records)
    if (r.flags & kScanDegenerate) ++degenerate;

  json out;
  out["config"] = config_echo("zoo-scan", opt);
  out["config"]["k"] = k;
  out["config"]["shard"] = shard_spec.empty() ? "0/1" : shard_spec;
  out["config"]["out"] = out_path;
  out["n_models_total"] =
      binomial(static_cast<unsigned>(store.M()), static_cast<unsigned>(k));
  out["shard_records"] = records.size();
  out["n_degenerate"] = degenerate;

  {
    ShardWriter writer(out_path, k);
    for (const auto& r : records) writer.write(r);
  }

  if (audit_n > 0) {
    // Non-batched check: first pass on the sliced panel, then the same
    // statistics through the standard path.
    std::mt19937_64 rng(audit_seed);
    const std::uint64_t total = records.size();
    double max_dj = 0.0, max_dis = 0.0;
    int audited = 0;
    for (int i = 0; i < audit_n; ++i) {
      const auto& rec = records[rng() % total];
      if (rec.flags & kScanDegenerate) continue;
      AlignedDataset sliced = ds;
      sliced.factors.resize(ds.T(), k);
      sliced.factor_names.clear();
      for (int a = 0; a < k; ++a) {
        sliced.factors.col(a) = ds.factors.col(rec.subset[static_cast<std::size_t>(a)]);
        sliced.factor_names.push_back(
            ds.factor_names[rec.subset[static_cast<std::size_t>(a)]]);
      }
      const FirstPassEstimates fp = estimate_first_pass(sliced);
      const DiagnosticPair d = j_is_pair(fp, ds.zero_beta_mode);
      max_dj = std::max(max_dj, std::fabs(d.j_stat - rec.j));
      max_dis = std::max(max_dis, std::fabs(d.is_stat - rec.is));
      ++audited;
    }
    out["audit"] = json{{"n", audited}, {"max_dj", max_dj}, {"max_dis", max_dis}};
  } else {
    out["audit"] = nullptr;
  }

  emit(out);
  return 0;
}

int run_zoo_summarize(const std::vector<std::string>& inputs, int bins,
                      const std::string& hist_csv) {
  if (inputs.empty()) throw ValidationError("zoo-summarize needs at least one shard file");
  std::vector<ScanRecord> records;
  int k = 0;
  for (const auto& path : inputs) {
    int shard_k = 0;
    auto shard = read_shard(path, &shard_k);
    if (k == 0)
      k = shard_k;
    else if (k != shard_k)
      throw ValidationError("shard files disagree on k");
    records.insert(records.end(), shard.begin(), shard.end());
  }

  // n_models is unknown from shards alone if the scan was partial; report
  // the record count and percentages over what was read.
  const ScanSummary s = summarize(records, k, records.size(), bins);

  json out;
  out["config"] = json{{"subcommand", "zoo-summarize"},
                       {"inputs", inputs},
                       {"bins", bins},
                       {"toolkit_version", kToolkitVersion},
                       {"schema_version", kSchemaVersion}};
  out["k"] = s.k;
  out["n_records"] = s.n_records;
  out["n_degenerate"] = s.n_degenerate;
  out["pct_misspecified"] = s.pct_misspecified;
  out["pct_weak"] = s.pct_weak;
  out["hist"] = json{{"bins", s.bins},
                     {"is_min", s.is_min},
                     {"is_max", s.is_max},
                     {"j_min", s.j_min},
                     {"j_max", s.j_max}};

  if (!hist_csv.empty()) {
    std::ofstream csv(hist_csv);
    if (!csv) throw ValidationError("cannot open for writing: " + hist_csv);
    csv.precision(10);
    csv << "is_bin_lo,is_bin_hi,j_bin_lo,j_bin_hi,count\n";
    const double dis = (s.is_max - s.is_min) / s.bins;
    const double dj = (s.j_max - s.j_min) / s.bins;
    for (int bi = 0; bi < s.bins; ++bi)
      for (int bj = 0; bj < s.bins; ++bj)
        csv << s.is_min + bi * dis << ',' << s.is_min + (bi + 1) * dis << ','
            << s.j_min + bj * dj << ',' << s.j_min + (bj + 1) * dj << ','
            << s.hist_at(bi, bj) << "\n";
  }
  emit(out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "premia: risk-premia estimation, misspecification (J) and identification (IS)\n"
      "diagnostics, and identification-robust DRLM confidence sets for linear\n"
      "beta-representation asset-pricing models.\n\n"
      "All panels are interpreted as percent per period; no unit conversion is\n"
      "performed. Set PREMIA_THREADS to cap parallelism."};
  app.require_subcommand(0, 1);

  bool show_version = false;
  app.add_flag("--version", show_version, "print toolkit and schema versions");

  // firstpass
  InputOptions fp_opt;
  std::string fp_csv;
  auto* cmd_fp = app.add_subcommand("firstpass", "time-series OLS of returns on factors");
  add_input_options(cmd_fp, fp_opt);
  cmd_fp->add_option("--csv", fp_csv, "also write a (beta, t) table CSV");

  // estimate
  InputOptions est_opt;
  std::string est_method = "fm", est_se = "plain";
  auto* cmd_est = app.add_subcommand("estimate", "risk premia point estimates");
  add_input_options(cmd_est, est_opt);
  cmd_est->add_option("--method", est_method, "fm or cue")
      ->check(CLI::IsMember({"fm", "cue"}));
  cmd_est->add_option("--se", est_se, "standard errors for fm: plain or shanken")
      ->check(CLI::IsMember({"plain", "shanken"}));

  // jis
  InputOptions jis_opt;
  std::string jis_scatter;
  auto* cmd_jis = app.add_subcommand("jis", "J and IS diagnostics plus the CUE");
  add_input_options(cmd_jis, jis_opt);
  cmd_jis->add_option("--scatter-csv", jis_scatter, "write a (J, IS) scatter row CSV");

  // drlm-cs
  InputOptions cs_opt;
  double cs_alpha = 0.05;
  std::string cs_grid, cs_csv;
  bool cs_no_power = false;
  int cs_segment_samples = 100;
  auto* cmd_cs = app.add_subcommand("drlm-cs", "grid-inverted DRLM confidence set");
  add_input_options(cmd_cs, cs_opt);
  cmd_cs->add_option("--alpha", cs_alpha, "significance level (default 0.05)");
  cmd_cs->add_option("--grid", cs_grid,
                     "per-factor grid 'lo:hi:step[,lo:hi:step...]' "
                     "(default: FM estimate +/- max(5, 10 se), step 0.05)");
  cmd_cs->add_flag("--no-power-rule", cs_no_power, "skip the power improvement rule");
  cmd_cs->add_option("--segment-samples", cs_segment_samples,
                     "interior samples per power-rule segment (default 100)");
  cmd_cs->add_option("--csv", cs_csv, "long-form per-grid-point CSV");

  // simulate
  SimulateOptions sim;
  auto* cmd_sim = app.add_subcommand("simulate", "Monte Carlo experiments");
  cmd_sim->add_option("--experiment", sim.experiment,
                      "size-surface | power-curve | contours | theorem2")
      ->required()
      ->check(CLI::IsMember({"size-surface", "power-curve", "contours", "theorem2"}));
  cmd_sim->add_option("--reps", sim.reps, "Monte Carlo repetitions");
  cmd_sim->add_option("--seed", sim.seed, "master seed");
  cmd_sim->add_option("--T", sim.T, "time-series length per repetition");
  cmd_sim->add_option("--N", sim.N, "number of assets for the synthetic model");
  cmd_sim->add_option("--beta-scales", sim.beta_scales, "identification strengths lo:hi:step");
  cmd_sim->add_option("--e-scales", sim.e_scales, "misspecification strengths lo:hi:step");
  cmd_sim->add_option("--beta-scale", sim.beta_scale, "single identification strength");
  cmd_sim->add_option("--e-scale", sim.e_scale, "single misspecification strength");
  cmd_sim->add_option("--lambda", sim.lambda_f, "baseline risk premium (default 2)");
  cmd_sim->add_option("--alpha", sim.alpha, "test level");
  cmd_sim->add_option("--test", sim.test, "fm_t | shanken_t | drlm");
  cmd_sim->add_option("--h0", sim.h0, "zero | fm | cue");
  cmd_sim->add_flag("--power-rule", sim.power_rule, "apply the DRLM power rule");
  cmd_sim->add_option("--deltas", sim.deltas, "power-curve offsets lo:hi:step");
  cmd_sim->add_option("--grid-res", sim.grid_res, "contour grid resolution (default 51)");
  cmd_sim->add_option("--out", sim.out_csv, "long-form CSV output path")->required();
  cmd_sim->add_option("--returns", sim.input.returns_path, "calibrate from this returns CSV");
  cmd_sim->add_option("--factors", sim.input.factors_path, "calibrate from this factors CSV");

  // zoo-scan
  InputOptions zoo_opt;
  int zoo_k = 1;
  std::string zoo_shard, zoo_out;
  int zoo_audit = 0;
  std::uint64_t zoo_audit_seed = 7;
  auto* cmd_zoo = app.add_subcommand("zoo-scan", "J/IS over all K-factor subsets");
  add_input_options(cmd_zoo, zoo_opt);
  cmd_zoo->add_option("--k", zoo_k, "subset size")->required();
  cmd_zoo->add_option("--shard", zoo_shard, "shard i/n of the colex rank range");
  cmd_zoo->add_option("--out", zoo_out, "binary shard output path")->required();
  cmd_zoo->add_option("--audit", zoo_audit, "re-check this many subsets non-batched");
  cmd_zoo->add_option("--audit-seed", zoo_audit_seed, "audit sampling seed");

  // zoo-summarize
  std::vector<std::string> sum_inputs;
  int sum_bins = 60;
  std::string sum_hist_csv;
  auto* cmd_sum = app.add_subcommand("zoo-summarize", "merge shard files into a summary");
  cmd_sum->add_option("--inputs", sum_inputs, "shard files")->required()->expected(-1);
  cmd_sum->add_option("--bins", sum_bins, "2-D histogram bins per axis (default 60)");
  cmd_sum->add_option("--hist-csv", sum_hist_csv, "histogram CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (show_version) {
    std::cout << "premia " << kToolkitVersion << " (schema " << kSchemaVersion << ")\n";
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help() << "\n";
    return 2;
  }

  try {
    if (cmd_fp->parsed()) return run_firstpass(fp_opt, fp_csv);
    if (cmd_est->parsed()) return run_estimate(est_opt, est_method, est_se);
    if (cmd_jis->parsed()) return run_jis(jis_opt, jis_scatter);
    if (cmd_cs->parsed())
      return run_drlm_cs(cs_opt, cs_alpha, cs_grid, cs_no_power, cs_segment_samples, cs_csv);
    if (cmd_sim->parsed()) {
      sim.have_input = !sim.input.returns_path.empty() && !sim.input.factors_path.empty();
      return run_simulate(sim);
    }
    if (cmd_zoo->parsed())
      return run_zoo_scan(zoo_opt, zoo_k, zoo_shard, zoo_out, zoo_audit, zoo_audit_seed);
    if (cmd_sum->parsed()) return run_zoo_summarize(sum_inputs, sum_bins, sum_hist_csv);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DegeneracyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
