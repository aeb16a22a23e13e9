// sinkbridge command-line front end.
//
// Every subcommand writes its artifacts to --out (or $SB_OUTPUT_DIR, or the
// working directory). Exit codes: 0 success, 1 invalid input, 2 numeric
// failure. Errors are printed to stderr as a JSON object.
//
// Experiment configs are JSON objects with "schema_version": 1. Unknown keys
// are rejected. Shared keys for Monte Carlo configs:
//
//   m, n          matrix dimensions
//   margin        {"kind": "uniform", "value": v} or
//                 {"kind": "row_block", "lo": a, "hi": b, "split": s}
//                 row margins are value * n, columns uniform with equal total
//   mean          same shape, entries of the mean matrix
//   dist          poisson | bernoulli | exponential | uniform
//   trials        number of Monte Carlo trials (concentration only)
//   seed          used when --seed is not given
//
// esd adds grid_points, grid_upper, eta_ladder, bins, rigidity_eps, Delta,
// eps_star, D, sinkhorn_tol. concentration adds D, sinkhorn_tol and
// test_function. clt takes lambda (array of rows), margins {"r", "c"}, dist,
// M, replicates and optionally sweep_M / sweep_replicates. limit takes the
// fields of LimitSpec by name.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <thread>

#include "sinkbridge/experiments.hpp"
#include "sinkbridge/io.hpp"

namespace fs = std::filesystem;
using namespace sinkbridge;

namespace {

constexpr int kSchemaVersion = 1;

struct Common {
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out;
  int workers = 0;
};

// The report being assembled; written with the error attached when a
// subcommand fails part way.
struct PartialReport {
  fs::path path;
  Json body = Json::object();
} g_partial;

Error invalid(const std::string& what) { return Error(ErrorCode::InvalidArgument, what); }

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw invalid(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw invalid("unknown field '" + key + "' in " + where);
  }
}

Json load_config(const std::string& path, std::set<std::string> allowed) {
  const Json j = read_json_file(path);
  allowed.insert("schema_version");
  reject_unknown(j, allowed, path);
  if (!j.contains("schema_version")) throw invalid(path + ": missing schema_version");
  if (j.at("schema_version").get<int>() != kSchemaVersion) {
    throw invalid(path + ": unsupported schema_version");
  }
  return j;
}

template <class T>
T value_or(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

BlockSpec block_from_json(const Json& j, const std::string& where) {
  BlockSpec b;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "uniform") {
    reject_unknown(j, {"kind", "value"}, where);
    b.kind = BlockSpec::Kind::Uniform;
    b.lo = j.at("value").get<double>();
  } else if (kind == "row_block") {
    reject_unknown(j, {"kind", "lo", "hi", "split"}, where);
    b.kind = BlockSpec::Kind::RowBlock;
    b.lo = j.at("lo").get<double>();
    b.hi = j.at("hi").get<double>();
    b.split = value_or(j, "split", 0.5);
  } else {
    throw invalid(where + ": unknown kind '" + kind + "'");
  }
  return b;
}

const std::set<std::string> kExperimentKeys = {"m", "n", "margin", "mean", "dist", "trials", "seed"};

ExperimentConfig experiment_from_json(const Json& j, const Common& common) {
  ExperimentConfig cfg;
  cfg.m = j.at("m").get<Eigen::Index>();
  cfg.n = j.at("n").get<Eigen::Index>();
  cfg.margin_spec = block_from_json(j.at("margin"), "margin");
  cfg.mean_spec = block_from_json(j.at("mean"), "mean");
  cfg.dist = dist_kind_from_string(value_or<std::string>(j, "dist", "poisson"));
  cfg.trials = value_or(j, "trials", 100);
  cfg.seed = common.seed_given ? common.seed : value_or<std::uint64_t>(j, "seed", 0);
  return cfg;
}

std::set<std::string> with_experiment_keys(std::set<std::string> extra) {
  extra.insert(kExperimentKeys.begin(), kExperimentKeys.end());
  return extra;
}

fs::path output_dir(const Common& common) {
  fs::path dir = ".";
  if (!common.out.empty()) {
    dir = common.out;
  } else if (const char* env = std::getenv("SB_OUTPUT_DIR"); env && *env) {
    dir = env;
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::Io, "output directory '" + dir.string() + "' is not writable");
  }
  return dir;
}

int workers_for(const Common& common, bool monte_carlo) {
  if (common.workers > 0) return common.workers;
  return monte_carlo ? default_workers() : 1;
}

void begin_report(const fs::path& dir, const std::string& name) {
  g_partial.path = dir / name;
  g_partial.body = Json::object();
}

void finish_report() {
  write_json_file(g_partial.path.string(), g_partial.body);
  g_partial.path.clear();
}

Json constants_to_json(const StabilityConstants& k) {
  Json j;
  j["rho_A"] = k.rho_A;
  j["C_A"] = k.C_A;
  j["eps_max"] = k.eps_max;
  j["C_star"] = k.C_star;
  j["eps0"] = k.eps0;
  j["eps_pot"] = k.eps_pot;
  j["tau"] = k.tau;
  j["t_D"] = k.t_D;
  j["Phi"] = k.Phi;
  j["eps_cov"] = std::isnan(k.eps_cov) ? Json() : Json(k.eps_cov);
  j["s_max"] = std::isnan(k.s_max) ? Json() : Json(k.s_max);
  j["sigma"] = k.sigma;
  j["R"] = k.R;
  j["D"] = k.D;
  j["K"] = k.K;
  j["delta"] = k.delta;
  j["lambda_min"] = k.lambda_min;
  j["lambda_max"] = k.lambda_max;
  j["lambda_mass"] = k.lambda_mass;
  j["eps0_condition"] = k.eps0_condition();
  j["prob_e1_lower"] = k.prob_e1_lower();
  j["prob_e2_lower"] = k.prob_e2_lower();
  j["prob_e3_lower"] = k.prob_e3_lower();
  return j;
}

std::string histogram_csv(const Histogram& h) {
  const Eigen::Index bins = h.density.size();
  return columns_to_csv({"lower", "upper", "density"},
                        {h.edges.head(bins), h.edges.tail(bins), h.density});
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// ------------------------------------------------------------ commands

struct ScaleArgs {
  std::string matrix, margins, gauge = "BetaCWeighted";
  double tol = 1e-10;
  int max_iter = 100000;
};

void write_scaling(const fs::path& dir, const ScalingProblem& problem, const ScalingResult& res) {
  write_json_file((dir / "potentials.json").string(), potentials_to_json(res.potentials));
  write_matrix_csv((dir / "rescaled.csv").string(), res.rescaled);
  g_partial.body["iterations"] = res.iterations;
  g_partial.body["final_margin_error"] = res.final_margin_error;
  g_partial.body["dual_objective"] = dual_objective(problem, res.potentials);
}

void cmd_scale(const Common& common, const ScaleArgs& a) {
  const ScalingProblem problem{read_matrix_csv(a.matrix),
                               margins_from_json(read_json_file(a.margins))};
  problem.validate();
  const fs::path dir = output_dir(common);
  SinkhornOptions opt;
  opt.tol = a.tol;
  opt.max_iter = a.max_iter;
  opt.gauge = gauge_from_string(a.gauge);
  begin_report(dir, "scale.json");
  g_partial.body["converged"] = false;
  try {
    const ScalingResult res = sinkhorn_scale(problem, opt);
    write_scaling(dir, problem, res);
  } catch (const MaxIterationsError& e) {
    write_scaling(dir, problem, e.partial());
    throw;
  }
  g_partial.body["converged"] = true;
  finish_report();
}

struct CheckArgs {
  std::string matrix, margins;
  bool exact = false;
};

void cmd_check(const Common& common, const CheckArgs& a) {
  const Matrix m = read_matrix_csv(a.matrix);
  const MarginPair mg = margins_from_json(read_json_file(a.margins));
  const ScalabilityVerdict v =
      check_scalability(m, mg, a.exact ? ScalabilityMode::Exact : ScalabilityMode::Auto);
  Json j;
  j["scalable"] = v.scalable;
  j["heuristic"] = v.heuristic;
  // Witness subsets are reported 1-based.
  std::vector<int> rows, cols;
  for (int i : v.witness_rows) rows.push_back(i + 1);
  for (int c : v.witness_cols) cols.push_back(c + 1);
  j["witness_rows"] = rows;
  j["witness_cols"] = cols;
  write_json_file((output_dir(common) / "check.json").string(), j);
  std::cout << j.dump() << "\n";
}

struct ConstantsArgs {
  std::string config, matrix, margins, dist = "poisson";
  double D = 1.0;
  std::optional<double> sigma, R;
};

void cmd_constants(const Common& common, const ConstantsArgs& a) {
  ScalingProblem problem;
  DistKind dist = dist_kind_from_string(a.dist);
  if (!a.config.empty()) {
    const ExperimentConfig cfg =
        experiment_from_json(load_config(a.config, kExperimentKeys), common);
    const ConfigMatrices cm = build_config_matrices(cfg);
    problem = {cm.lambda, cm.margins};
    dist = cfg.dist;
  } else {
    if (a.matrix.empty() || a.margins.empty()) {
      throw invalid("constants needs --config or both --matrix and --margins");
    }
    problem = {read_matrix_csv(a.matrix), margins_from_json(read_json_file(a.margins))};
  }
  const SubExpParams se = subexp_params(dist, problem.lambda.maxCoeff());
  const StabilityConstants k =
      concentration_constants(problem, a.sigma.value_or(se.sigma), a.R.value_or(se.R), a.D,
                              variance_matrix(problem.lambda, dist));
  Json j = constants_to_json(k);
  j["dist"] = to_string(dist);
  write_json_file((output_dir(common) / "constants.json").string(), j);
  std::cout << j.dump(2) << "\n";
}

struct SweepArgs {
  std::string kind = "all";
  int instances = 1000;
};

void cmd_stability_sweep(const Common& common, const SweepArgs& a) {
  static const std::set<std::string> kinds = {"all",         "stability", "potential",
                                              "sandwich",    "containment", "scalability"};
  if (!kinds.count(a.kind)) throw invalid("unknown sweep kind '" + a.kind + "'");
  const fs::path dir = output_dir(common);
  const int workers = workers_for(common, true);
  begin_report(dir, "sweep.json");

  std::vector<InequalityRecord> records;
  auto run = [&](const std::string& name, const SweepReport& rep) {
    g_partial.body[name] = {{"records", rep.records.size()},
                            {"violations", rep.violations},
                            {"skipped", rep.skipped}};
    records.insert(records.end(), rep.records.begin(), rep.records.end());
  };
  const bool all = a.kind == "all";
  if (all || a.kind == "stability") {
    run("stability", run_stability_sweep(a.instances, common.seed, workers));
  }
  if (all || a.kind == "potential") {
    run("potential", run_potential_sweep(a.instances, common.seed, workers));
  }
  if (all || a.kind == "sandwich") run("sandwich", run_sandwich_sweep(a.instances, common.seed));
  if (all || a.kind == "containment") {
    run("containment", run_containment_sweep(a.instances, common.seed, workers));
  }
  if (all || a.kind == "scalability") {
    const ScalabilityAgreement s = run_scalability_agreement(a.instances, common.seed);
    g_partial.body["scalability"] = {{"instances", s.instances},
                                     {"agree", s.agree},
                                     {"exact_scalable", s.exact_scalable},
                                     {"disagreeing", s.disagreeing}};
  }

  std::string csv = "kind,instance,lhs,rhs,holds\n";
  for (const auto& r : records) {
    csv += r.kind + "," + std::to_string(r.instance) + "," + format_double(r.lhs) + "," +
           format_double(r.rhs) + "," + (r.holds ? "1" : "0") + "\n";
  }
  write_text_file((dir / "sweep.csv").string(), csv);
  finish_report();
}

struct DysonArgs {
  std::string profile;
  Eigen::Index grid_points = 400;
  double grid_upper = 4.2;
  double tol = 1e-10;
  std::vector<double> eta;
};

void write_dyson(const fs::path& dir, const DysonSolution& sol) {
  if (sol.grid.size() == 0) return;
  write_text_file((dir / "dyson_density.csv").string(),
                  columns_to_csv({"tau", "density", "cdf"}, {sol.grid, sol.density, sol.cdf}));
  g_partial.body["atom"] = sol.atom;
  g_partial.body["eta_final"] = sol.eta_final;
  g_partial.body["converged"] = sol.converged;
  g_partial.body["unconverged_points"] = sol.unconverged_points;
  g_partial.body["raw_mass"] = sol.raw_mass;
}

void cmd_dyson(const Common& common, const DysonArgs& a) {
  const Matrix S = read_matrix_csv(a.profile);
  const fs::path dir = output_dir(common);
  const std::vector<double> eta = a.eta.empty() ? default_eta_ladder() : a.eta;
  begin_report(dir, "dyson.json");
  DysonSolution partial;
  try {
    write_dyson(dir, solve_dyson(S, uniform_grid(a.grid_points, a.grid_upper), eta, a.tol,
                                 200000, &partial));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NoConvergence) write_dyson(dir, partial);
    throw;
  }
  finish_report();
}

struct EsdArgs {
  std::string config;
  std::optional<Eigen::Index> grid_points;
  std::optional<double> D, tol;
  std::vector<double> eta;
};

void cmd_esd(const Common& common, const EsdArgs& a) {
  const Json j = load_config(
      a.config, with_experiment_keys({"grid_points", "grid_upper", "eta_ladder", "bins",
                                      "rigidity_eps", "Delta", "eps_star", "D", "sinkhorn_tol"}));
  EsdConfig cfg;
  cfg.base = experiment_from_json(j, common);
  cfg.grid_points = a.grid_points.value_or(value_or(j, "grid_points", cfg.grid_points));
  cfg.grid_upper = value_or(j, "grid_upper", cfg.grid_upper);
  cfg.bins = value_or(j, "bins", cfg.bins);
  cfg.rigidity_eps = value_or(j, "rigidity_eps", cfg.rigidity_eps);
  cfg.Delta = value_or(j, "Delta", cfg.Delta);
  cfg.eps_star = value_or(j, "eps_star", cfg.eps_star);
  cfg.D = a.D.value_or(value_or(j, "D", cfg.D));
  cfg.sinkhorn_tol = a.tol.value_or(value_or(j, "sinkhorn_tol", cfg.sinkhorn_tol));
  if (!a.eta.empty()) {
    cfg.eta_ladder = a.eta;
  } else if (j.contains("eta_ladder")) {
    cfg.eta_ladder = j.at("eta_ladder").get<std::vector<double>>();
  }

  const fs::path dir = output_dir(common);
  begin_report(dir, "esd.json");
  const EsdReport rep = run_esd_experiment(cfg);

  write_text_file((dir / "histogram.csv").string(), histogram_csv(rep.eigen_histogram));
  write_text_file((dir / "singular_histogram.csv").string(),
                  histogram_csv(rep.singular_histogram));
  Vector mp(rep.dyson.grid.size());
  for (Eigen::Index k = 0; k < mp.size(); ++k) {
    mp(k) = mp_density_scaled(rep.dyson.grid(k), rep.mp_scale);
  }
  write_text_file(
      (dir / "dyson_density.csv").string(),
      columns_to_csv({"tau", "density", "cdf", "mp_density"},
                     {rep.dyson.grid, rep.dyson.density, rep.dyson.cdf, mp}));
  write_text_file((dir / "singular_density.csv").string(),
                  columns_to_csv({"s", "density"},
                                 {rep.singular_density.grid, rep.singular_density.values}));
  write_text_file((dir / "eigenvalues.csv").string(),
                  columns_to_csv({"eigenvalue"}, {rep.eigenvalues}));

  Json rig;
  rig["violations"] = rep.rigidity.violations;
  rig["bulk_points"] = rep.rigidity.bulk_points;
  rig["outside_support"] = rep.rigidity.outside_support;
  rig["max_dev_in_bulk"] = rep.rigidity.max_dev_in_bulk;
  rig["support"] = Json::array();
  for (const auto& [lo, hi] : rep.rigidity.support) rig["support"].push_back({lo, hi});
  rig["rows"] = Json::array();
  for (const auto& r : rep.rigidity.rows) {
    rig["rows"].push_back({{"tau", r.tau},
                           {"index", r.index},
                           {"eigenvalue", r.eigenvalue},
                           {"deviation", r.deviation},
                           {"bound", r.bound},
                           {"violation", r.violation}});
  }
  write_json_file((dir / "rigidity.json").string(), rig);

  Json& s = g_partial.body;
  s["seed"] = cfg.base.seed;
  s["mp_scale"] = rep.mp_scale;
  s["ks_to_mp"] = rep.ks_to_mp;
  s["ks_to_dyson"] = rep.ks_to_dyson;
  s["l1_hist_vs_dyson"] = rep.l1_hist_vs_dyson;
  s["sup_dyson_vs_mp"] = rep.sup_dyson_vs_mp;
  s["eps_cov"] = rep.eps_cov;
  s["cov_dev"] = rep.cov_dev;
  s["s_max"] = rep.profile.s_max;
  s["atom"] = rep.dyson.atom;
  s["singular_hist_mass"] = rep.singular_hist_mass;
  s["dyson_converged"] = rep.dyson.converged;
  finish_report();
}

struct CltArgs {
  std::string config;
  std::optional<std::int64_t> M;
  std::optional<int> replicates;
};

void cmd_clt(const Common& common, const CltArgs& a) {
  const Json j = load_config(a.config, {"lambda", "margins", "dist", "M", "replicates",
                                        "sweep_M", "sweep_replicates", "seed"});
  CltConfig cfg;
  cfg.lambda = matrix_from_json(j.at("lambda"));
  cfg.margins = margins_from_json(j.at("margins"));
  cfg.dist = dist_kind_from_string(value_or<std::string>(j, "dist", "poisson"));
  cfg.M = a.M.value_or(value_or<std::int64_t>(j, "M", cfg.M));
  cfg.replicates = a.replicates.value_or(value_or(j, "replicates", cfg.replicates));
  cfg.seed = common.seed_given ? common.seed : value_or<std::uint64_t>(j, "seed", 0);
  cfg.workers = workers_for(common, true);

  const fs::path dir = output_dir(common);
  begin_report(dir, "clt.json");
  const CltReport rep = run_clt_experiment(cfg);
  Json& s = g_partial.body;
  s["seed"] = cfg.seed;
  s["M"] = rep.M;
  s["replicates"] = rep.replicates;
  s["failed"] = rep.failed;
  s["rel_frobenius"] = rep.rel_frobenius;
  s["rel_frobenius_cv"] = rep.rel_frobenius_cv;
  s["max_gauge_residual"] = rep.max_gauge_residual;
  s["theory_cov"] = matrix_to_json(rep.theory_cov);
  s["empirical_cov"] = matrix_to_json(rep.empirical_cov);
  s["skewness"] = vector_to_json(rep.skewness);
  s["excess_kurtosis"] = vector_to_json(rep.excess_kurtosis);
  s["ks_normal"] = vector_to_json(rep.ks_normal);
  write_matrix_csv((dir / "deviations.csv").string(), rep.deviations);

  if (j.contains("sweep_M")) {
    const auto Ms = j.at("sweep_M").get<std::vector<std::int64_t>>();
    const auto reps = j.contains("sweep_replicates")
                          ? j.at("sweep_replicates").get<std::vector<int>>()
                          : std::vector<int>(Ms.size(), cfg.replicates);
    if (reps.size() != Ms.size()) throw invalid("sweep_M and sweep_replicates differ in length");
    s["sweep"] = Json::array();
    for (const auto& row : run_clt_sweep(cfg, Ms, reps)) {
      s["sweep"].push_back({{"M", row.M},
                            {"replicates", row.replicates},
                            {"rel_frobenius", row.rel_frobenius},
                            {"rel_frobenius_cv", row.rel_frobenius_cv}});
    }
  }
  finish_report();
}

struct ConcentrationArgs {
  std::string config;
  std::optional<double> D, tol;
};

void cmd_concentration(const Common& common, const ConcentrationArgs& a) {
  const Json j = load_config(a.config, with_experiment_keys({"D", "sinkhorn_tol", "test_function"}));
  ConcentrationConfig cfg;
  cfg.base = experiment_from_json(j, common);
  cfg.D = a.D.value_or(value_or(j, "D", cfg.D));
  cfg.sinkhorn_tol = a.tol.value_or(value_or(j, "sinkhorn_tol", cfg.sinkhorn_tol));
  cfg.workers = workers_for(common, true);

  const fs::path dir = output_dir(common);
  begin_report(dir, "concentration.json");
  const ConcentrationReport rep = run_concentration_experiment(cfg);
  Json& s = g_partial.body;
  s["seed"] = cfg.base.seed;
  s["constants"] = constants_to_json(rep.constants);
  s["e1_bound"] = rep.e1_bound;
  s["e2_bound"] = rep.e2_bound;
  s["e3_bound"] = rep.e3_bound;
  s["trials"] = rep.trials.size();
  s["failed"] = rep.failed;
  s["median_gauge_distance"] = rep.median_gauge_distance;
  s["freq_e1"] = rep.freq_e1;
  s["freq_e2"] = rep.freq_e2;
  s["freq_e3"] = rep.freq_e3;
  s["joint_violations"] = rep.joint_violations;

  std::vector<std::vector<double>> cols(10);
  for (const auto& t : rep.trials) {
    const double row[] = {static_cast<double>(t.trial), t.scalable ? 1.0 : 0.0,
                          t.gauge_distance,             t.e1 ? 1.0 : 0.0,
                          t.e2_dev,                     t.e2 ? 1.0 : 0.0,
                          t.e3_dev,                     t.e3 ? 1.0 : 0.0,
                          t.noise_norm,                 t.cov_dev};
    for (std::size_t c = 0; c < cols.size(); ++c) cols[c].push_back(row[c]);
  }
  std::vector<Vector> vecs;
  for (const auto& c : cols) vecs.push_back(to_vector(c));
  write_text_file((dir / "trials.csv").string(),
                  columns_to_csv({"trial", "scalable", "gauge_distance", "e1", "e2_dev", "e2",
                                  "e3_dev", "e3", "noise_norm", "cov_dev"},
                                 vecs));

  if (j.contains("test_function")) {
    const TestFunctionReport tf =
        run_test_function_experiment(cfg, j.at("test_function").get<std::string>());
    s["test_function"] = {{"name", tf.g_name},
                          {"rhs", tf.rhs},
                          {"failed", tf.failed},
                          {"freq_holds", tf.freq_holds},
                          {"mean_lhs", tf.mean_lhs}};
  }
  finish_report();
}

struct LimitArgs {
  std::string config;
};

void cmd_limit(const Common& common, const LimitArgs& a) {
  LimitSpec spec;
  if (!a.config.empty()) {
    const Json j = load_config(a.config, {"row_margin", "col_margin", "row_slope", "col_slope",
                                          "kernel", "bandwidth", "k_min", "k_max", "ref_level"});
    auto shape = [&](const char* key, LimitShape fallback) {
      return j.contains(key) ? limit_shape_from_string(j.at(key).get<std::string>()) : fallback;
    };
    spec.row_margin = shape("row_margin", spec.row_margin);
    spec.col_margin = shape("col_margin", spec.col_margin);
    spec.kernel = shape("kernel", spec.kernel);
    spec.row_slope = value_or(j, "row_slope", spec.row_slope);
    spec.col_slope = value_or(j, "col_slope", spec.col_slope);
    spec.bandwidth = value_or(j, "bandwidth", spec.bandwidth);
    spec.k_min = value_or(j, "k_min", spec.k_min);
    spec.k_max = value_or(j, "k_max", spec.k_max);
    spec.ref_level = value_or(j, "ref_level", spec.ref_level);
  }
  const fs::path dir = output_dir(common);
  begin_report(dir, "limit.json");
  const LimitReport rep = run_deterministic_limit_experiment(spec);
  g_partial.body["K"] = rep.K;
  g_partial.body["delta"] = rep.delta;
  g_partial.body["all_hold"] = rep.all_hold;
  g_partial.body["lhs_decreasing"] = rep.lhs_decreasing;
  std::string csv = "k,size,lhs,rhs,l1_r,l1_c,dH_ref,holds\n";
  for (const auto& r : rep.rows) {
    csv += std::to_string(r.k) + "," + std::to_string(r.size) + "," + format_double(r.lhs) +
           "," + format_double(r.rhs) + "," + format_double(r.l1_r) + "," +
           format_double(r.l1_c) + "," + format_double(r.dH_ref) + "," +
           (r.holds ? "1" : "0") + "\n";
  }
  write_text_file((dir / "limit.csv").string(), csv);
  finish_report();
}

int report_error(const std::string& code, const std::string& message, int exit_code) {
  Json err = {{"error", code}, {"message", message}, {"exit_code", exit_code}};
  if (!g_partial.path.empty()) {
    g_partial.body["error"] = err;
    try {
      write_json_file(g_partial.path.string(), g_partial.body);
    } catch (const std::exception&) {
    }
  }
  std::cerr << err.dump() << "\n";
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sinkhorn scaling, stability constants and spectral experiments"};
  app.require_subcommand(1);

  Common common;
  app.add_option("--seed", common.seed, "Random seed (default 0)");
  app.add_option("--out", common.out, "Output directory (default $SB_OUTPUT_DIR or .)");
  app.add_option("--workers", common.workers,
                 "Worker threads (default: all cores for Monte Carlo, else 1)");

  ScaleArgs scale;
  auto* sc = app.add_subcommand("scale", "Sinkhorn-scale a matrix to given margins");
  sc->add_option("--matrix", scale.matrix, "Matrix CSV")->required();
  sc->add_option("--margins", scale.margins, "Margins JSON {r, c}")->required();
  sc->add_option("--tol", scale.tol, "Relative margin tolerance");
  sc->add_option("--max-iter", scale.max_iter);
  sc->add_option("--gauge", scale.gauge, "BetaCWeighted | MaxEqualized | KernelOrthogonal");

  CheckArgs check;
  auto* ch = app.add_subcommand("check", "Decide scalability (Menon-Schneider)");
  ch->add_option("--matrix", check.matrix)->required();
  ch->add_option("--margins", check.margins)->required();
  ch->add_flag("--exact", check.exact, "Exact subset enumeration only");

  ConstantsArgs consts;
  auto* co = app.add_subcommand("constants", "Evaluate the stability and concentration constants");
  co->add_option("--config", consts.config, "Experiment config JSON");
  co->add_option("--matrix", consts.matrix, "Mean matrix CSV");
  co->add_option("--margins", consts.margins);
  co->add_option("--dist", consts.dist);
  co->add_option("--D", consts.D);
  co->add_option("--sigma", consts.sigma);
  co->add_option("--R", consts.R);

  SweepArgs sweep;
  auto* sw = app.add_subcommand("stability-sweep", "Check the stability inequalities on random instances");
  sw->add_option("--kind", sweep.kind,
                 "all | stability | potential | sandwich | containment | scalability");
  sw->add_option("--instances", sweep.instances);

  DysonArgs dyson;
  auto* dy = app.add_subcommand("dyson", "Solve the Dyson equation for a variance profile");
  dy->add_option("--profile", dyson.profile, "Variance profile CSV")->required();
  dy->add_option("--grid-points", dyson.grid_points);
  dy->add_option("--grid-upper", dyson.grid_upper);
  dy->add_option("--tol", dyson.tol);
  dy->add_option("--eta", dyson.eta, "Eta ladder, comma separated")->delimiter(',');

  EsdArgs esd;
  auto* es = app.add_subcommand("esd", "Empirical spectral distribution against the Dyson prediction");
  es->add_option("--config", esd.config)->required();
  es->add_option("--grid-points", esd.grid_points);
  es->add_option("--D", esd.D);
  es->add_option("--tol", esd.tol, "Sinkhorn tolerance for the sample");
  es->add_option("--eta", esd.eta)->delimiter(',');

  CltArgs clt;
  auto* cl = app.add_subcommand("clt", "Covariance of the empirical potentials");
  cl->add_option("--config", clt.config)->required();
  cl->add_option("--M", clt.M);
  cl->add_option("--replicates", clt.replicates);

  ConcentrationArgs conc;
  auto* cn = app.add_subcommand("concentration", "Monte Carlo concentration of the potentials");
  cn->add_option("--config", conc.config)->required();
  cn->add_option("--D", conc.D);
  cn->add_option("--tol", conc.tol);

  LimitArgs limit;
  auto* li = app.add_subcommand("limit", "Deterministic scaling limit on refining grids");
  li->add_option("--config", limit.config);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  common.seed_given = app.count("--seed") > 0;

  try {
    if (sc->parsed()) cmd_scale(common, scale);
    if (ch->parsed()) cmd_check(common, check);
    if (co->parsed()) cmd_constants(common, consts);
    if (sw->parsed()) cmd_stability_sweep(common, sweep);
    if (dy->parsed()) cmd_dyson(common, dyson);
    if (es->parsed()) cmd_esd(common, esd);
    if (cl->parsed()) cmd_clt(common, clt);
    if (cn->parsed()) cmd_concentration(common, conc);
    if (li->parsed()) cmd_limit(common, limit);
  } catch (const Error& e) {
    return report_error(to_string(e.code()), e.what(), e.is_numeric() ? 2 : 1);
  } catch (const Json::exception& e) {
    return report_error("InvalidConfig", e.what(), 1);
  } catch (const std::exception& e) {
    return report_error("InvalidArgument", e.what(), 1);
  }
  return 0;
}
