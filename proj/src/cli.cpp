#include "qtraj/cli.hpp"

#include <CLI11.hpp>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "qtraj/channel.hpp"
#include "qtraj/limit_theorems.hpp"
#include "qtraj/purification.hpp"
#include "qtraj/sampler.hpp"
#include "qtraj/transfer.hpp"

namespace qtraj {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitVerdict = 2;

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

uint64_t fnv1a(const std::string& bytes) {
  uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json matrix_json(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      row.push_back({m(r, c).real(), m(r, c).imag()});
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

CMatrix matrix_from(const json& rows) {
  int n = static_cast<int>(rows.size());
  int m = n > 0 ? static_cast<int>(rows[0].size()) : 0;
  CMatrix out(n, m);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < m; ++c) {
      out(r, c) = Complex(rows[r][c][0].get<double>(), rows[r][c][1].get<double>());
    }
  }
  return out;
}

// Everything an invocation needs to reproduce itself bit for bit.
struct RunContext {
  std::string command;
  json config;          // resolved parameters, instrument embedded
  fs::path out_dir;
  json manifest = json::object();

  void note_input(const std::string& path) {
    manifest[path] = format_double(0.0);  // replaced below
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a(read_file(path)));
    manifest[path] = buf;
  }

  void write_text(const std::string& name, const std::string& text) const {
    fs::create_directories(out_dir);
    std::ofstream out(out_dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (out_dir / name).string());
    out << text;
  }

  void write_json(const std::string& name, const json& j) const {
    write_text(name, j.dump(2) + "\n");
  }

  void finalize() const {
    json conf = config;
    conf["command"] = command;
    write_json("config.json", conf);
    write_json("manifest.json", manifest);
  }
};

struct CsvWriter {
  std::string text;

  void header(const std::vector<std::string>& cols) {
    for (size_t i = 0; i < cols.size(); ++i) {
      text += cols[i];
      text += i + 1 < cols.size() ? "," : "\n";
    }
  }
  void row(const std::vector<double>& vals) {
    for (size_t i = 0; i < vals.size(); ++i) {
      text += format_double(vals[i]);
      text += i + 1 < vals.size() ? "," : "\n";
    }
  }
};

// --instrument accepts a builtin spec like "dr(0.3,1.0)" or a JSON file path.
Instrument resolve_instrument(const std::string& spec, double tol, RunContext& ctx) {
  Instrument ins;
  if (spec.size() > 5 && spec.substr(spec.size() - 5) == ".json") {
    LoadResult loaded = load_instrument(spec, tol);
    ctx.note_input(spec);
    if (!loaded.validation.passed) {
      throw std::runtime_error("instrument '" + spec + "' fails stochasticity: defect " +
                               format_double(loaded.validation.defect));
    }
    ins = std::move(loaded.instrument);
  } else {
    ins = builtin(spec);
  }
  ctx.config["instrument_spec"] = spec;
  ctx.config["instrument"] = json::parse(instrument_to_json(ins));
  return ins;
}

Instrument instrument_from_config(const json& config, double tol) {
  auto loaded = instrument_from_json(config["instrument"].dump(), tol);
  return loaded.instrument;
}

// --observable forms: "const:c", "diag:a,b,...", "quad:file.json"
Observable resolve_observable(const std::string& spec, int dim, RunContext& ctx) {
  ctx.config["observable_spec"] = spec;
  if (spec.rfind("const:", 0) == 0) {
    double c = std::stod(spec.substr(6));
    ctx.config["observable"] = {{"kind", "const"}, {"value", c}};
    return Observable::constant(c);
  }
  if (spec.rfind("diag:", 0) == 0) {
    std::stringstream ss(spec.substr(5));
    std::string token;
    std::vector<double> entries;
    while (std::getline(ss, token, ',')) entries.push_back(std::stod(token));
    if (static_cast<int>(entries.size()) != dim) {
      throw std::runtime_error("observable 'diag:' needs " + std::to_string(dim) + " entries");
    }
    CMatrix a = CMatrix::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) a(i, i) = entries[static_cast<size_t>(i)];
    ctx.config["observable"] = {{"kind", "quad"}, {"matrix", matrix_json(a)}};
    return Observable::quadratic(a);
  }
  if (spec.rfind("quad:", 0) == 0) {
    std::string path = spec.substr(5);
    json j = json::parse(read_file(path));
    ctx.note_input(path);
    CMatrix a = matrix_from(j.at("matrix"));
    if (a.rows() != dim) throw std::runtime_error("observable matrix dim mismatch");
    CMatrix herm = 0.5 * (a + a.adjoint());
    ctx.config["observable"] = {{"kind", "quad"}, {"matrix", matrix_json(herm)}};
    return Observable::quadratic(herm);
  }
  throw std::runtime_error("unknown observable spec '" + spec + "'");
}

Observable observable_from_config(const json& config) {
  if (!config.contains("observable")) return Observable::zero();
  const json& obs = config["observable"];
  if (obs["kind"] == "const") return Observable::constant(obs["value"].get<double>());
  return Observable::quadratic(matrix_from(obs["matrix"]));
}

std::vector<double> parse_grid(const std::string& spec) {
  // "a:b:step"
  double a, b, step;
  if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &a, &b, &step) != 3 || step <= 0.0) {
    throw std::runtime_error("grid spec must be a:b:step with step > 0");
  }
  std::vector<double> grid;
  for (double x = a; x <= b + 1e-12; x += step) grid.push_back(x);
  return grid;
}

std::vector<int> parse_int_list(const std::string& spec) {
  std::stringstream ss(spec);
  std::string token;
  std::vector<int> out;
  while (std::getline(ss, token, ',')) out.push_back(std::stoi(token));
  if (out.empty()) throw std::runtime_error("empty integer list");
  return out;
}

struct GlobalFlags {
  uint64_t seed = 0;
  int threads = 1;
  std::string out = "qtraj-out";
  double tol = 1e-9;
};

// ---------------------------------------------------------------------------
// command payloads: each returns the exit code after writing its outputs

int cmd_validate(const Instrument& ins, double tol, RunContext& ctx) {
  ValidationReport report = validate(ins, tol);
  ctx.write_json("report.json", {{"defect", report.defect},
                                 {"tolerance", report.tolerance},
                                 {"passed", report.passed}});
  ctx.finalize();
  return report.passed ? kExitOk : kExitVerdict;
}

int cmd_analyze_channel(const Instrument& ins, double tol, RunContext& ctx) {
  json out;
  ErgReport erg = erg_check(ins, tol);
  out["erg"] = {{"holds", erg.holds}, {"fixed_space_dim", erg.fixed_space_dim}};
  if (erg.holds) {
    out["erg"]["invariant_state"] = matrix_json(erg.invariant_state);
    out["erg"]["e_basis"] = matrix_json(erg.e_basis);
    CycleDecomposition cd = period_and_cycles(ins, tol);
    out["period"] = cd.period;
    json cycles = json::array();
    for (int r = 0; r < cd.period; ++r) {
      cycles.push_back({{"e_basis", matrix_json(cd.e_bases[static_cast<size_t>(r)])},
                        {"m_op", matrix_json(cd.m_ops[static_cast<size_t>(r)])},
                        {"rho", matrix_json(cd.rho[static_cast<size_t>(r)])}});
    }
    out["cycles"] = std::move(cycles);
  }
  PurReport pur = pur_necessary_check(ins);
  out["purification"] = {
      {"verdict", pur.verdict == PurVerdict::Holds
                      ? "holds"
                      : (pur.verdict == PurVerdict::Fails ? "fails" : "inconclusive")},
      {"heuristic", pur.heuristic},
      {"lambda_hat", pur.lambda_hat}};
  out["log_moment"] = log_moment_report(ins);
  ctx.write_json("channel.json", out);
  ctx.finalize();
  return kExitOk;
}

int cmd_purification(const Instrument& ins, int nmax, int mc_samples, uint64_t seed,
                     RunContext& ctx) {
  CsvWriter csv;
  csv.header({"n", "g_exact", "g_mc", "stderr"});
  for (int n = 1; n <= nmax; ++n) {
    double exact = g_exact(ins, n);
    McEstimate mc = g_mc(ins, n, mc_samples, seed + static_cast<uint64_t>(n));
    csv.row({static_cast<double>(n), exact, mc.value, mc.stderr_});
  }
  ctx.write_text("g_series.csv", csv.text);
  PurReport pur = pur_necessary_check(ins);
  ctx.write_json("verdict.json",
                 {{"verdict", pur.verdict == PurVerdict::Holds
                                  ? "holds"
                                  : (pur.verdict == PurVerdict::Fails ? "fails"
                                                                      : "inconclusive")},
                  {"heuristic", pur.heuristic},
                  {"lambda_hat", pur.lambda_hat}});
  ctx.finalize();
  return kExitOk;
}

int cmd_simulate(const Instrument& ins, const RunConfig& cfg, RunContext& ctx) {
  EnsembleStats stats = run(ins, cfg);
  CsvWriter csv;
  if (cfg.track_product) {
    csv.header({"traj", "sum_h", "log_norm", "log_opnorm"});
  } else {
    csv.header({"traj", "sum_h", "log_norm"});
  }
  for (size_t t = 0; t < stats.terminal_sum_h.size(); ++t) {
    std::vector<double> row{static_cast<double>(t), stats.terminal_sum_h[t],
                            stats.terminal_log_norm[t]};
    if (cfg.track_product) row.push_back(stats.terminal_log_opnorm[t]);
    csv.row(row);
  }
  ctx.write_text("trajectories.csv", csv.text);
  ctx.write_json("summary.json", {{"mean_sum_h", stats.mean_sum_h},
                                  {"var_sum_h", stats.var_sum_h},
                                  {"mean_log_norm", stats.mean_log_norm},
                                  {"var_log_norm", stats.var_log_norm},
                                  {"occupation_size", stats.occupation.size()}});
  ctx.finalize();
  return kExitOk;
}

int cmd_spectrum(const Instrument& ins, int mesh_size, MeshKind kind, uint64_t mesh_seed,
                 int count, double gap_tol, int dense_cutoff, RunContext& ctx) {
  Mesh mesh = build_mesh(ins.dim, mesh_size, kind, mesh_seed);
  DiscretizedKernel kernel = discretize(ins, mesh, TiltNone{});
  SpectrumReport report = leading_spectrum(kernel, count, gap_tol, dense_cutoff);
  json evs = json::array();
  for (const Complex& ev : report.eigenvalues) evs.push_back({ev.real(), ev.imag()});
  ctx.write_json("spectrum.json", {{"eigenvalues", evs},
                                   {"spectral_gap", report.spectral_gap},
                                   {"period_estimate", report.period_estimate}});
  ctx.finalize();
  return kExitOk;
}

int cmd_scgf(const Instrument& ins, const Observable& h, TiltFamily family,
             const std::vector<double>& grid, int mesh_size, MeshKind kind,
             uint64_t mesh_seed, RunContext& ctx) {
  Mesh mesh = build_mesh(ins.dim, mesh_size, kind, mesh_seed);
  KernelPlan plan = build_plan(ins, mesh, h);
  auto curve = scgf_curve(plan, family, grid);
  CsvWriter csv;
  csv.header({"parameter", "value"});
  for (auto [param, value] : curve) csv.row({param, value});
  ctx.write_text("scgf.csv", csv.text);
  ctx.finalize();
  return kExitOk;
}

int cmd_lyapunov(const Instrument& ins, const RunConfig& cfg, int mesh_size,
                 MeshKind kind, uint64_t mesh_seed, RunContext& ctx) {
  Mesh mesh = build_mesh(ins.dim, mesh_size, kind, mesh_seed);
  KernelPlan plan = build_plan(ins, mesh);
  CumulantCurve upsilon = cumulant_curve(plan, TiltFamily::Lyapunov, {-0.1, 0.0, 0.1});
  GammaEstimates est = gamma_estimates(ins, cfg, upsilon);
  ctx.write_json("lyapunov.json", {{"gamma_traj", est.traj},
                                   {"gamma_traj_stderr", est.traj_stderr},
                                   {"gamma_integral", est.integral},
                                   {"gamma_slope", est.slope}});
  ctx.finalize();
  return kExitOk;
}

int cmd_clt(const Instrument& ins, StatMode mode, const Observable& h, int n_steps,
            int m_traj, uint64_t seed, int threads, RunContext& ctx) {
  // centering and scale from an independent calibration stream
  BerryEsseenScan calib =
      berry_esseen_scan(ins, mode, h, {n_steps}, std::max(1000, m_traj / 4),
                        seed ^ 0x5eedull, threads);
  RunConfig cfg;
  cfg.n_steps = n_steps;
  cfg.n_traj = m_traj;
  cfg.seed = seed;
  cfg.threads = threads;
  cfg.max_occupation = 0;
  cfg.h = mode == StatMode::Observable ? h : Observable::zero();
  cfg.track_product = mode == StatMode::LogNormOp;
  EnsembleStats stats = run(ins, cfg);
  const std::vector<double>& raw = mode == StatMode::Observable
                                       ? stats.terminal_sum_h
                                       : (mode == StatMode::LogNormX
                                              ? stats.terminal_log_norm
                                              : stats.terminal_log_opnorm);
  std::vector<double> normalized(raw.size());
  double sqrt_n = std::sqrt(static_cast<double>(n_steps));
  for (size_t i = 0; i < raw.size(); ++i) {
    normalized[i] = (raw[i] - calib.center * n_steps) / sqrt_n;
  }
  double sigma2 = calib.sigma * calib.sigma;
  CltReport report = clt_check(normalized, sigma2, n_steps);
  CsvWriter csv;
  csv.header({"sample"});
  for (double x : normalized) csv.row({x});
  ctx.write_text("samples.csv", csv.text);
  ctx.write_json("verdict.json", {{"pass", report.pass},
                                  {"ks_distance", report.ks_distance},
                                  {"threshold", report.threshold},
                                  {"sigma2", report.sigma2},
                                  {"degenerate", report.degenerate},
                                  {"n", report.n},
                                  {"samples", report.samples}});
  ctx.finalize();
  return report.pass ? kExitOk : kExitVerdict;
}

int cmd_berry_esseen(const Instrument& ins, StatMode mode, const Observable& h,
                     const std::vector<int>& n_list, int m_traj, uint64_t seed,
                     int threads, bool reference, RunContext& ctx) {
  BerryEsseenScan scan = reference
                             ? berry_esseen_reference(n_list, m_traj, seed)
                             : berry_esseen_scan(ins, mode, h, n_list, m_traj, seed, threads);
  CsvWriter csv;
  csv.header({"n", "dist", "dist_sqrt_n", "dist_n14"});
  for (const auto& row : scan.rows) {
    csv.row({static_cast<double>(row.n), row.dist, row.dist_sqrt_n, row.dist_n14});
  }
  ctx.write_text("berry_esseen.csv", csv.text);
  ctx.write_json("verdict.json",
                 {{"bounded", scan.bounded}, {"center", scan.center}, {"sigma", scan.sigma}});
  ctx.finalize();
  return scan.bounded ? kExitOk : kExitVerdict;
}

int cmd_ldp(const Instrument& ins, StatMode mode, const Observable& h, double a,
            bool auto_a, double a_sigmas, const std::vector<int>& n_list, int m_traj,
            uint64_t seed, int threads, const std::vector<double>& grid, int mesh_size,
            MeshKind kind, uint64_t mesh_seed, RunContext& ctx) {
  Mesh mesh = build_mesh(ins.dim, mesh_size, kind, mesh_seed);
  KernelPlan plan = build_plan(ins, mesh, h);
  TiltFamily family =
      mode == StatMode::Observable ? TiltFamily::Observable : TiltFamily::Lyapunov;
  CumulantCurve curve = cumulant_curve(plan, family, grid);
  if (auto_a) {
    a = curve.d1_at0 + a_sigmas * std::sqrt(std::max(curve.d2_at0, 0.0));
    ctx.config["a_resolved"] = a;
  }
  std::vector<double> x_grid{a};
  RateFunction rate = legendre_transform(curve, x_grid);
  LdpScan scan = ldp_check(ins, mode, h, a, n_list, m_traj, seed, rate, threads);
  CsvWriter csv;
  csv.header({"n", "p_hat", "rate", "reachable"});
  for (const auto& row : scan.rows) {
    csv.row({static_cast<double>(row.n), row.p_hat, row.rate,
             row.reachable ? 1.0 : 0.0});
  }
  ctx.write_text("ldp.csv", csv.text);
  ctx.write_json("verdict.json", {{"pass", scan.pass},
                                  {"rate_target", scan.rate_target},
                                  {"a", a},
                                  {"in_domain", rate.in_domain[0]}});
  ctx.finalize();
  return scan.pass ? kExitOk : kExitVerdict;
}

int cmd_scalar_checks(int nmax, Complex z, double theta, double t_max, int t_points,
                      double r, RunContext& ctx) {
  std::vector<double> grid;
  for (int i = 1; i <= t_points; ++i) {
    grid.push_back(t_max * static_cast<double>(i) / t_points);
  }
  auto checks = scalar_f_checks(nmax, z, theta, grid, r);
  CsvWriter csv;
  csv.header({"pass", "worst_margin"});
  json names = json::array();
  bool all_pass = true;
  for (const auto& check : checks) {
    csv.row({check.pass ? 1.0 : 0.0, check.worst_margin});
    names.push_back(check.name);
    all_pass = all_pass && check.pass;
  }
  ctx.write_text("scalar_checks.csv", csv.text);
  ctx.write_json("verdict.json", {{"pass", all_pass}, {"checks", names}});
  ctx.finalize();
  return all_pass ? kExitOk : kExitVerdict;
}

// ---------------------------------------------------------------------------

RunConfig run_config_from(const json& config) {
  RunConfig cfg;
  cfg.n_steps = config["steps"].get<int>();
  cfg.n_traj = config["traj"].get<int>();
  cfg.seed = config["seed"].get<uint64_t>();
  cfg.burn_in = config.value("burn_in", 0);
  cfg.track_product = config.value("track_product", false);
  cfg.threads = config.value("threads", 1);
  if (config.contains("initial") && config["initial"] != "haar") {
    cfg.initial = InitialKind::FixedPoint;
    std::string init = config["initial"].get<std::string>();
    int idx = std::stoi(init.substr(1));  // "e0", "e1", ...
    cfg.initial_point = ProjectivePoint::basis(config["instrument"]["dim"].get<int>(), idx);
  }
  return cfg;
}

StatMode mode_from(const std::string& name) {
  if (name == "obs") return StatMode::Observable;
  if (name == "lognormx") return StatMode::LogNormX;
  if (name == "lognormop") return StatMode::LogNormOp;
  throw std::runtime_error("unknown mode '" + name + "' (obs|lognormx|lognormop)");
}

MeshKind mesh_kind_from(const std::string& name) {
  if (name == "fibonacci") return MeshKind::Fibonacci;
  if (name == "haar") return MeshKind::Haar;
  throw std::runtime_error("unknown mesh kind '" + name + "'");
}

int run_from_config(const json& config, const fs::path& out_dir);

int replay(const std::string& config_path, const std::string& out_dir) {
  fs::path path(config_path);
  if (fs::is_directory(path)) path /= "config.json";
  json config = json::parse(read_file(path.string()));
  if (!config.contains("command")) {
    throw std::runtime_error("replay: config lacks a 'command' field");
  }
  return run_from_config(config, out_dir);
}

// Re-runs a previously emitted resolved config. All parameters, including the
// full instrument, come from the config so the outputs are bit-identical.
int run_from_config(const json& config, const fs::path& out_dir) {
  RunContext ctx;
  ctx.command = config["command"].get<std::string>();
  ctx.out_dir = out_dir;
  ctx.config = config;
  ctx.config.erase("command");
  double tol = config.value("tol", 1e-9);
  const std::string& command = ctx.command;

  if (command == "scalar-checks") {
    return cmd_scalar_checks(config["nmax"].get<int>(),
                             Complex(config["z_re"].get<double>(), config["z_im"].get<double>()),
                             config["theta"].get<double>(), config["t_max"].get<double>(),
                             config["t_points"].get<int>(), config["r"].get<double>(), ctx);
  }

  Instrument ins = instrument_from_config(config, tol);
  if (command == "validate") return cmd_validate(ins, tol, ctx);
  if (command == "analyze-channel") return cmd_analyze_channel(ins, tol, ctx);
  if (command == "purification") {
    return cmd_purification(ins, config["nmax"].get<int>(), config["mc_samples"].get<int>(),
                            config["seed"].get<uint64_t>(), ctx);
  }
  if (command == "simulate") {
    RunConfig cfg = run_config_from(config);
    cfg.h = observable_from_config(config);
    return cmd_simulate(ins, cfg, ctx);
  }
  if (command == "spectrum") {
    return cmd_spectrum(ins, config["mesh_size"].get<int>(),
                        mesh_kind_from(config["mesh_kind"].get<std::string>()),
                        config["mesh_seed"].get<uint64_t>(), config["count"].get<int>(),
                        config["gap_tol"].get<double>(), config["dense_cutoff"].get<int>(),
                        ctx);
  }
  if (command == "scgf") {
    return cmd_scgf(ins, observable_from_config(config),
                    config["tilt"] == "obs" ? TiltFamily::Observable : TiltFamily::Lyapunov,
                    parse_grid(config["grid"].get<std::string>()),
                    config["mesh_size"].get<int>(),
                    mesh_kind_from(config["mesh_kind"].get<std::string>()),
                    config["mesh_seed"].get<uint64_t>(), ctx);
  }
  if (command == "lyapunov") {
    RunConfig cfg = run_config_from(config);
    return cmd_lyapunov(ins, cfg, config["mesh_size"].get<int>(),
                        mesh_kind_from(config["mesh_kind"].get<std::string>()),
                        config["mesh_seed"].get<uint64_t>(), ctx);
  }
  if (command == "clt") {
    return cmd_clt(ins, mode_from(config["mode"].get<std::string>()),
                   observable_from_config(config), config["steps"].get<int>(),
                   config["traj"].get<int>(), config["seed"].get<uint64_t>(),
                   config.value("threads", 1), ctx);
  }
  if (command == "berry-esseen") {
    return cmd_berry_esseen(ins, mode_from(config["mode"].get<std::string>()),
                            observable_from_config(config),
                            parse_int_list(config["n_list"].get<std::string>()),
                            config["traj"].get<int>(), config["seed"].get<uint64_t>(),
                            config.value("threads", 1), config.value("reference", false),
                            ctx);
  }
  if (command == "ldp") {
    return cmd_ldp(ins, mode_from(config["mode"].get<std::string>()),
                   observable_from_config(config), config.value("a", 0.0),
                   config.value("a_auto", true), config.value("a_sigmas", 0.5),
                   parse_int_list(config["n_list"].get<std::string>()),
                   config["traj"].get<int>(), config["seed"].get<uint64_t>(),
                   config.value("threads", 1),
                   parse_grid(config["grid"].get<std::string>()),
                   config["mesh_size"].get<int>(),
                   mesh_kind_from(config["mesh_kind"].get<std::string>()),
                   config["mesh_seed"].get<uint64_t>(), ctx);
  }
  throw std::runtime_error("replay: unknown command '" + command + "'");
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"quantum trajectory spectral toolbox"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags usable after the subcommand name

  GlobalFlags flags;
  app.add_option("--seed", flags.seed, "global RNG seed");
  app.add_option("--threads", flags.threads, "worker cap for trajectory ensembles");
  app.add_option("--out", flags.out, "output directory");
  app.add_option("--tol", flags.tol, "validation / spectral tolerance");

  std::string instrument_spec, observable_spec = "const:0", mode_name = "obs";
  std::string mesh_kind_name = "fibonacci", grid_spec = "-1.0:1.0:0.02", n_list_spec;
  std::string initial_spec = "haar";
  int steps = 1000, traj = 1000, burn_in = 0, nmax = 10, mc_samples = 10000;
  int mesh_size = 1000, count = 5, dense_cutoff = 800, t_points = 200;
  uint64_t mesh_seed = 1;
  double gap_tol = 1e-3, a_value = 0.0, a_sigmas = 0.5;
  double z_re = 1.5, z_im = 0.0, theta = 0.5, t_max = 10.0, hoelder_r = 0.0;
  bool track_product = false, reference = false;
  bool a_given = false;

  auto add_instrument = [&](CLI::App* cmd) {
    cmd->add_option("--instrument", instrument_spec,
                    "instrument file (.json) or builtin spec like dr(0.3,1.0)")
        ->required();
  };

  CLI::App* validate_cmd = app.add_subcommand("validate", "stochasticity check");
  add_instrument(validate_cmd);

  CLI::App* channel_cmd =
      app.add_subcommand("analyze-channel", "ergodicity, period, cycles, purification");
  add_instrument(channel_cmd);

  CLI::App* pur_cmd = app.add_subcommand("purification", "g(n) series, exact and MC");
  add_instrument(pur_cmd);
  pur_cmd->add_option("--nmax", nmax, "series length");
  pur_cmd->add_option("--mc-samples", mc_samples, "Monte Carlo samples per n");

  CLI::App* sim_cmd = app.add_subcommand("simulate", "trajectory ensembles");
  add_instrument(sim_cmd);
  sim_cmd->add_option("--steps", steps);
  sim_cmd->add_option("--traj", traj);
  sim_cmd->add_option("--burn-in", burn_in);
  sim_cmd->add_flag("--track-product", track_product);
  sim_cmd->add_option("--observable", observable_spec, "const:c | diag:a,b | quad:file");
  sim_cmd->add_option("--initial", initial_spec, "haar | e0 | e1 | ...");

  CLI::App* spec_cmd = app.add_subcommand("spectrum", "leading kernel eigenvalues");
  add_instrument(spec_cmd);
  spec_cmd->add_option("--mesh-size", mesh_size);
  spec_cmd->add_option("--mesh-kind", mesh_kind_name, "fibonacci | haar");
  spec_cmd->add_option("--mesh-seed", mesh_seed);
  spec_cmd->add_option("--count", count);
  spec_cmd->add_option("--gap-tol", gap_tol);
  spec_cmd->add_option("--dense-cutoff", dense_cutoff);

  CLI::App* scgf_cmd = app.add_subcommand("scgf", "scaled cumulant generating function");
  add_instrument(scgf_cmd);
  std::string tilt_name = "lyap";
  scgf_cmd->add_option("--tilt", tilt_name, "obs | lyap");
  scgf_cmd->add_option("--grid", grid_spec, "a:b:step");
  scgf_cmd->add_option("--observable", observable_spec);
  scgf_cmd->add_option("--mesh-size", mesh_size);
  scgf_cmd->add_option("--mesh-kind", mesh_kind_name);
  scgf_cmd->add_option("--mesh-seed", mesh_seed);

  CLI::App* lyap_cmd = app.add_subcommand("lyapunov", "three gamma estimators");
  add_instrument(lyap_cmd);
  lyap_cmd->add_option("--steps", steps);
  lyap_cmd->add_option("--traj", traj);
  lyap_cmd->add_option("--burn-in", burn_in);
  lyap_cmd->add_option("--mesh-size", mesh_size);
  lyap_cmd->add_option("--mesh-kind", mesh_kind_name);
  lyap_cmd->add_option("--mesh-seed", mesh_seed);
  lyap_cmd->add_option("--initial", initial_spec);

  CLI::App* clt_cmd = app.add_subcommand("clt", "KS test of the normalized statistic");
  add_instrument(clt_cmd);
  clt_cmd->add_option("--observable", observable_spec);
  clt_cmd->add_option("--mode", mode_name, "obs | lognormx | lognormop");
  clt_cmd->add_option("--steps", steps);
  clt_cmd->add_option("--traj", traj);

  CLI::App* be_cmd = app.add_subcommand("berry-esseen", "scaled CDF distance table");
  add_instrument(be_cmd);
  be_cmd->add_option("--observable", observable_spec);
  be_cmd->add_option("--mode", mode_name);
  be_cmd->add_option("--n-list", n_list_spec, "comma separated")->required();
  be_cmd->add_option("--traj", traj);
  be_cmd->add_flag("--reference", reference, "i.i.d. coin-flip calibration mode");

  CLI::App* ldp_cmd = app.add_subcommand("ldp", "restricted large deviation check");
  add_instrument(ldp_cmd);
  ldp_cmd->add_option("--observable", observable_spec);
  ldp_cmd->add_option("--mode", mode_name);
  ldp_cmd->add_option("--a", a_value)->each([&](const std::string&) { a_given = true; });
  ldp_cmd->add_option("--a-sigmas", a_sigmas, "a = mean + this * sigma when --a absent");
  ldp_cmd->add_option("--n-list", n_list_spec)->required();
  ldp_cmd->add_option("--traj", traj);
  ldp_cmd->add_option("--grid", grid_spec);
  ldp_cmd->add_option("--mesh-size", mesh_size);
  ldp_cmd->add_option("--mesh-kind", mesh_kind_name);
  ldp_cmd->add_option("--mesh-seed", mesh_seed);

  CLI::App* scalar_cmd = app.add_subcommand("scalar-checks", "log-power function bounds");
  scalar_cmd->add_option("--nmax", nmax);
  scalar_cmd->add_option("--z-re", z_re);
  scalar_cmd->add_option("--z-im", z_im);
  scalar_cmd->add_option("--theta", theta);
  scalar_cmd->add_option("--t-max", t_max);
  scalar_cmd->add_option("--t-points", t_points);
  scalar_cmd->add_option("--r", hoelder_r);

  std::string replay_config;
  CLI::App* replay_cmd = app.add_subcommand("replay", "re-run an emitted config");
  replay_cmd->add_option("config", replay_config, "config.json or run directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    json config;
    RunContext ctx;
    ctx.out_dir = flags.out;
    ctx.config["seed"] = flags.seed;
    ctx.config["threads"] = flags.threads;
    ctx.config["tol"] = flags.tol;

    if (app.got_subcommand(replay_cmd)) {
      return replay(replay_config, flags.out);
    }
    if (app.got_subcommand(scalar_cmd)) {
      ctx.command = "scalar-checks";
      if (hoelder_r <= 0.0) hoelder_r = std::min(1.0, 0.75 * z_re);
      ctx.config["nmax"] = nmax;
      ctx.config["z_re"] = z_re;
      ctx.config["z_im"] = z_im;
      ctx.config["theta"] = theta;
      ctx.config["t_max"] = t_max;
      ctx.config["t_points"] = t_points;
      ctx.config["r"] = hoelder_r;
      return cmd_scalar_checks(nmax, Complex(z_re, z_im), theta, t_max, t_points,
                               hoelder_r, ctx);
    }

    Instrument ins = resolve_instrument(instrument_spec, flags.tol, ctx);

    if (app.got_subcommand(validate_cmd)) {
      ctx.command = "validate";
      return cmd_validate(ins, flags.tol, ctx);
    }
    if (app.got_subcommand(channel_cmd)) {
      ctx.command = "analyze-channel";
      return cmd_analyze_channel(ins, flags.tol, ctx);
    }
    if (app.got_subcommand(pur_cmd)) {
      ctx.command = "purification";
      ctx.config["nmax"] = nmax;
      ctx.config["mc_samples"] = mc_samples;
      return cmd_purification(ins, nmax, mc_samples, flags.seed, ctx);
    }
    if (app.got_subcommand(sim_cmd)) {
      ctx.command = "simulate";
      Observable h = resolve_observable(observable_spec, ins.dim, ctx);
      ctx.config["steps"] = steps;
      ctx.config["traj"] = traj;
      ctx.config["burn_in"] = burn_in;
      ctx.config["track_product"] = track_product;
      ctx.config["initial"] = initial_spec;
      RunConfig cfg = run_config_from(ctx.config);
      cfg.h = h;
      return cmd_simulate(ins, cfg, ctx);
    }
    if (app.got_subcommand(spec_cmd)) {
      ctx.command = "spectrum";
      ctx.config["mesh_size"] = mesh_size;
      ctx.config["mesh_kind"] = mesh_kind_name;
      ctx.config["mesh_seed"] = mesh_seed;
      ctx.config["count"] = count;
      ctx.config["gap_tol"] = gap_tol;
      ctx.config["dense_cutoff"] = dense_cutoff;
      return cmd_spectrum(ins, mesh_size, mesh_kind_from(mesh_kind_name), mesh_seed, count,
                          gap_tol, dense_cutoff, ctx);
    }
    if (app.got_subcommand(scgf_cmd)) {
      ctx.command = "scgf";
      Observable h = resolve_observable(observable_spec, ins.dim, ctx);
      ctx.config["tilt"] = tilt_name;
      ctx.config["grid"] = grid_spec;
      ctx.config["mesh_size"] = mesh_size;
      ctx.config["mesh_kind"] = mesh_kind_name;
      ctx.config["mesh_seed"] = mesh_seed;
      return cmd_scgf(ins, h,
                      tilt_name == "obs" ? TiltFamily::Observable : TiltFamily::Lyapunov,
                      parse_grid(grid_spec), mesh_size, mesh_kind_from(mesh_kind_name),
                      mesh_seed, ctx);
    }
    if (app.got_subcommand(lyap_cmd)) {
      ctx.command = "lyapunov";
      ctx.config["steps"] = steps;
      ctx.config["traj"] = traj;
      ctx.config["burn_in"] = burn_in;
      ctx.config["initial"] = initial_spec;
      ctx.config["mesh_size"] = mesh_size;
      ctx.config["mesh_kind"] = mesh_kind_name;
      ctx.config["mesh_seed"] = mesh_seed;
      RunConfig cfg = run_config_from(ctx.config);
      return cmd_lyapunov(ins, cfg, mesh_size, mesh_kind_from(mesh_kind_name), mesh_seed,
                          ctx);
    }
    if (app.got_subcommand(clt_cmd)) {
      ctx.command = "clt";
      Observable h = resolve_observable(observable_spec, ins.dim, ctx);
      ctx.config["mode"] = mode_name;
      ctx.config["steps"] = steps;
      ctx.config["traj"] = traj;
      return cmd_clt(ins, mode_from(mode_name), h, steps, traj, flags.seed, flags.threads,
                     ctx);
    }
    if (app.got_subcommand(be_cmd)) {
      ctx.command = "berry-esseen";
      Observable h = resolve_observable(observable_spec, ins.dim, ctx);
      ctx.config["mode"] = mode_name;
      ctx.config["n_list"] = n_list_spec;
      ctx.config["traj"] = traj;
      ctx.config["reference"] = reference;
      return cmd_berry_esseen(ins, mode_from(mode_name), h, parse_int_list(n_list_spec),
                              traj, flags.seed, flags.threads, reference, ctx);
    }
    if (app.got_subcommand(ldp_cmd)) {
      ctx.command = "ldp";
      Observable h = resolve_observable(observable_spec, ins.dim, ctx);
      ctx.config["mode"] = mode_name;
      ctx.config["a"] = a_value;
      ctx.config["a_auto"] = !a_given;
      ctx.config["a_sigmas"] = a_sigmas;
      ctx.config["n_list"] = n_list_spec;
      ctx.config["traj"] = traj;
      ctx.config["grid"] = grid_spec;
      ctx.config["mesh_size"] = mesh_size;
      ctx.config["mesh_kind"] = mesh_kind_name;
      ctx.config["mesh_seed"] = mesh_seed;
      return cmd_ldp(ins, mode_from(mode_name), h, a_value, !a_given, a_sigmas,
                     parse_int_list(n_list_spec), traj, flags.seed, flags.threads,
                     parse_grid(grid_spec), mesh_size, mesh_kind_from(mesh_kind_name),
                     mesh_seed, ctx);
    }
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
}

}  // namespace qtraj
