#include "eqmo/runner.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "eqmo/bsde.hpp"
#include "eqmo/moments.hpp"
#include "eqmo/scenario_io.hpp"
#include "eqmo/verification.hpp"

namespace eqmo {

using Json = nlohmann::ordered_json;

Command parse_command(std::string_view name) {
  if (name == "solve") return Command::solve;
  if (name == "verify") return Command::verify;
  if (name == "moments") return Command::moments;
  if (name == "homogeneity") return Command::homogeneity;
  if (name == "bsde") return Command::bsde;
  if (name == "mc") return Command::mc;
  throw Error(ErrorCode::InvalidArgument, "unknown command '" + std::string(name) + "'");
}

OutputFormat parse_format(std::string_view name) {
  if (name == "csv") return OutputFormat::csv;
  if (name == "json") return OutputFormat::json;
  throw Error(ErrorCode::InvalidArgument, "unknown format '" + std::string(name) + "'");
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("EQMO_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      throw Error(ErrorCode::InvalidArgument, "EQMO_SEED is not an unsigned integer");
    }
  }
  return kDefaultSeed;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::IoError, "SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

void write_atomically(const std::filesystem::path& target, const std::string& content) {
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename into " + target.string() + ": " + ec.message());
}

std::string render_table_json(const Artifact& table) {
  Json doc;
  doc["columns"] = table.columns;
  Json rows = Json::array();
  for (const auto& row : table.rows) {
    Json r = Json::array();
    for (double v : row) r.push_back(finite_or_null(v));
    rows.push_back(std::move(r));
  }
  doc["rows"] = std::move(rows);
  return doc.dump(2) + "\n";
}

Artifact document(std::string name, const Json& doc) {
  Artifact a;
  a.name = std::move(name);
  a.document = doc.dump(2) + "\n";
  return a;
}

Json witness_json(const std::optional<PhiWitness>& w) {
  if (!w) return nullptr;
  return Json{{"t", w->t}, {"index", w->index}, {"v", w->v}, {"phi", w->phi}};
}

struct Context {
  const RunConfig& config;
  ScenarioBundle bundle;
  Scheme scheme;
  std::size_t paths;
};

Json run_header(const Context& ctx, std::string_view command) {
  return Json{{"command", command},
              {"scenario", ctx.config.scenario_path},
              {"grid_n", ctx.bundle.market.grid_n},
              {"scheme", to_string(ctx.scheme)},
              {"seed", ctx.config.seed}};
}

double reference_gamma2_of(const ObjectiveSpec& objective) {
  const double a = objective.mean_weight();
  const double w2 = objective.linear_weight(2);
  if (!(a > 0.0) || !(w2 < 0.0))
    throw Error(ErrorCode::UnsupportedObjectiveClass,
                "a mean-variance reference needs a positive m1 weight and a negative linear q2 weight");
  return -w2 / a;
}

RunOutcome finish(const Context& ctx, const std::vector<Artifact>& artifacts, int exit_code) {
  return {exit_code, emit_outputs(artifacts, ctx.config.format, ctx.config.out_dir)};
}

RunOutcome run_solve(const Context& ctx) {
  const auto& b = ctx.bundle;
  const SweepResult sweep = backward_sweep(b.market, b.objective, ctx.scheme);
  Artifact table{"strategy", {"t", "u", "V", "D", "residual"}, {}, std::nullopt};
  double d_max = -INFINITY;
  for (std::size_t i = 0; i < sweep.strategy.size(); ++i) {
    table.rows.push_back(
        {sweep.strategy.times[i], sweep.strategy.values[i], sweep.variance_to_go[i], sweep.D[i], sweep.residuals[i]});
    d_max = std::max(d_max, sweep.D[i]);
  }
  Json summary = run_header(ctx, "solve");
  summary["max_residual"] = sweep.max_residual();
  summary["max_D"] = d_max;
  summary["second_order_ok"] = d_max <= 0.0;
  summary["u_initial"] = sweep.strategy.values.front();
  summary["u_horizon"] = sweep.strategy.values.back();
  summary["variance_initial"] = sweep.variance_to_go.front();
  return finish(ctx, {table, document("summary", summary)}, 0);
}

RunOutcome run_verify(const Context& ctx) {
  const auto& b = ctx.bundle;
  StrategyGrid strategy;
  std::string source;
  if (b.numerics.verify_strategy == VerifyTarget::sweep) {
    strategy = backward_sweep(b.market, b.objective, ctx.scheme).strategy;
    source = "sweep";
  } else {
    strategy = mv_closed_form(b.market, reference_gamma2_of(b.objective));
    source = "mv_closed_form";
  }
  strategy = strategy.scaled(b.numerics.verify_scale);
  const EquilibriumReport report =
      equilibrium_report(b.market, b.objective, strategy, default_v_grid(strategy), b.numerics.tolerance);

  Json doc = run_header(ctx, "verify");
  doc["strategy"] = source;
  doc["strategy_scale"] = b.numerics.verify_scale;
  doc["verdict"] = report.pass ? "pass" : "fail";
  doc["max_phi"] = report.max_phi;
  doc["tolerance"] = report.tolerance;
  doc["witness"] = witness_json(report.witness);
  doc["convention"] = report.convention;
  Json per_t = Json::array();
  for (const auto& s : report.per_t_summary) per_t.push_back(Json{{"t", s.t}, {"max_phi", s.max_phi}});
  doc["per_t_summary"] = std::move(per_t);
  return finish(ctx, {document("report", doc)}, report.pass ? 0 : 2);
}

RunOutcome run_moments(const Context& ctx) {
  const auto& b = ctx.bundle;
  const int n = std::max(b.numerics.mc_order, b.objective.max_order);
  const StrategyGrid strategy = backward_sweep(b.market, b.objective, ctx.scheme).strategy;
  Artifact table{"moments", {"t", "x", "m1", "V"}, {}, std::nullopt};
  for (int k = 2; k <= n; ++k) table.columns.push_back("m" + std::to_string(k));
  for (int k = 2; k <= n; ++k) table.columns.push_back("k" + std::to_string(k));
  table.columns.push_back("J");
  // Rows are conditioned on the expected wealth path from x0.
  double x = b.market.x0;
  const double dt = b.market.dt();
  for (std::size_t i = 0; i <= b.market.grid_n; ++i) {
    const MomentVector mv = conditional_moments(b.market, strategy, i, x, n);
    std::vector<double> row{b.market.time(i), x, mv.m1, mv.V};
    for (int k = 2; k <= n; ++k) row.push_back(mv.central_moment(k));
    for (int k = 2; k <= n; ++k) row.push_back(mv.cumulant_of(k));
    row.push_back(objective_value(b.objective, mv));
    table.rows.push_back(std::move(row));
    if (i < b.market.grid_n)
      x = std::exp(b.market.r[i] * dt) * (x + b.market.theta[i] * strategy.values[i] * dt);
  }
  return finish(ctx, {table}, 0);
}

RunOutcome run_homogeneity(const Context& ctx) {
  const auto& b = ctx.bundle;
  const double gamma2 = reference_gamma2_of(b.objective);
  const StrategyGrid mv = mv_closed_form(b.market, gamma2);
  const HomogeneityVerdict numeric =
      homogeneity_check_numeric(b.market, b.objective, default_v_grid(mv), b.numerics.tolerance);
  const bool predicate = homogeneity_predicate(b.objective);
  const bool agreement = predicate == numeric.holds;

  Json doc = run_header(ctx, "homogeneity");
  doc["gamma2"] = gamma2;
  doc["numeric"] = Json{{"verdict", numeric.holds ? "holds" : "fails"},
                        {"max_phi", numeric.max_phi},
                        {"tolerance", b.numerics.tolerance},
                        {"witness", witness_json(numeric.holds ? std::nullopt
                                                               : std::optional<PhiWitness>(numeric.witness))}};
  doc["predicate"] = predicate;
  doc["agreement"] = agreement;
  Json slope = Json::array();
  const Polynomial slope_poly = risk_slope_polynomial(b.objective);
  for (double c : slope_poly.coeffs()) slope.push_back(c);
  doc["risk_slope_polynomial"] = std::move(slope);
  doc["convention"] = kPerturbationConvention;
  return finish(ctx, {document("homogeneity", doc)}, agreement ? 0 : 2);
}

RunOutcome run_bsde(const Context& ctx) {
  const auto& b = ctx.bundle;
  const double gamma2 = reference_gamma2_of(b.objective);
  const StrategyGrid mv = mv_closed_form(b.market, gamma2);
  BsdeOptions options;
  options.degree = b.numerics.bsde_degree;
  options.z_bound = b.numerics.z_bound;
  options.picard_iterations = b.numerics.picard_iterations;

  PathSet paths = simulate_factors(FactorModel{}, b.market.T, b.market.grid_n, ctx.paths, ctx.config.seed,
                                   ctx.config.workers);

  // Manufactured solution xi = W_T^2, f = 0: Y_t = W_t^2 + (T - t).
  Artifact convergence{"bsde_convergence", {"grid_n", "y0", "y0_se", "abs_error", "sup_mse"}, {}, std::nullopt};
  DriverSpec manufactured;
  manufactured.driver = [](const DriverArgs&) { return 0.0; };
  manufactured.terminal = [&paths](std::size_t p, std::size_t) {
    const double w = paths.W(paths.W.rows() - 1, static_cast<Eigen::Index>(p));
    return w * w;
  };
  for (std::size_t factor : {4u, 2u, 1u}) {
    if (b.market.grid_n % factor != 0) continue;
    const PathSet coarse = paths.coarsened(factor);
    BsdeOptions mo = options;
    mo.degree = std::max(2, options.degree);
    const BsdeGrid g = solve_bsde(manufactured, coarse, mo);
    double sup_mse = 0.0;
    for (std::size_t i = 0; i <= coarse.steps(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const double tau = b.market.T - coarse.times[i];
      const double mse = (g.Y.row(r).array() - (coarse.W.row(r).array().square() + tau)).square().mean();
      sup_mse = std::max(sup_mse, mse);
    }
    convergence.rows.push_back({static_cast<double>(coarse.steps()), g.y0_mean, g.y0_standard_error,
                                std::abs(g.y0_mean - b.market.T), sup_mse});
  }

  paths.custom_state = simulate_wealth(b.market, mv, paths);
  BsdeOptions flow_options = options;
  flow_options.degree = 1;
  const DiagonalProcess diag =
      solve_flow_diagonal(mean_variance_adjoint_flow(b.market, mv, gamma2, paths), paths, flow_options,
                          ctx.config.workers);
  const std::vector<double> residual = diagonal_equilibrium_residual(b.market, diag);
  Artifact diagonal{"bsde_diagonal", {"t", "y_mean", "y_se", "z_mean", "residual"}, {}, std::nullopt};
  double max_residual = 0.0;
  for (std::size_t s = 0; s < residual.size(); ++s) {
    diagonal.rows.push_back({diag.times[s], diag.y_mean[s], diag.y_standard_error[s], diag.z_mean[s], residual[s]});
    max_residual = std::max(max_residual, std::abs(residual[s]));
  }

  Json summary = run_header(ctx, "bsde");
  summary["paths"] = ctx.paths;
  summary["gamma2"] = gamma2;
  summary["flow"] = "mean-variance adjoint flow under the mv_closed_form strategy";
  summary["max_abs_diagonal_residual"] = max_residual;
  return finish(ctx, {diagonal, convergence, document("bsde_summary", summary)}, 0);
}

RunOutcome run_mc(const Context& ctx) {
  const auto& b = ctx.bundle;
  const int n = b.numerics.mc_order;
  const StrategyGrid strategy = backward_sweep(b.market, b.objective, ctx.scheme).strategy;
  const MomentVector exact = conditional_moments(b.market, strategy, std::size_t{0}, b.market.x0, n);
  McOptions options;
  options.paths = ctx.paths;
  options.seed = ctx.config.seed;
  options.batches = b.numerics.batches;
  options.workers = ctx.config.workers;
  const McEstimate mc = mc_conditional_moments(b.market, strategy, 0.0, b.market.x0, n, options);

  Artifact table{"mc_comparison", {"order", "analytic", "mc", "standard_error", "z_score", "within_4se"}, {},
                 std::nullopt};
  bool all_within = true;
  for (int k = 1; k <= n; ++k) {
    const double a = k == 1 ? exact.m1 : exact.central_moment(k);
    const double m = k == 1 ? mc.moments.m1 : mc.moments.central_moment(k);
    const double se = k == 1 ? mc.m1_standard_error : mc.standard_errors[static_cast<std::size_t>(k)];
    const double z = se > 0.0 ? (m - a) / se : (m == a ? 0.0 : INFINITY);
    const bool within = std::abs(z) <= 4.0;
    all_within = all_within && within;
    table.rows.push_back({static_cast<double>(k), a, m, se, z, within ? 1.0 : 0.0});
  }
  return finish(ctx, {table}, all_within ? 0 : 2);
}

}  // namespace

std::string render_csv(const Artifact& table) {
  std::string out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) out += (c ? "," : "") + table.columns[c];
  out += "\n";
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + format_double(row[c]);
    out += "\n";
  }
  return out;
}

std::vector<ManifestEntry> emit_outputs(const std::vector<Artifact>& artifacts, OutputFormat format,
                                        const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<ManifestEntry> manifest;
  for (const auto& a : artifacts) {
    std::string name = a.name;
    std::string content;
    if (a.document) {
      name += ".json";
      content = *a.document;
    } else if (format == OutputFormat::csv) {
      name += ".csv";
      content = render_csv(a);
    } else {
      name += ".json";
      content = render_table_json(a);
    }
    write_atomically(out_dir / name, content);
    manifest.push_back({name, sha256_hex(content), content.size()});
  }
  Json doc = Json::array();
  for (const auto& e : manifest) doc.push_back(Json{{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}});
  write_atomically(out_dir / "manifest.json", doc.dump(2) + "\n");
  return manifest;
}

RunOutcome run_command(const RunConfig& config) {
  Context ctx{config, parse_scenario(config.scenario_path, config.grid_n), Scheme::explicit_scheme, 0};
  ctx.scheme = config.scheme.value_or(ctx.bundle.numerics.scheme);
  ctx.paths = config.paths.value_or(ctx.bundle.numerics.paths);
  switch (config.command) {
    case Command::solve: return run_solve(ctx);
    case Command::verify: return run_verify(ctx);
    case Command::moments: return run_moments(ctx);
    case Command::homogeneity: return run_homogeneity(ctx);
    case Command::bsde: return run_bsde(ctx);
    case Command::mc: return run_mc(ctx);
  }
  throw Error(ErrorCode::InvalidArgument, "unhandled command");
}

}  // namespace eqmo
