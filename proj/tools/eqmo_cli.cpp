// eqmo: batch front end for the equilibrium solver, verifier and BSDE tools.
//
//   eqmo --command solve --scenario scenarios/mv_constant.ini --out out/
//
// Exit status: 0 success, 2 verification failure, 1 error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "eqmo/error.hpp"
#include "eqmo/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Equilibrium strategies for higher-moment objectives"};
  std::string command = "solve";
  std::string scenario;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> grid_n;
  std::optional<std::size_t> paths;
  std::string format = "csv";
  std::optional<std::string> scheme;
  std::size_t workers = 0;

  app.add_option("--command", command, "solve | verify | moments | homogeneity | bsde | mc")
      ->check(CLI::IsMember({"solve", "verify", "moments", "homogeneity", "bsde", "mc"}));
  app.add_option("--scenario", scenario, "scenario file")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "RNG seed (default: EQMO_SEED, then 42)");
  app.add_option("--grid-n", grid_n, "override the scenario's grid_n");
  app.add_option("--paths", paths, "Monte Carlo paths");
  app.add_option("--format", format, "table format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--scheme", scheme, "sweep scheme")->check(CLI::IsMember({"explicit", "implicit"}));
  app.add_option("--workers", workers, "worker threads (0 = EQMO_WORKERS or hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    eqmo::RunConfig config;
    config.command = eqmo::parse_command(command);
    config.scenario_path = scenario;
    config.out_dir = out_dir;
    config.seed = eqmo::resolve_seed(seed);
    config.grid_n = grid_n;
    config.paths = paths;
    config.format = eqmo::parse_format(format);
    if (scheme) config.scheme = *scheme == "implicit" ? eqmo::Scheme::implicit_scheme : eqmo::Scheme::explicit_scheme;
    config.workers = workers;

    const eqmo::RunOutcome outcome = eqmo::run_command(config);
    for (const auto& entry : outcome.manifest) std::cout << entry.sha256 << "  " << entry.path << "\n";
    return outcome.exit_code;
  } catch (const eqmo::Error& e) {
    nlohmann::ordered_json diag{{"error", eqmo::to_string(e.code())}, {"message", e.what()},
                                {"diagnostics", e.diagnostics()}};
    std::cerr << diag.dump(2) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "Internal"}, {"message", e.what()}}.dump(2) << "\n";
    return 1;
  }
}
