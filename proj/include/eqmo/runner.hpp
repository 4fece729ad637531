#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eqmo/equilibrium.hpp"

namespace eqmo {

enum class Command { solve, verify, moments, homogeneity, bsde, mc };
enum class OutputFormat { csv, json };

Command parse_command(std::string_view name);
OutputFormat parse_format(std::string_view name);

inline constexpr std::uint64_t kDefaultSeed = 42;

struct RunConfig {
  Command command = Command::solve;
  std::string scenario_path;
  std::filesystem::path out_dir = ".";
  std::uint64_t seed = kDefaultSeed;
  std::optional<std::size_t> grid_n;
  std::optional<std::size_t> paths;
  OutputFormat format = OutputFormat::csv;
  std::optional<Scheme> scheme;
  std::size_t workers = 0;
};

/// Seed precedence: explicit flag, then EQMO_SEED, then 42.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag);

/// A table or document ready to be written. Tables honour the run's format;
/// documents are always JSON.
struct Artifact {
  std::string name;  ///< file stem, extension added on emit
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::optional<std::string> document;  ///< pre-serialised JSON; set for documents
};

struct ManifestEntry {
  std::string path;
  std::string sha256;
  std::size_t bytes = 0;
};

struct RunOutcome {
  int exit_code = 0;  ///< 0 success, 2 verification failure, 1 error
  std::vector<ManifestEntry> manifest;
};

/// Renders a table as CSV: header line, LF endings, 17 significant digits.
std::string render_csv(const Artifact& table);

/// Writes each artifact atomically (temp file + rename) under out_dir, then a
/// manifest.json listing paths and SHA-256 hashes.
std::vector<ManifestEntry> emit_outputs(const std::vector<Artifact>& artifacts, OutputFormat format,
                                        const std::filesystem::path& out_dir);

/// Runs one command. Module errors propagate as eqmo::Error; callers map them to exit 1.
RunOutcome run_command(const RunConfig& config);

}  // namespace eqmo
