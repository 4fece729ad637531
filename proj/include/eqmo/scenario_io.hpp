#pragma once

// Scenario file format:
//
//   [market]
//   T = 1
//   x0 = 1
//   grid_n = 100
//   r = 0.0                 # scalar (constant) or comma list of grid_n + 1 values
//   theta = 0.3
//   sigma = 0.2
//
//   [objective]
//   mode = central          # or cumulant
//   term = 1:1 -> 1         # coeff * m1
//   term = 2:1 -> -1        # coeff * q2
//   term = 2:1,4:1 -> 0.5   # coeff * q2 * q4
//
//   [numerics]
//   scheme = explicit
//
//   [factor]                # optional
//   kind = ou
//
// Unknown sections or keys are errors.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "eqmo/bsde.hpp"
#include "eqmo/equilibrium.hpp"
#include "eqmo/model.hpp"

namespace eqmo {

enum class VerifyTarget { sweep, mv_closed_form };

struct Numerics {
  Scheme scheme = Scheme::explicit_scheme;
  double tolerance = 1e-8;
  std::size_t paths = 100000;
  std::size_t batches = 20;
  int mc_order = 6;
  int bsde_degree = 3;
  double z_bound = 50.0;
  int picard_iterations = 0;
  VerifyTarget verify_strategy = VerifyTarget::sweep;
  double verify_scale = 1.0;
};

struct ScenarioBundle {
  MarketScenario market;
  ObjectiveSpec objective;
  FactorModel factor;
  Numerics numerics;
};

/// Parses and validates. `grid_n_override` replaces the file's grid_n; scalar
/// parameters are broadcast to the final grid.
ScenarioBundle parse_scenario_text(std::string_view text, std::string_view source = "<memory>",
                                   std::optional<std::size_t> grid_n_override = std::nullopt);
ScenarioBundle parse_scenario(const std::string& path, std::optional<std::size_t> grid_n_override = std::nullopt);

}  // namespace eqmo
