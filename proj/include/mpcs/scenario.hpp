#pragma once

#include <string>

#include "mpcs/sim.hpp"

namespace mpcs {

/// Fully validated in-memory scenario: plant, constraints, cost, controller,
/// and run settings. Parses from a plain-text block format (see README) with
/// line-anchored errors.
struct ScenarioConfig {
  Mat A, B;
  ConstraintSets sets;
  Mat Q, R;
  std::optional<Mat> P;  // terminal weight
  Controller controller;
  Vec x0;
  int steps = 100;
  std::string trace_out;
  std::string cert_out;
  Monitors monitors;

  SystemModel make_model() const { return SystemModel::linear(A, B); }
  StageCost make_cost() const { return StageCost::quadratic(Q, R); }
  std::optional<TerminalWeight> make_terminal() const {
    if (!P) return std::nullopt;
    return TerminalWeight::quadratic(*P);
  }
};

/// Throws ConfigError with a "line N:" prefix on malformed input.
ScenarioConfig parse_scenario(const std::string& text);

ScenarioConfig load_scenario_file(const std::string& path);

/// Inverse of parse_scenario: a serialized scenario reparses to an identical
/// one. Floating point uses 10 significant digits.
std::string serialize_scenario(const ScenarioConfig& cfg);

}  // namespace mpcs
