#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seqht/diagnostic.hpp"
#include "seqht/msprt.hpp"
#include "seqht/sampling.hpp"
#include "seqht/solver.hpp"

namespace seqht::cli {

inline constexpr const char* kConfigSchema = "seqht-config/1";

struct MsprtSettings {
  std::vector<double> grid = default_threshold_grid();
  int reps = 20000;
  int step_cap = 10000;
  std::optional<std::vector<double>> thresholds;  // fixed policy, skips tuning
};

struct SimSettings {
  int reps = 100000;
  std::uint64_t seed = 1;
};

/// One problem instance: either a base hypothesis set or a sampling-control
/// problem.
struct Problem {
  std::string name;
  std::optional<HypothesisSet> base;
  std::optional<SamplingProblem> sampling;

  bool is_sampling() const { return sampling.has_value(); }
  const FamilySpec& spec() const { return sampling ? sampling->spec : base->spec; }
};

struct ProblemConfig {
  std::string source_name;
  std::string text;          // document as loaded; embedded in policy files
  std::vector<Problem> problems;  // the `cells` list, or the single top-level problem
  bool has_cells = false;
  SolverConfig solver;
  double rank_tol = 1e-9;
  MsprtSettings msprt;
  SimSettings sim;

  const Problem& primary() const { return problems.front(); }
};

/// Throws seqht::Error(ConfigError) with "name:line:column: message".
ProblemConfig parse_config(const std::string& text, const std::string& source_name = "<config>");
ProblemConfig load_config(const std::string& path);

}  // namespace seqht::cli
