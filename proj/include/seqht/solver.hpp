#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "seqht/diagnostic.hpp"
#include "seqht/dp_engine.hpp"

namespace seqht {

struct SolverConfig {
  int horizon = 32;              // initial K_max
  int grid_points_per_dim = 0;   // 0: 2001 in 1-D, 401 per axis in 2-D
  double grid_width_sigmas = 6.0;
  int quadrature_nodes = 64;
  double convergence_tol = 1e-4;
  int max_horizon = 512;
  int threads = 0;               // 0: hardware concurrency
};

/// Throws InvalidSolverConfig naming the offending field.
void validate(const SolverConfig& cfg);
GridSettings grid_settings(const SolverConfig& cfg);

struct PolicyTable {
  DpModel model;
  std::vector<StageTable> stages;  // k = 0..K_max
  double bayes_risk = 0.0;
  SolverConfig config;
  std::uint64_t digest = 0;
  std::vector<std::pair<int, double>> sweep;  // (K_max, risk) visited while extending

  int horizon() const { return static_cast<int>(stages.size()) - 1; }
  int hypotheses() const { return model.hypotheses; }
  int modes() const { return model.mode_count(); }
};

/// Base problem as a one-mode DP over the DSS.
DpModel build_model(const HypothesisSet& hs, const DiagnosticFactorization& fac,
                    int quadrature_nodes);

/// Throws RankTooHigh for r >= 3 and HorizonNotConverged when the root value
/// still moves by more than convergence_tol at max_horizon.
PolicyTable solve(const HypothesisSet& hs, const DiagnosticFactorization& fac,
                  const SolverConfig& cfg);

/// Horizon doubling from cfg.horizon to cfg.max_horizon.
PolicyTable solve_model(DpModel model, const SolverConfig& cfg);

/// Single backward pass at a fixed K_max.
PolicyTable solve_fixed(DpModel model, const SolverConfig& cfg, int horizon);

/// Bellman evaluation at an arbitrary state against the stored next stage;
/// forced stop at k >= K_max.
NodeEval evaluate_state(const PolicyTable& pt, int k, const double* x);
Action decide(const PolicyTable& pt, int k, const double* x);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  Action action;
};

struct RegionReport {
  int k = 0;
  StageGrid grid;
  std::vector<Action> labels;       // one per node, row-major in 2-D
  std::vector<Interval> intervals;  // 1-D only: maximal runs of one label
};

/// Throws StageOutOfRange outside 0..K_max.
RegionReport acceptance_regions(const PolicyTable& pt, int k);

/// Forward propagation of the prior through the stored policy.
ForwardResult evaluate_policy_exact(const PolicyTable& pt);

}  // namespace seqht
