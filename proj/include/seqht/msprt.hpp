#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "seqht/diagnostic.hpp"
#include "seqht/dp_engine.hpp"

namespace seqht {

/// Stop at the first k with pi_i >= A_i for some i and accept the lowest such
/// i. At k = step_cap, accept the one-shot Bayes decision instead.
struct MsprtPolicy {
  Eigen::VectorXd thresholds;
  int step_cap = 10000;
  Eigen::MatrixXd loss;  // used only for the forced decision at the cap
};

/// Throws InvalidSolverConfig for thresholds outside (0, 1) or step_cap < 1.
void validate(const MsprtPolicy& p);

Action msprt_step(const MsprtPolicy& p, const Belief& belief, int k);

/// argmin_j sum_i pi_i a_ij, lowest index on ties.
int bayes_decision(const Eigen::VectorXd& pi, const Eigen::MatrixXd& loss);

std::vector<double> default_threshold_grid();

struct ThresholdResult {
  Eigen::VectorXd thresholds;
  double mean_cost = 0.0;
  double stderr_cost = 0.0;
};

struct TuneResult {
  MsprtPolicy policy;
  double mean_cost = 0.0;
  double stderr_cost = 0.0;
  std::vector<ThresholdResult> table;  // every combination, in enumeration order
};

struct TuneOptions {
  int step_cap = 10000;
  int threads = 0;
  int batch = 1024;
  std::int64_t max_combinations = 2'000'000;
};

/// Evaluates every threshold combination on the same replications (stream
/// "tune" of the seed) and returns the cheapest, lowest index on ties.
TuneResult msprt_tune(const HypothesisSet& hs, const std::vector<double>& grid, int reps,
                      std::uint64_t seed, const TuneOptions& options = {});

}  // namespace seqht
