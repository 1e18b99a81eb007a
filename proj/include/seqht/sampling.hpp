#pragma once

#include <Eigen/Dense>

#include <vector>

#include "seqht/diagnostic.hpp"
#include "seqht/solver.hpp"

namespace seqht {

/// Hypothesis i observed through mode a has parameters naturals[i][a]. Modes
/// are numbered 1..K in this interface.
struct SamplingProblem {
  FamilySpec spec;
  std::vector<std::vector<NaturalParam>> naturals;  // [i][a]
  Eigen::VectorXd prior;
  Eigen::MatrixXd loss;
  Eigen::MatrixXd mode_cost;  // (N+1) x K

  int count() const { return static_cast<int>(naturals.size()); }
  int modes() const { return naturals.empty() ? 0 : static_cast<int>(naturals[0].size()); }
};

SamplingProblem make_sampling_problem(
    const FamilySpec& spec, const std::vector<std::vector<std::vector<double>>>& alphas,
    const Eigen::VectorXd& prior, const Eigen::MatrixXd& loss, const Eigen::MatrixXd& mode_cost);

void validate(const SamplingProblem& sp);

/// The same problem observed through mode a only (1-based).
HypothesisSet single_mode_view(const SamplingProblem& sp, int mode);

struct SamplingFactorization {
  Eigen::MatrixXd Hs;  // N x (MK + K)
  Eigen::MatrixXd Ls;
  Eigen::MatrixXd Us;
  int rank = 0;
  int stat_dim = 1;
  int modes = 1;
  double tol = 1e-9;
};

/// Columns M(a-1)..Ma-1 hold eta(alpha_i^a) - eta(alpha_0^a); column MK+a-1
/// holds B(alpha_0^a) - B(alpha_i^a).
SamplingFactorization build_sampling_diagnostic(const SamplingProblem& sp, double tol = 1e-9);

struct SamplingDss {
  Eigen::VectorXd xs;
  int k = 0;

  static SamplingDss origin(int rank) { return {Eigen::VectorXd::Zero(rank), 0}; }
};

SamplingDss sampling_dss_update(const SamplingFactorization& fac, const FamilySpec& spec,
                                const SamplingDss& state, int mode, double y);

Belief reconstruct_belief_s(const SamplingFactorization& fac, const SamplingProblem& sp,
                            const SamplingDss& state);

/// Direct Bayes step using the mode-a densities.
Belief bayes_update_direct_mode(const SamplingProblem& sp, const Belief& belief, int mode,
                                double y);

/// DP model on a reduced statistic: the last mode's count column is folded
/// into the stage index (k = sum of counts), so K = 1 gives the base model.
DpModel build_sampling_model(const SamplingProblem& sp, double tol, int quadrature_nodes);

/// Actions are accept 0..N or sample mode 1..K. Throws RankTooHigh when the
/// reduced statistic has more than two dimensions.
PolicyTable solve_sampling(const SamplingProblem& sp, const SamplingFactorization& fac,
                           const SolverConfig& cfg);

}  // namespace seqht
