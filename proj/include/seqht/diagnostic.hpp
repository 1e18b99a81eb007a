#pragma once

#include <Eigen/Dense>

#include <vector>

#include "seqht/expfam.hpp"

namespace seqht {

/// N+1 simple hypotheses from one exponential family, with the prior, the
/// terminal loss a_ij (truth i, decision j) and per-period observation costs.
struct HypothesisSet {
  FamilySpec spec;
  std::vector<NaturalParam> naturals;
  Eigen::VectorXd prior;
  Eigen::MatrixXd loss;
  Eigen::VectorXd obs_cost;

  int count() const { return static_cast<int>(naturals.size()); }
  int alternatives() const { return count() - 1; }
};

/// Builds and validates a hypothesis set. Throws InadmissibleParameter,
/// InvalidHypothesisSet or DuplicateHypothesis.
HypothesisSet make_hypothesis_set(const FamilySpec& spec,
                                  const std::vector<std::vector<double>>& alphas,
                                  const Eigen::VectorXd& prior, const Eigen::MatrixXd& loss,
                                  const Eigen::VectorXd& obs_cost);

void validate(const HypothesisSet& hs);

/// Uniform prior, zero-one loss helpers for building problems in code.
Eigen::VectorXd uniform_prior(int count);
Eigen::MatrixXd zero_one_loss(int count);

/// H = L U with L = selected columns of H (full column rank) and U in reduced
/// row-echelon form with identity on the selected columns.
struct RankFactorization {
  Eigen::MatrixXd L;
  Eigen::MatrixXd U;
  int rank = 0;
  std::vector<int> pivots;  // columns of H kept in L, ascending
};

/// Rank is the number of singular values >= tol * sigma_max; the pivot
/// columns come from a column-pivoted Householder QR.
RankFactorization rank_factorize(const Eigen::MatrixXd& h, double tol);

struct DiagnosticFactorization {
  Eigen::MatrixXd H;   // N x M, rows eta(alpha_i) - eta(alpha_0)
  Eigen::MatrixXd L;   // N x r
  Eigen::MatrixXd U;   // r x M
  int rank = 0;
  Eigen::VectorXd dB;  // B(alpha_i) - B(alpha_0), i = 1..N
  double tol = 1e-9;
};

DiagnosticFactorization build_diagnostic(const HypothesisSet& hs, double tol = 1e-9);

/// The diagnostic sufficient statistic after k observations.
struct DssState {
  Eigen::VectorXd x;
  int k = 0;

  static DssState origin(int rank) { return {Eigen::VectorXd::Zero(rank), 0}; }
};

DssState dss_update(const DiagnosticFactorization& fac, const FamilySpec& spec,
                    const DssState& state, double y);

struct Belief {
  Eigen::VectorXd pi;
};

/// Posterior over hypotheses recovered from the DSS alone.
Belief reconstruct_belief(const DiagnosticFactorization& fac, const HypothesisSet& hs,
                          const DssState& state);

/// One step of Bayes' rule on the full belief vector, in the log domain.
/// Throws ZeroEvidence when every hypothesis assigns zero likelihood.
Belief bayes_update_direct(const HypothesisSet& hs, const Belief& belief, double y);

/// zeta_i = (s0^2 mu_i - s_i^2 mu_0) / (s_i^2 - s0^2) for the normal family;
/// NaN where the variances coincide. Reported for explanation only.
std::vector<double> normal_zeta(const HypothesisSet& hs);

/// exp(w) / sum(exp(w)) with max subtraction; -inf entries map to zero.
Eigen::VectorXd normalize_log_weights(const Eigen::VectorXd& log_w);

}  // namespace seqht
