#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "seqht/diagnostic.hpp"
#include "seqht/msprt.hpp"
#include "seqht/sampling.hpp"
#include "seqht/solver.hpp"

namespace seqht {

/// What a simulated decision maker sees: everything it needs is folded into
/// its own state vector, updated one observation at a time.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string id() const = 0;
  virtual std::vector<double> initial_state() const = 0;
  /// `force` is set once the replication reaches the step cap.
  virtual Action decide(int k, const std::vector<double>& state, bool force) const = 0;
  virtual void observe(std::vector<double>& state, int mode, double y) const = 0;
};

/// Steps a solved table on its own statistic, evaluating the Bellman
/// equation at the exact off-grid state.
class TablePolicy final : public Policy {
 public:
  explicit TablePolicy(std::shared_ptr<const PolicyTable> table, std::string id = "optimal");
  std::string id() const override { return id_; }
  std::vector<double> initial_state() const override;
  Action decide(int k, const std::vector<double>& state, bool force) const override;
  void observe(std::vector<double>& state, int mode, double y) const override;

 private:
  std::shared_ptr<const PolicyTable> table_;
  std::string id_;
};

/// MSPRT on beliefs reconstructed from the DSS.
class MsprtSimPolicy final : public Policy {
 public:
  MsprtSimPolicy(const HypothesisSet& hs, MsprtPolicy policy);
  std::string id() const override { return "msprt"; }
  std::vector<double> initial_state() const override;
  Action decide(int k, const std::vector<double>& state, bool force) const override;
  void observe(std::vector<double>& state, int mode, double y) const override;

 private:
  HypothesisSet hs_;
  DiagnosticFactorization fac_;
  MsprtPolicy policy_;
};

/// Accepts a fixed hypothesis at k = 0.
class FixedAcceptPolicy final : public Policy {
 public:
  explicit FixedAcceptPolicy(int j) : j_(j) {}
  std::string id() const override { return "accept_" + std::to_string(j_); }
  std::vector<double> initial_state() const override { return {}; }
  Action decide(int, const std::vector<double>&, bool) const override { return Action::accept(j_); }
  void observe(std::vector<double>&, int, double) const override {}

 private:
  int j_;
};

/// Problem data the simulator needs: who generates observations, and what
/// each step and each decision costs.
struct SimProblem {
  FamilySpec spec;
  std::vector<std::vector<NaturalParam>> naturals;  // [i][mode]
  Eigen::VectorXd prior;
  Eigen::MatrixXd loss;
  Eigen::MatrixXd cost;  // (N+1) x modes

  int count() const { return static_cast<int>(naturals.size()); }
};

SimProblem sim_problem(const HypothesisSet& hs);
SimProblem sim_problem(const SamplingProblem& sp);

struct SimOptions {
  int step_cap = 10000;
  bool fail_on_cap = false;  // throw NonterminatingPolicy instead of forcing a decision
  int threads = 0;
  int batch = 1024;
};

struct TruthStats {
  int count = 0;
  double mean_cost = 0.0;
  double stderr_cost = 0.0;
  double mean_stop_time = 0.0;
  std::vector<double> accept_frequencies;
};

struct SimulationReport {
  std::string policy_id;
  int replications = 0;
  std::uint64_t seed = 0;
  double mean_cost = 0.0;
  double stderr_cost = 0.0;
  std::pair<double, double> ci95{0.0, 0.0};
  double mean_stop_time = 0.0;
  std::vector<double> accept_frequencies;
  std::vector<TruthStats> per_truth;
  int capped = 0;  // replications ended by the step cap
};

struct Outcome {
  int truth = 0;
  int decision = 0;
  int stop_time = 0;
  double cost = 0.0;
  bool capped = false;
};

/// Replication r draws from stream ("sim", r) of `seed`: the true hypothesis
/// first, then the observations.
Outcome simulate_one(const SimProblem& problem, const Policy& policy, std::uint64_t seed,
                     std::uint64_t replication, const SimOptions& options);

std::vector<Outcome> simulate_many(const SimProblem& problem, const Policy& policy, int reps,
                                   std::uint64_t seed, const SimOptions& options);

SimulationReport summarize(const std::string& policy_id, const std::vector<Outcome>& outcomes,
                           int hypotheses, std::uint64_t seed);

SimulationReport run_sim(const SimProblem& problem, const Policy& policy, int reps,
                         std::uint64_t seed, const SimOptions& options = {});

struct PairedReport {
  SimulationReport first;
  SimulationReport second;
  double mean_difference = 0.0;  // second - first
  double stderr_difference = 0.0;
  double loss_percent = 0.0;     // 100 (second - first) / first
};

/// Runs both policies on identical replication streams.
PairedReport compare(const SimProblem& problem, const Policy& first, const Policy& second,
                     int reps, std::uint64_t seed, const SimOptions& options = {});

}  // namespace seqht
