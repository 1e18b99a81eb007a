#include "seqht/sim.hpp"

#include <cmath>
#include <sstream>

#include "parallel.hpp"
#include "seqht/error.hpp"
#include "seqht/rng.hpp"

namespace seqht {

TablePolicy::TablePolicy(std::shared_ptr<const PolicyTable> table, std::string id)
    : table_(std::move(table)), id_(std::move(id)) {}

std::vector<double> TablePolicy::initial_state() const {
  return std::vector<double>(static_cast<std::size_t>(table_->model.dim), 0.0);
}

Action TablePolicy::decide(int k, const std::vector<double>& state, bool force) const {
  if (force) {
    const NodeEval e = bellman(table_->model, nullptr, k, state.data());
    return decode_action(e.action, table_->hypotheses());
  }
  return seqht::decide(*table_, k, state.data());
}

void TablePolicy::observe(std::vector<double>& state, int mode, double y) const {
  table_->model.advance(mode, y, state.data());
}

MsprtSimPolicy::MsprtSimPolicy(const HypothesisSet& hs, MsprtPolicy policy)
    : hs_(hs), fac_(build_diagnostic(hs)), policy_(std::move(policy)) {
  validate(policy_);
  if (policy_.thresholds.size() != hs.count()) {
    throw Error(ErrorCode::InvalidSolverConfig, "one MSPRT threshold per hypothesis is required");
  }
  if (policy_.loss.size() == 0) policy_.loss = hs.loss;
}

std::vector<double> MsprtSimPolicy::initial_state() const {
  return std::vector<double>(static_cast<std::size_t>(fac_.rank), 0.0);
}

Action MsprtSimPolicy::decide(int k, const std::vector<double>& state, bool force) const {
  DssState s{Eigen::Map<const Eigen::VectorXd>(state.data(), fac_.rank), k};
  const Belief b = reconstruct_belief(fac_, hs_, s);
  if (force) {
    const Action a = msprt_step(policy_, b, k);
    return a.is_accept() ? a : Action::accept(bayes_decision(b.pi, policy_.loss));
  }
  return msprt_step(policy_, b, k);
}

void MsprtSimPolicy::observe(std::vector<double>& state, int, double y) const {
  const StatVec t = suff_stat(hs_.spec, y);
  for (int d = 0; d < fac_.rank; ++d) state[static_cast<std::size_t>(d)] += fac_.U.row(d).dot(t);
}

SimProblem sim_problem(const HypothesisSet& hs) {
  SimProblem p;
  p.spec = hs.spec;
  for (const auto& nat : hs.naturals) p.naturals.push_back({nat});
  p.prior = hs.prior;
  p.loss = hs.loss;
  p.cost = hs.obs_cost;
  return p;
}

SimProblem sim_problem(const SamplingProblem& sp) {
  SimProblem p;
  p.spec = sp.spec;
  p.naturals = sp.naturals;
  p.prior = sp.prior;
  p.loss = sp.loss;
  p.cost = sp.mode_cost;
  return p;
}

Outcome simulate_one(const SimProblem& problem, const Policy& policy, std::uint64_t seed,
                     std::uint64_t replication, const SimOptions& options) {
  Rng rng = make_stream(seed, "sim", replication);
  Outcome out;
  const int n = problem.count();
  const double u = uniform01(rng);
  double acc = 0.0;
  out.truth = n - 1;
  for (int i = 0; i < n; ++i) {
    acc += problem.prior(i);
    if (u < acc) {
      out.truth = i;
      break;
    }
  }

  std::vector<double> state = policy.initial_state();
  const auto& truth_params = problem.naturals[static_cast<std::size_t>(out.truth)];
  for (int k = 0;; ++k) {
    const bool at_cap = k >= options.step_cap;
    if (at_cap && options.fail_on_cap) {
      std::ostringstream os;
      os << "policy " << policy.id() << " did not stop within " << options.step_cap
         << " periods (replication " << replication << ")";
      throw Error(ErrorCode::NonterminatingPolicy, os.str());
    }
    const Action a = policy.decide(k, state, at_cap);
    if (a.is_accept()) {
      out.decision = a.index;
      out.stop_time = k;
      out.capped = at_cap;
      out.cost += problem.loss(out.truth, a.index);
      return out;
    }
    out.cost += problem.cost(out.truth, a.index);
    const double y = draw(problem.spec, truth_params[static_cast<std::size_t>(a.index)], rng);
    policy.observe(state, a.index, y);
  }
}

std::vector<Outcome> simulate_many(const SimProblem& problem, const Policy& policy, int reps,
                                   std::uint64_t seed, const SimOptions& options) {
  if (reps < 1) throw Error(ErrorCode::InvalidSolverConfig, "reps must be positive");
  std::vector<Outcome> outcomes(static_cast<std::size_t>(reps));
  const int batch = std::max(1, options.batch);
  const int batches = (reps + batch - 1) / batch;
  detail::parallel_for(batches, resolve_threads(options.threads), [&](int b0, int b1) {
    for (int b = b0; b < b1; ++b) {
      const int end = std::min(reps, (b + 1) * batch);
      for (int r = b * batch; r < end; ++r) {
        outcomes[static_cast<std::size_t>(r)] =
            simulate_one(problem, policy, seed, static_cast<std::uint64_t>(r), options);
      }
    }
  });
  return outcomes;
}

namespace {

struct Accumulator {
  int count = 0;
  double sum = 0.0;
  double sum_sq = 0.0;
  double stop = 0.0;
  std::vector<int> accepts;

  void add(const Outcome& o) {
    ++count;
    sum += o.cost;
    sum_sq += o.cost * o.cost;
    stop += o.stop_time;
    ++accepts[static_cast<std::size_t>(o.decision)];
  }
  double mean() const { return count ? sum / count : 0.0; }
  double stderr_mean() const {
    if (count < 2) return 0.0;
    const double var = std::max(0.0, (sum_sq - sum * sum / count) / (count - 1));
    return std::sqrt(var / count);
  }
};

}  // namespace

SimulationReport summarize(const std::string& policy_id, const std::vector<Outcome>& outcomes,
                           int hypotheses, std::uint64_t seed) {
  const auto h = static_cast<std::size_t>(hypotheses);
  Accumulator all;
  all.accepts.assign(h, 0);
  std::vector<Accumulator> by_truth(h);
  for (auto& a : by_truth) a.accepts.assign(h, 0);
  SimulationReport r;
  for (const Outcome& o : outcomes) {
    all.add(o);
    by_truth[static_cast<std::size_t>(o.truth)].add(o);
    if (o.capped) ++r.capped;
  }
  r.policy_id = policy_id;
  r.replications = all.count;
  r.seed = seed;
  r.mean_cost = all.mean();
  r.stderr_cost = all.stderr_mean();
  r.ci95 = {r.mean_cost - 1.96 * r.stderr_cost, r.mean_cost + 1.96 * r.stderr_cost};
  r.mean_stop_time = all.count ? all.stop / all.count : 0.0;
  r.accept_frequencies.resize(h);
  for (std::size_t j = 0; j < h; ++j) {
    r.accept_frequencies[j] = all.count ? static_cast<double>(all.accepts[j]) / all.count : 0.0;
  }
  for (const Accumulator& a : by_truth) {
    TruthStats t;
    t.count = a.count;
    t.mean_cost = a.mean();
    t.stderr_cost = a.stderr_mean();
    t.mean_stop_time = a.count ? a.stop / a.count : 0.0;
    t.accept_frequencies.resize(h);
    for (std::size_t j = 0; j < h; ++j) {
      t.accept_frequencies[j] = a.count ? static_cast<double>(a.accepts[j]) / a.count : 0.0;
    }
    r.per_truth.push_back(std::move(t));
  }
  return r;
}

SimulationReport run_sim(const SimProblem& problem, const Policy& policy, int reps,
                         std::uint64_t seed, const SimOptions& options) {
  return summarize(policy.id(), simulate_many(problem, policy, reps, seed, options),
                   problem.count(), seed);
}

PairedReport compare(const SimProblem& problem, const Policy& first, const Policy& second,
                     int reps, std::uint64_t seed, const SimOptions& options) {
  const auto a = simulate_many(problem, first, reps, seed, options);
  const auto b = simulate_many(problem, second, reps, seed, options);
  PairedReport out;
  out.first = summarize(first.id(), a, problem.count(), seed);
  out.second = summarize(second.id(), b, problem.count(), seed);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t r = 0; r < a.size(); ++r) {
    const double d = b[r].cost - a[r].cost;
    sum += d;
    sum_sq += d * d;
  }
  const double n = static_cast<double>(reps);
  out.mean_difference = sum / n;
  out.stderr_difference =
      reps > 1 ? std::sqrt(std::max(0.0, (sum_sq - sum * sum / n) / (n - 1)) / n) : 0.0;
  out.loss_percent = out.first.mean_cost != 0.0
                         ? 100.0 * (out.second.mean_cost - out.first.mean_cost) / out.first.mean_cost
                         : 0.0;
  return out;
}

}  // namespace seqht
