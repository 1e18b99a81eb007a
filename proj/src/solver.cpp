#include "seqht/solver.hpp"

#include <cmath>
#include <sstream>

#include "seqht/error.hpp"

namespace seqht {

namespace {

[[noreturn]] void bad_config(const std::string& what) {
  throw Error(ErrorCode::InvalidSolverConfig, what);
}

}  // namespace

void validate(const SolverConfig& cfg) {
  if (cfg.horizon < 1) bad_config("horizon must be a positive integer");
  if (cfg.grid_points_per_dim != 0 && cfg.grid_points_per_dim < 2) {
    bad_config("grid_points_per_dim must be at least 2");
  }
  if (!(cfg.grid_width_sigmas > 0) || !std::isfinite(cfg.grid_width_sigmas)) {
    bad_config("grid_width_sigmas must be positive");
  }
  if (cfg.quadrature_nodes < 1) bad_config("quadrature_nodes must be a positive integer");
  if (!(cfg.convergence_tol > 0) || !std::isfinite(cfg.convergence_tol)) {
    bad_config("convergence_tol must be positive");
  }
  if (cfg.max_horizon < cfg.horizon) bad_config("max_horizon must be at least horizon");
  if (cfg.threads < 0) bad_config("threads must be nonnegative");
}

GridSettings grid_settings(const SolverConfig& cfg) {
  GridSettings g;
  if (cfg.grid_points_per_dim > 0) {
    g.points_1d = cfg.grid_points_per_dim;
    g.points_2d = cfg.grid_points_per_dim;
  }
  g.width_sigmas = cfg.grid_width_sigmas;
  g.threads = cfg.threads;
  return g;
}

DpModel build_model(const HypothesisSet& hs, const DiagnosticFactorization& fac,
                    int quadrature_nodes) {
  DpModel m;
  m.family = hs.spec;
  m.dim = fac.rank;
  m.hypotheses = hs.count();
  m.L = fac.L;
  m.drift = fac.dB;
  m.log_prior = hs.prior.array().log();
  m.loss = hs.loss;
  DpMode mode;
  mode.naturals = hs.naturals;
  mode.proj = fac.U;
  mode.shift = Eigen::VectorXd::Zero(fac.rank);
  mode.cost = hs.obs_cost;
  m.modes.push_back(std::move(mode));
  prepare_model(m, quadrature_nodes);
  return m;
}

PolicyTable solve_fixed(DpModel model, const SolverConfig& cfg, int horizon) {
  PolicyTable pt;
  pt.stages = backward_induction(model, grid_settings(cfg), horizon);
  pt.bayes_risk = pt.stages.front().value.front();
  pt.digest = model_digest(model);
  pt.model = std::move(model);
  pt.config = cfg;
  pt.sweep.emplace_back(horizon, pt.bayes_risk);
  return pt;
}

PolicyTable solve_model(DpModel model, const SolverConfig& cfg) {
  validate(cfg);
  if (model.dim < 1 || model.dim > 2) {
    std::ostringstream os;
    os << "state dimension " << model.dim << " is outside the supported range 1..2";
    throw Error(ErrorCode::RankTooHigh, os.str());
  }
  const GridSettings gs = grid_settings(cfg);
  int horizon = cfg.horizon;
  std::vector<std::pair<int, double>> sweep;
  std::vector<StageTable> stages = backward_induction(model, gs, horizon);
  double risk = stages.front().value.front();
  sweep.emplace_back(horizon, risk);
  while (horizon < cfg.max_horizon) {
    const int next = std::min(2 * horizon, cfg.max_horizon);
    std::vector<StageTable> longer = backward_induction(model, gs, next);
    const double next_risk = longer.front().value.front();
    sweep.emplace_back(next, next_risk);
    const double change = std::abs(next_risk - risk);
    stages = std::move(longer);
    risk = next_risk;
    horizon = next;
    if (change < cfg.convergence_tol) break;
    if (horizon == cfg.max_horizon) {
      std::ostringstream os;
      os << "Bayes risk still changed by " << change << " when extending to max_horizon "
         << cfg.max_horizon;
      throw Error(ErrorCode::HorizonNotConverged, os.str());
    }
  }
  PolicyTable pt;
  pt.stages = std::move(stages);
  pt.bayes_risk = risk;
  pt.digest = model_digest(model);
  pt.model = std::move(model);
  pt.config = cfg;
  pt.sweep = std::move(sweep);
  return pt;
}

PolicyTable solve(const HypothesisSet& hs, const DiagnosticFactorization& fac,
                  const SolverConfig& cfg) {
  validate(cfg);
  if (fac.rank > 2) {
    std::ostringstream os;
    os << "diagnostic rank r = " << fac.rank << " (min(N, M) = "
       << std::min(hs.alternatives(), hs.spec.dim) << ") exceeds the supported maximum of 2";
    throw Error(ErrorCode::RankTooHigh, os.str());
  }
  return solve_model(build_model(hs, fac, cfg.quadrature_nodes), cfg);
}

NodeEval evaluate_state(const PolicyTable& pt, int k, const double* x) {
  if (k < 0) throw Error(ErrorCode::StageOutOfRange, "negative stage");
  const StageTable* next =
      k >= pt.horizon() ? nullptr : &pt.stages[static_cast<std::size_t>(k) + 1];
  return bellman(pt.model, next, k, x);
}

Action decide(const PolicyTable& pt, int k, const double* x) {
  return decode_action(evaluate_state(pt, k, x).action, pt.hypotheses());
}

RegionReport acceptance_regions(const PolicyTable& pt, int k) {
  if (k < 0 || k > pt.horizon()) {
    std::ostringstream os;
    os << "stage " << k << " is outside 0.." << pt.horizon();
    throw Error(ErrorCode::StageOutOfRange, os.str());
  }
  const StageTable& t = pt.stages[static_cast<std::size_t>(k)];
  RegionReport r;
  r.k = k;
  r.grid = t.grid;
  r.labels.reserve(t.action.size());
  for (std::int32_t code : t.action) r.labels.push_back(decode_action(code, pt.hypotheses()));
  if (t.grid.dim == 1) {
    for (int i = 0; i < t.grid.n[0]; ++i) {
      const double x = t.grid.coord(0, i);
      const Action a = r.labels[static_cast<std::size_t>(i)];
      if (!r.intervals.empty() && r.intervals.back().action == a) {
        r.intervals.back().hi = x;
      } else {
        r.intervals.push_back({x, x, a});
      }
    }
  }
  return r;
}

ForwardResult evaluate_policy_exact(const PolicyTable& pt) {
  return forward_evaluate(pt.model, pt.stages);
}

}  // namespace seqht
