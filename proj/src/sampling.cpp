#include "seqht/sampling.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "seqht/error.hpp"

namespace seqht {

namespace {

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorCode::InvalidHypothesisSet, what);
}

void check_mode(const SamplingProblem& sp, int mode) {
  if (mode < 1 || mode > sp.modes()) {
    std::ostringstream os;
    os << "sampling mode " << mode << " is outside 1.." << sp.modes();
    throw Error(ErrorCode::InvalidHypothesisSet, os.str());
  }
}

}  // namespace

void validate(const SamplingProblem& sp) {
  const int n = sp.count();
  if (n < 2) invalid("at least two hypotheses are required");
  const int k = sp.modes();
  if (k < 1) invalid("at least one sampling mode is required");
  for (const auto& row : sp.naturals) {
    if (static_cast<int>(row.size()) != k) invalid("every hypothesis needs one parameter per mode");
  }
  if (sp.mode_cost.rows() != n || sp.mode_cost.cols() != k) {
    invalid("mode_cost must have one row per hypothesis and one column per mode");
  }
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < k; ++a) {
      if (!(std::isfinite(sp.mode_cost(i, a)) && sp.mode_cost(i, a) >= 0)) {
        invalid("mode costs must be finite and nonnegative");
      }
    }
  }
  // Prior and loss checks are shared with the base problem.
  HypothesisSet view = single_mode_view(sp, 1);
  view.obs_cost = Eigen::VectorXd::Zero(n);
  try {
    validate(view);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DuplicateHypothesis) throw;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      bool same = true;
      for (int a = 0; a < k && same; ++a) {
        const auto& p = sp.naturals[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)];
        const auto& q = sp.naturals[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)];
        same = (p.eta - q.eta).norm() <= 1e-12 &&
               std::abs(p.log_normalizer - q.log_normalizer) <= 1e-12;
      }
      if (same) {
        std::ostringstream os;
        os << "hypotheses " << i << " and " << j << " coincide under every sampling mode";
        throw Error(ErrorCode::DuplicateHypothesis, os.str());
      }
    }
  }
}

SamplingProblem make_sampling_problem(
    const FamilySpec& spec, const std::vector<std::vector<std::vector<double>>>& alphas,
    const Eigen::VectorXd& prior, const Eigen::MatrixXd& loss, const Eigen::MatrixXd& mode_cost) {
  SamplingProblem sp;
  sp.spec = spec;
  for (const auto& per_mode : alphas) {
    std::vector<NaturalParam> row;
    for (const auto& a : per_mode) row.push_back(to_natural(spec, a));
    sp.naturals.push_back(std::move(row));
  }
  sp.prior = prior;
  sp.loss = loss;
  sp.mode_cost = mode_cost;
  validate(sp);
  return sp;
}

HypothesisSet single_mode_view(const SamplingProblem& sp, int mode) {
  check_mode(sp, mode);
  HypothesisSet hs;
  hs.spec = sp.spec;
  for (const auto& row : sp.naturals) hs.naturals.push_back(row[static_cast<std::size_t>(mode - 1)]);
  hs.prior = sp.prior;
  hs.loss = sp.loss;
  hs.obs_cost = sp.mode_cost.col(mode - 1);
  return hs;
}

SamplingFactorization build_sampling_diagnostic(const SamplingProblem& sp, double tol) {
  validate(sp);
  const int n = sp.count() - 1;
  const int m = sp.spec.dim;
  const int k = sp.modes();
  SamplingFactorization fac;
  fac.stat_dim = m;
  fac.modes = k;
  fac.tol = tol;
  fac.Hs.resize(n, m * k + k);
  for (int i = 1; i <= n; ++i) {
    for (int a = 0; a < k; ++a) {
      const auto& base = sp.naturals[0][static_cast<std::size_t>(a)];
      const auto& hyp = sp.naturals[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)];
      fac.Hs.block(i - 1, m * a, 1, m) = (hyp.eta - base.eta).transpose();
      fac.Hs(i - 1, m * k + a) = base.log_normalizer - hyp.log_normalizer;
    }
  }
  RankFactorization rf = rank_factorize(fac.Hs, tol);
  fac.Ls = std::move(rf.L);
  fac.Us = std::move(rf.U);
  fac.rank = rf.rank;
  return fac;
}

SamplingDss sampling_dss_update(const SamplingFactorization& fac, const FamilySpec& spec,
                                const SamplingDss& state, int mode, double y) {
  if (mode < 1 || mode > fac.modes) {
    std::ostringstream os;
    os << "sampling mode " << mode << " is outside 1.." << fac.modes;
    throw Error(ErrorCode::InvalidHypothesisSet, os.str());
  }
  const StatVec t = suff_stat(spec, y);
  const int m = fac.stat_dim;
  const int a = mode - 1;
  SamplingDss out{state.xs, state.k + 1};
  out.xs += fac.Us.middleCols(m * a, m) * t + fac.Us.col(m * fac.modes + a);
  return out;
}

Belief reconstruct_belief_s(const SamplingFactorization& fac, const SamplingProblem& sp,
                            const SamplingDss& state) {
  const int n = sp.count();
  Eigen::VectorXd log_w(n);
  log_w(0) = std::log(sp.prior(0));
  const Eigen::VectorXd d = fac.Ls * state.xs;
  for (int i = 1; i < n; ++i) log_w(i) = std::log(sp.prior(i)) + d(i - 1);
  return {normalize_log_weights(log_w)};
}

Belief bayes_update_direct_mode(const SamplingProblem& sp, const Belief& belief, int mode,
                                double y) {
  check_mode(sp, mode);
  const int n = sp.count();
  Eigen::VectorXd log_w(n);
  for (int j = 0; j < n; ++j) {
    const double pj = belief.pi(j);
    const auto& nat = sp.naturals[static_cast<std::size_t>(j)][static_cast<std::size_t>(mode - 1)];
    log_w(j) = pj > 0 ? std::log(pj) + log_density(sp.spec, nat, y)
                      : -std::numeric_limits<double>::infinity();
  }
  return {normalize_log_weights(log_w)};
}

DpModel build_sampling_model(const SamplingProblem& sp, double tol, int quadrature_nodes) {
  validate(sp);
  const int n = sp.count() - 1;
  const int m = sp.spec.dim;
  const int k = sp.modes();
  const int last = k - 1;

  // Reduced matrix: eta blocks for every mode, count columns for modes
  // 0..K-2 measured relative to the last mode.
  Eigen::MatrixXd h(n, m * k + last);
  Eigen::VectorXd drift(n);
  for (int i = 1; i <= n; ++i) {
    const auto& row = sp.naturals[static_cast<std::size_t>(i)];
    const auto& base = sp.naturals[0];
    const double last_gap =
        base[static_cast<std::size_t>(last)].log_normalizer - row[static_cast<std::size_t>(last)].log_normalizer;
    for (int a = 0; a < k; ++a) {
      h.block(i - 1, m * a, 1, m) =
          (row[static_cast<std::size_t>(a)].eta - base[static_cast<std::size_t>(a)].eta).transpose();
      if (a < last) {
        const double gap =
            base[static_cast<std::size_t>(a)].log_normalizer - row[static_cast<std::size_t>(a)].log_normalizer;
        h(i - 1, m * k + a) = gap - last_gap;
      }
    }
    drift(i - 1) = -last_gap;
  }
  const RankFactorization rf = rank_factorize(h, tol);
  if (rf.rank > 2) {
    std::ostringstream os;
    os << "sampling-control statistic has rank " << rf.rank
       << " after folding counts into the stage index; at most 2 is supported";
    throw Error(ErrorCode::RankTooHigh, os.str());
  }

  DpModel model;
  model.family = sp.spec;
  model.dim = rf.rank;
  model.hypotheses = sp.count();
  model.L = rf.L;
  model.drift = drift;
  model.log_prior = sp.prior.array().log();
  model.loss = sp.loss;
  for (int a = 0; a < k; ++a) {
    DpMode mode;
    for (const auto& row : sp.naturals) mode.naturals.push_back(row[static_cast<std::size_t>(a)]);
    mode.proj = rf.U.middleCols(m * a, m);
    mode.shift = a < last ? Eigen::VectorXd(rf.U.col(m * k + a)) : Eigen::VectorXd::Zero(rf.rank);
    mode.cost = sp.mode_cost.col(a);
    model.modes.push_back(std::move(mode));
  }
  prepare_model(model, quadrature_nodes);
  return model;
}

PolicyTable solve_sampling(const SamplingProblem& sp, const SamplingFactorization& fac,
                           const SolverConfig& cfg) {
  validate(cfg);
  return solve_model(build_sampling_model(sp, fac.tol, cfg.quadrature_nodes), cfg);
}

}  // namespace seqht
