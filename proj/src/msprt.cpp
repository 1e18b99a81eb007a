#include "seqht/msprt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "parallel.hpp"
#include "seqht/error.hpp"
#include "seqht/rng.hpp"

namespace seqht {

void validate(const MsprtPolicy& p) {
  for (Eigen::Index i = 0; i < p.thresholds.size(); ++i) {
    const double a = p.thresholds(i);
    if (!(a > 0.0 && a < 1.0)) {
      throw Error(ErrorCode::InvalidSolverConfig, "MSPRT thresholds must lie in (0, 1)");
    }
  }
  if (p.step_cap < 1) throw Error(ErrorCode::InvalidSolverConfig, "step_cap must be positive");
}

int bayes_decision(const Eigen::VectorXd& pi, const Eigen::MatrixXd& loss) {
  int best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < loss.cols(); ++j) {
    const double c = pi.dot(loss.col(j));
    if (c < best_cost) {
      best_cost = c;
      best = static_cast<int>(j);
    }
  }
  return best;
}

Action msprt_step(const MsprtPolicy& p, const Belief& belief, int k) {
  for (Eigen::Index i = 0; i < belief.pi.size(); ++i) {
    if (belief.pi(i) >= p.thresholds(i)) return Action::accept(static_cast<int>(i));
  }
  if (k >= p.step_cap) return Action::accept(bayes_decision(belief.pi, p.loss));
  return Action::wait();
}

std::vector<double> default_threshold_grid() {
  return {0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 0.99, 0.999};
}

namespace {

// First-passage times of one sample path for every (hypothesis, level).
struct PathRecord {
  int truth = 0;
  int length = 0;                 // last stage examined
  std::vector<int> first_hit;     // [i * levels + g], -1 if never reached
  int capped_decision = 0;        // one-shot Bayes decision at the cap
};

PathRecord trace_path(const HypothesisSet& hs, const DiagnosticFactorization& fac,
                      const std::vector<double>& levels, int step_cap, Rng& rng) {
  const int n = hs.count();
  const int g_count = static_cast<int>(levels.size());
  PathRecord rec;
  rec.first_hit.assign(static_cast<std::size_t>(n * g_count), -1);

  const double u = uniform01(rng);
  double acc = 0.0;
  rec.truth = n - 1;
  for (int i = 0; i < n; ++i) {
    acc += hs.prior(i);
    if (u < acc) {
      rec.truth = i;
      break;
    }
  }

  const double top = levels.back();
  DssState state = DssState::origin(fac.rank);
  for (int k = 0;; ++k) {
    const Belief b = reconstruct_belief(fac, hs, state);
    double best = 0.0;
    for (int i = 0; i < n; ++i) {
      const double p = b.pi(i);
      best = std::max(best, p);
      for (int g = 0; g < g_count; ++g) {
        int& hit = rec.first_hit[static_cast<std::size_t>(i * g_count + g)];
        if (hit < 0 && p >= levels[static_cast<std::size_t>(g)]) hit = k;
      }
    }
    rec.length = k;
    if (best >= top) break;
    if (k >= step_cap) {
      rec.capped_decision = bayes_decision(b.pi, hs.loss);
      break;
    }
    const double y = draw(hs.spec, hs.naturals[static_cast<std::size_t>(rec.truth)], rng);
    state = dss_update(fac, hs.spec, state, y);
  }
  return rec;
}

}  // namespace

TuneResult msprt_tune(const HypothesisSet& hs, const std::vector<double>& grid, int reps,
                      std::uint64_t seed, const TuneOptions& options) {
  validate(hs);
  if (grid.empty()) throw Error(ErrorCode::InvalidSolverConfig, "threshold grid is empty");
  for (double g : grid) {
    if (!(g > 0.0 && g < 1.0)) {
      throw Error(ErrorCode::InvalidSolverConfig, "threshold grid values must lie in (0, 1)");
    }
  }
  if (reps < 1) throw Error(ErrorCode::InvalidSolverConfig, "reps must be positive");

  std::vector<double> levels = grid;
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  const int n = hs.count();
  const int g_count = static_cast<int>(levels.size());
  std::int64_t combos = 1;
  for (int i = 0; i < n; ++i) {
    combos *= g_count;
    if (combos > options.max_combinations) {
      std::ostringstream os;
      os << "threshold grid of " << g_count << " values over " << n
         << " hypotheses exceeds " << options.max_combinations << " combinations";
      throw Error(ErrorCode::InvalidSolverConfig, os.str());
    }
  }

  const DiagnosticFactorization fac = build_diagnostic(hs);
  const int batch = std::max(1, options.batch);
  const int batches = (reps + batch - 1) / batch;
  const auto combo_count = static_cast<std::size_t>(combos);
  std::vector<std::vector<double>> sum(static_cast<std::size_t>(batches));
  std::vector<std::vector<double>> sum_sq(static_cast<std::size_t>(batches));

  detail::parallel_for(batches, resolve_threads(options.threads), [&](int b0, int b1) {
    std::vector<int> digits(static_cast<std::size_t>(n));
    for (int b = b0; b < b1; ++b) {
      auto& s = sum[static_cast<std::size_t>(b)];
      auto& s2 = sum_sq[static_cast<std::size_t>(b)];
      s.assign(combo_count, 0.0);
      s2.assign(combo_count, 0.0);
      const int r_end = std::min(reps, (b + 1) * batch);
      for (int r = b * batch; r < r_end; ++r) {
        Rng rng = make_stream(seed, "tune", static_cast<std::uint64_t>(r));
        const PathRecord rec = trace_path(hs, fac, levels, options.step_cap, rng);
        const double c = hs.obs_cost(rec.truth);
        std::fill(digits.begin(), digits.end(), 0);
        for (std::size_t combo = 0; combo < combo_count; ++combo) {
          int tau = -1;
          int decision = rec.capped_decision;
          for (int i = 0; i < n; ++i) {
            const int hit =
                rec.first_hit[static_cast<std::size_t>(i * g_count + digits[static_cast<std::size_t>(i)])];
            if (hit >= 0 && (tau < 0 || hit < tau)) {
              tau = hit;
              decision = i;
            }
          }
          if (tau < 0) tau = rec.length;
          const double cost = tau * c + hs.loss(rec.truth, decision);
          s[combo] += cost;
          s2[combo] += cost * cost;
          // Odometer over per-hypothesis level indices, last hypothesis fastest.
          for (int i = n - 1; i >= 0; --i) {
            if (++digits[static_cast<std::size_t>(i)] < g_count) break;
            digits[static_cast<std::size_t>(i)] = 0;
          }
        }
      }
    }
  });

  TuneResult out;
  out.table.reserve(combo_count);
  std::vector<int> digits(static_cast<std::size_t>(n), 0);
  std::size_t best = 0;
  for (std::size_t combo = 0; combo < combo_count; ++combo) {
    double s = 0.0;
    double s2 = 0.0;
    for (int b = 0; b < batches; ++b) {
      s += sum[static_cast<std::size_t>(b)][combo];
      s2 += sum_sq[static_cast<std::size_t>(b)][combo];
    }
    ThresholdResult tr;
    tr.thresholds.resize(n);
    for (int i = 0; i < n; ++i) tr.thresholds(i) = levels[static_cast<std::size_t>(digits[static_cast<std::size_t>(i)])];
    tr.mean_cost = s / reps;
    const double var = reps > 1 ? std::max(0.0, (s2 - s * s / reps) / (reps - 1)) : 0.0;
    tr.stderr_cost = std::sqrt(var / reps);
    out.table.push_back(std::move(tr));
    if (out.table[combo].mean_cost < out.table[best].mean_cost) best = combo;
    for (int i = n - 1; i >= 0; --i) {
      if (++digits[static_cast<std::size_t>(i)] < g_count) break;
      digits[static_cast<std::size_t>(i)] = 0;
    }
  }
  out.policy.thresholds = out.table[best].thresholds;
  out.policy.step_cap = options.step_cap;
  out.policy.loss = hs.loss;
  out.mean_cost = out.table[best].mean_cost;
  out.stderr_cost = out.table[best].stderr_cost;
  return out;
}

}  // namespace seqht
