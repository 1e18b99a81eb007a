#include <gtest/gtest.h>

#include <set>

#include "examples.hpp"
#include "seqht/error.hpp"
#include "seqht/solver.hpp"

namespace seqht {
namespace {

using testing::example_three_means;

const PolicyTable& three_means_policy() {
  static const PolicyTable pt = [] {
    const HypothesisSet hs = example_three_means();
    return solve(hs, build_diagnostic(hs), SolverConfig{});
  }();
  return pt;
}

SolverConfig coarse_2d() {
  SolverConfig cfg;
  cfg.grid_points_per_dim = 101;
  return cfg;
}

const PolicyTable& five_variances_policy() {
  static const PolicyTable pt = [] {
    const HypothesisSet hs = testing::example_five_variances();
    return solve(hs, build_diagnostic(hs), coarse_2d());
  }();
  return pt;
}

const PolicyTable& poisson_policy() {
  static const PolicyTable pt = [] {
    const HypothesisSet hs = make_hypothesis_set(
        make_family(FamilyId::poisson), {{1.0}, {2.0}, {3.5}}, uniform_prior(3),
        zero_one_loss(3), Eigen::Vector3d::Constant(0.02));
    return solve(hs, build_diagnostic(hs), SolverConfig{});
  }();
  return pt;
}

double stop_value(const PolicyTable& pt, int k, const double* x) {
  const std::vector<double> pi = pt.model.posterior(k, x);
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < pt.hypotheses(); ++j) {
    double s = 0.0;
    for (int i = 0; i < pt.hypotheses(); ++i) s += pi[static_cast<std::size_t>(i)] * pt.model.loss(i, j);
    best = std::min(best, s);
  }
  return best;
}

TEST(Solver, ThreeMeansDecisionsAlongThePath) {
  const PolicyTable& pt = three_means_policy();
  const double xs[] = {0, 58, 110, 151, 208};
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(decide(pt, k, &xs[k]), Action::wait()) << "k=" << k;
  }
  EXPECT_EQ(decide(pt, 4, &xs[4]), Action::accept(1));
  EXPECT_TRUE(std::isfinite(pt.bayes_risk));
  EXPECT_GT(pt.bayes_risk, 0.0);
}

TEST(Solver, ThreeMeansRegionsAtStageFour) {
  const RegionReport r = acceptance_regions(three_means_policy(), 4);
  bool found = false;
  std::set<std::string> labels;
  for (const Interval& iv : r.intervals) {
    labels.insert(action_label(iv.action, 1));
    if (iv.lo <= 208 && 208 <= iv.hi) {
      EXPECT_EQ(iv.action, Action::accept(1));
      found = true;
    }
  }
  EXPECT_TRUE(found);
  EXPECT_EQ(labels, (std::set<std::string>{"accept_0", "accept_1", "accept_2", "wait"}));
}

TEST(Solver, HorizonSweepConverged) {
  const PolicyTable& pt = three_means_policy();
  ASSERT_GE(pt.sweep.size(), 2u);
  const auto& last = pt.sweep.back();
  const auto& prev = pt.sweep[pt.sweep.size() - 2];
  EXPECT_EQ(last.first, pt.horizon());
  EXPECT_LT(std::abs(last.second - prev.second), pt.config.convergence_tol);
}

void check_bellman_residual(const PolicyTable& pt, int stride) {
  double worst = 0.0;
  for (int k = 0; k < pt.horizon(); ++k) {
    const StageTable& t = pt.stages[static_cast<std::size_t>(k)];
    for (int idx = 0; idx < t.grid.size(); idx += stride) {
      double x[2];
      t.grid.node(idx, x);
      const NodeEval e = bellman(pt.model, &pt.stages[static_cast<std::size_t>(k) + 1], k, x);
      worst = std::max(worst, std::abs(e.value - t.value[static_cast<std::size_t>(idx)]));
    }
  }
  EXPECT_LE(worst, 1e-10);
}

TEST(SolverProperty, BellmanResidualOneDimensional) { check_bellman_residual(three_means_policy(), 1); }
TEST(SolverProperty, BellmanResidualTwoDimensional) { check_bellman_residual(five_variances_policy(), 7); }
TEST(SolverProperty, BellmanResidualLattice) { check_bellman_residual(poisson_policy(), 1); }

void check_envelope(const PolicyTable& pt) {
  for (int k = 0; k <= pt.horizon(); ++k) {
    const StageTable& t = pt.stages[static_cast<std::size_t>(k)];
    for (int idx = 0; idx < t.grid.size(); ++idx) {
      double x[2];
      t.grid.node(idx, x);
      const double v = t.value[static_cast<std::size_t>(idx)];
      ASSERT_LE(v, stop_value(pt, k, x) + 1e-12) << "k=" << k << " idx=" << idx;
      ASSERT_GE(v, 0.0);
    }
  }
}

TEST(SolverProperty, ValueIsBelowTheStoppingEnvelope) {
  check_envelope(three_means_policy());
  check_envelope(five_variances_policy());
  check_envelope(poisson_policy());
}

TEST(SolverProperty, FinalStageAlwaysAccepts) {
  for (const PolicyTable* pt : {&three_means_policy(), &five_variances_policy(), &poisson_policy()}) {
    const RegionReport r = acceptance_regions(*pt, pt->horizon());
    for (const Action& a : r.labels) EXPECT_TRUE(a.is_accept());
  }
}

TEST(SolverProperty, ForwardEvaluationMatchesBackwardValue) {
  for (const PolicyTable* pt : {&three_means_policy(), &five_variances_policy(), &poisson_policy()}) {
    const ForwardResult fr = evaluate_policy_exact(*pt);
    EXPECT_NEAR(fr.risk, pt->bayes_risk, 1e-9);
    double mix = 0.0;
    for (int i = 0; i < pt->hypotheses(); ++i) {
      mix += std::exp(pt->model.log_prior(i)) * fr.per_truth[static_cast<std::size_t>(i)];
    }
    EXPECT_NEAR(mix, fr.risk, 1e-9);
    EXPECT_GE(fr.mean_stop, 0.0);
  }
}

TEST(SolverProperty, LongerHorizonNeverRaisesRisk) {
  const HypothesisSet hs = example_three_means();
  const DpModel model = build_model(hs, build_diagnostic(hs), 64);
  double prev = std::numeric_limits<double>::infinity();
  for (int horizon : {1, 2, 4, 8, 16, 32, 64}) {
    const double r = solve_fixed(model, SolverConfig{}, horizon).bayes_risk;
    EXPECT_LE(r, prev + 1e-8) << "K=" << horizon;
    prev = r;
  }
}

TEST(SolverProperty, BinaryProblemHasOneWaitingInterval) {
  const HypothesisSet hs = make_hypothesis_set(make_family(FamilyId::normal), {{0, 1}, {0.5, 1}},
                                               Eigen::Vector2d(0.4, 0.6), zero_one_loss(2),
                                               Eigen::Vector2d(0.01, 0.01));
  const PolicyTable pt = solve(hs, build_diagnostic(hs), SolverConfig{});
  for (int k = 0; k <= pt.horizon(); ++k) {
    int waits = 0;
    for (const Interval& iv : acceptance_regions(pt, k).intervals) waits += !iv.action.is_accept();
    EXPECT_LE(waits, 1) << "k=" << k;
  }
}

TEST(SolverProperty, RelabelingPermutesActions) {
  // Swap hypotheses 1 and 2 everywhere.
  const HypothesisSet hs = example_three_means();
  const int perm[] = {0, 2, 1};
  std::vector<std::vector<double>> alphas;
  Eigen::Vector3d prior, cost;
  Eigen::Matrix3d loss;
  for (int i = 0; i < 3; ++i) {
    alphas.push_back(hs.naturals[static_cast<std::size_t>(perm[i])].alpha);
    prior(i) = hs.prior(perm[i]);
    cost(i) = hs.obs_cost(perm[i]);
    for (int j = 0; j < 3; ++j) loss(i, j) = hs.loss(perm[i], perm[j]);
  }
  const HypothesisSet ps = make_hypothesis_set(hs.spec, alphas, prior, loss, cost);
  const PolicyTable& a = three_means_policy();
  const PolicyTable b = solve(ps, build_diagnostic(ps), SolverConfig{});
  EXPECT_NEAR(a.bayes_risk, b.bayes_risk, 1e-10);
  ASSERT_EQ(a.horizon(), b.horizon());
  int mismatches = 0;
  for (int k = 0; k <= a.horizon(); ++k) {
    const RegionReport ra = acceptance_regions(a, k), rb = acceptance_regions(b, k);
    ASSERT_EQ(ra.labels.size(), rb.labels.size());
    for (std::size_t n = 0; n < ra.labels.size(); ++n) {
      Action want = ra.labels[n];
      if (want.is_accept()) want = Action::accept(perm[want.index]);
      mismatches += !(rb.labels[n] == want);
    }
  }
  EXPECT_EQ(mismatches, 0);
}

TEST(SolverProperty, RescaledFactorizationGivesTheSamePolicy) {
  const HypothesisSet hs = example_three_means();
  const DiagnosticFactorization fac = build_diagnostic(hs);
  DiagnosticFactorization scaled = fac;
  scaled.U *= 2.0;
  scaled.L /= 2.0;
  const PolicyTable& a = three_means_policy();
  const PolicyTable b = solve(hs, scaled, SolverConfig{});
  EXPECT_NEAR(a.bayes_risk, b.bayes_risk, 1e-12);
  for (int k = 0; k <= a.horizon(); ++k) {
    const RegionReport ra = acceptance_regions(a, k), rb = acceptance_regions(b, k);
    ASSERT_EQ(ra.labels.size(), rb.labels.size());
    for (std::size_t n = 0; n < ra.labels.size(); ++n) ASSERT_EQ(ra.labels[n], rb.labels[n]);
    ASSERT_EQ(ra.grid.lo[0] * 2.0, rb.grid.lo[0]);
  }
}

TEST(Solver, DegeneratePriorAcceptsImmediately) {
  const HypothesisSet hs = make_hypothesis_set(
      make_family(FamilyId::normal), {{45, 25}, {55, 25}, {60, 25}},
      Eigen::Vector3d(1e-300, 1.0 - 2e-300, 1e-300), example_three_means().loss,
      Eigen::Vector3d(0.5, 0.2, 0.3));
  const PolicyTable pt = solve(hs, build_diagnostic(hs), SolverConfig{});
  const double x0 = 0.0;
  EXPECT_EQ(decide(pt, 0, &x0), Action::accept(1));
  EXPECT_LE(pt.bayes_risk, 1e-290);
}

TEST(Solver, ExpensiveObservationsAcceptImmediately) {
  HypothesisSet hs = example_three_means();
  hs.obs_cost = Eigen::Vector3d::Constant(100.0);
  const PolicyTable pt = solve(hs, build_diagnostic(hs), SolverConfig{});
  const double x0 = 0.0;
  const Eigen::RowVectorXd expected = hs.prior.transpose() * hs.loss;
  Eigen::Index j;
  const double best = expected.minCoeff(&j);
  EXPECT_EQ(decide(pt, 0, &x0), Action::accept(static_cast<int>(j)));
  EXPECT_NEAR(pt.bayes_risk, best, 1e-14);
  EXPECT_NEAR(evaluate_policy_exact(pt).risk, best, 1e-14);
}

TEST(Solver, WaitingIntervalNarrowsOverTime) {
  const HypothesisSet hs = testing::example_ten_means();
  const DiagnosticFactorization fac = build_diagnostic(hs);
  EXPECT_EQ(fac.rank, 1);
  const PolicyTable pt = solve(hs, fac, SolverConfig{});
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k < pt.horizon(); ++k) {
    const double step = pt.stages[static_cast<std::size_t>(k)].grid.step[0];
    // Total waiting length on the x / k scale, where the statistic is a
    // running mean and does not drift with k.
    // Each interval end is resolved to one grid step.
    double width = 0.0;
    int waits = 0;
    for (const Interval& iv : acceptance_regions(pt, k).intervals) {
      if (iv.action.is_accept()) continue;
      width += (iv.hi - iv.lo + step) / k;
      ++waits;
    }
    EXPECT_LE(width, prev + 2.0 * waits * step / k) << "k=" << k;
    prev = width;
  }
}

TEST(Solver, TwoDimensionalRegionsUseEveryLabel) {
  const PolicyTable& pt = five_variances_policy();
  EXPECT_EQ(pt.model.dim, 2);
  std::set<std::string> labels;
  for (int k = 0; k <= pt.horizon(); ++k) {
    for (const Action& a : acceptance_regions(pt, k).labels) labels.insert(action_label(a, 1));
  }
  EXPECT_EQ(labels, (std::set<std::string>{"accept_0", "accept_1", "accept_2", "accept_3",
                                           "accept_4", "wait"}));
}

TEST(Solver, PoissonStatisticLivesOnALattice) {
  const PolicyTable& pt = poisson_policy();
  EXPECT_GT(pt.model.lattice_spacing, 0.0);
  EXPECT_TRUE(pt.stages[3].grid.lattice);
}

TEST(Solver, ThreadCountDoesNotChangeTheTable) {
  const HypothesisSet hs = example_three_means();
  SolverConfig one, two;
  one.threads = 1;
  two.threads = 2;
  const PolicyTable a = solve(hs, build_diagnostic(hs), one);
  const PolicyTable b = solve(hs, build_diagnostic(hs), two);
  ASSERT_EQ(a.stages.size(), b.stages.size());
  for (std::size_t k = 0; k < a.stages.size(); ++k) {
    EXPECT_EQ(a.stages[k].value, b.stages[k].value);
    EXPECT_EQ(a.stages[k].action, b.stages[k].action);
  }
}

TEST(Solver, UnconvergedHorizonIsReported) {
  const HypothesisSet hs = example_three_means();
  SolverConfig cfg;
  cfg.convergence_tol = 1e-15;
  cfg.max_horizon = 64;
  try {
    solve(hs, build_diagnostic(hs), cfg);
    FAIL() << "expected HorizonNotConverged";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::HorizonNotConverged);
  }
}

TEST(Solver, RankThreeIsRejected) {
  const HypothesisSet hs = example_three_means();
  DiagnosticFactorization fac = build_diagnostic(hs);
  fac.rank = 3;
  fac.L = Eigen::MatrixXd::Identity(2, 3);
  fac.U = Eigen::MatrixXd::Identity(3, 2);
  try {
    solve(hs, fac, SolverConfig{});
    FAIL() << "expected RankTooHigh";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RankTooHigh);
    EXPECT_NE(std::string(e.what()).find("r = 3"), std::string::npos);
  }
}

TEST(Solver, InvalidConfigsAreRejected) {
  auto bad = [](auto mutate) {
    SolverConfig cfg;
    mutate(cfg);
    try {
      validate(cfg);
    } catch (const Error& e) {
      return e.code() == ErrorCode::InvalidSolverConfig;
    }
    return false;
  };
  EXPECT_TRUE(bad([](SolverConfig& c) { c.horizon = 0; }));
  EXPECT_TRUE(bad([](SolverConfig& c) { c.grid_points_per_dim = 1; }));
  EXPECT_TRUE(bad([](SolverConfig& c) { c.grid_width_sigmas = -1; }));
  EXPECT_TRUE(bad([](SolverConfig& c) { c.quadrature_nodes = 0; }));
  EXPECT_TRUE(bad([](SolverConfig& c) { c.convergence_tol = 0; }));
  EXPECT_TRUE(bad([](SolverConfig& c) { c.max_horizon = 8; }));
  EXPECT_TRUE(bad([](SolverConfig& c) { c.threads = -2; }));
  EXPECT_FALSE(bad([](SolverConfig&) {}));
}

TEST(Solver, StagesOutsideTheHorizonAreRejected) {
  const PolicyTable& pt = three_means_policy();
  EXPECT_THROW(acceptance_regions(pt, pt.horizon() + 1), Error);
  EXPECT_THROW(acceptance_regions(pt, -1), Error);
  EXPECT_NO_THROW(acceptance_regions(pt, pt.horizon()));
}

TEST(Solver, ActionLabels) {
  EXPECT_EQ(action_label(Action::accept(3), 1), "accept_3");
  EXPECT_EQ(action_label(Action::wait(), 1), "wait");
  EXPECT_EQ(action_label(Action::wait(1), 3), "sample_2");
  EXPECT_EQ(decode_action(encode_action(Action::wait(2), 4), 4), Action::wait(2));
}

}  // namespace
}  // namespace seqht
