#include <gtest/gtest.h>

#include <set>

#include "examples.hpp"
#include "random_instances.hpp"
#include "seqht/error.hpp"
#include "seqht/sampling.hpp"

namespace seqht {
namespace {

using testing::example_modes;

SamplingProblem as_sampling(const HypothesisSet& hs) {
  std::vector<std::vector<std::vector<double>>> alphas;
  for (const auto& nat : hs.naturals) alphas.push_back({nat.alpha});
  return make_sampling_problem(hs.spec, alphas, hs.prior, hs.loss, hs.obs_cost);
}

SolverConfig coarse_2d() {
  SolverConfig cfg;
  cfg.grid_points_per_dim = 101;
  return cfg;
}

bool uses_label(const PolicyTable& pt, const Action& a) {
  for (int k = 0; k <= pt.horizon(); ++k) {
    for (const Action& l : acceptance_regions(pt, k).labels) {
      if (l == a) return true;
    }
  }
  return false;
}

TEST(Sampling, SingleModeMatrixAppendsNormalizerGaps) {
  const HypothesisSet hs = testing::example_three_means();
  const SamplingFactorization fac = build_sampling_diagnostic(as_sampling(hs));
  const DiagnosticFactorization base = build_diagnostic(hs);
  ASSERT_EQ(fac.Hs.cols(), 3);
  EXPECT_TRUE(fac.Hs.leftCols(2).isApprox(base.H, 1e-14));
  EXPECT_TRUE(fac.Hs.col(2).isApprox(-base.dB, 1e-14));
  EXPECT_EQ(fac.rank, 2);
}

TEST(Sampling, SingleModeReducesToTheBaseProblem) {
  const HypothesisSet hs = testing::example_three_means();
  const SamplingProblem sp = as_sampling(hs);
  const PolicyTable a = solve(hs, build_diagnostic(hs), SolverConfig{});
  const PolicyTable b = solve_sampling(sp, build_sampling_diagnostic(sp), SolverConfig{});
  EXPECT_NEAR(a.bayes_risk, b.bayes_risk, 1e-8);
  ASSERT_EQ(a.horizon(), b.horizon());
  for (int k = 0; k <= a.horizon(); ++k) {
    EXPECT_EQ(a.stages[static_cast<std::size_t>(k)].action, b.stages[static_cast<std::size_t>(k)].action);
  }
}

TEST(Sampling, ScaledVarianceModesHaveRankTwo) {
  const SamplingProblem sp = example_modes(3);
  EXPECT_EQ(build_sampling_diagnostic(sp).rank, 2);
  EXPECT_EQ(build_sampling_model(sp, 1e-9, 64).dim, 2);
}

TEST(Sampling, StatisticDependsOnWeightedSumsOnly) {
  // One mode-2 draw at 1 and two mode-1 draws at 0.5, 1.5 share
  // sum_a a * sum(Y) = 2 and sum_a a * k_a = 2.
  const SamplingProblem sp = example_modes(3);
  const SamplingFactorization fac = build_sampling_diagnostic(sp);
  SamplingDss a = SamplingDss::origin(fac.rank);
  a = sampling_dss_update(fac, sp.spec, a, 2, 1.0);
  SamplingDss b = SamplingDss::origin(fac.rank);
  b = sampling_dss_update(fac, sp.spec, b, 1, 0.5);
  b = sampling_dss_update(fac, sp.spec, b, 1, 1.5);
  EXPECT_LE((a.xs - b.xs).norm(), 1e-12);
  EXPECT_LE((reconstruct_belief_s(fac, sp, a).pi - reconstruct_belief_s(fac, sp, b).pi).norm(), 1e-12);
}

TEST(Sampling, AveragedModeMatchesRawObservations) {
  const SamplingProblem sp = example_modes(2);
  const HypothesisSet raw = single_mode_view(sp, 1);
  const Belief direct = bayes_update_direct(raw, bayes_update_direct(raw, Belief{raw.prior}, 0.3), 2.1);
  const SamplingFactorization fac = build_sampling_diagnostic(sp);
  const SamplingDss s = sampling_dss_update(fac, sp.spec, SamplingDss::origin(fac.rank), 2, 1.2);
  EXPECT_LE((reconstruct_belief_s(fac, sp, s).pi - direct.pi).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SamplingProperty, ReconstructionMatchesDirectUpdates) {
  Rng rng = make_stream(41, "sampling-reconstruction", 0);
  const FamilyId families[] = {FamilyId::normal, FamilyId::poisson, FamilyId::gamma,
                               FamilyId::beta, FamilyId::exponential, FamilyId::binomial};
  double worst = 0.0;
  for (FamilyId id : families) {
    for (int rep = 0; rep < 20; ++rep) {
      const int count = 2 + static_cast<int>(rng() % 5);
      const int modes = 1 + static_cast<int>(rng() % 3);
      const SamplingProblem sp = testing::random_sampling_problem(id, count, modes, rng);
      const SamplingFactorization fac = build_sampling_diagnostic(sp);
      const int truth = static_cast<int>(rng() % static_cast<unsigned>(count));
      SamplingDss s = SamplingDss::origin(fac.rank);
      Belief direct{sp.prior};
      const int steps = 1 + static_cast<int>(rng() % 30);
      for (int k = 0; k < steps; ++k) {
        const int mode = 1 + static_cast<int>(rng() % static_cast<unsigned>(modes));
        const double y = draw(sp.spec, sp.naturals[static_cast<std::size_t>(truth)][static_cast<std::size_t>(mode - 1)], rng);
        s = sampling_dss_update(fac, sp.spec, s, mode, y);
        direct = bayes_update_direct_mode(sp, direct, mode, y);
        worst = std::max(worst, (reconstruct_belief_s(fac, sp, s).pi - direct.pi).cwiseAbs().maxCoeff());
      }
    }
  }
  EXPECT_LE(worst, 1e-9);
}

TEST(SamplingProperty, DominatedModeIsNeverUsed) {
  // Mode 2 repeats mode 1's densities at a higher cost.
  const HypothesisSet hs = testing::example_three_means();
  std::vector<std::vector<std::vector<double>>> alphas;
  for (const auto& nat : hs.naturals) alphas.push_back({nat.alpha, nat.alpha});
  Eigen::MatrixXd cost(3, 2);
  cost.col(0) = hs.obs_cost;
  cost.col(1) = hs.obs_cost.array() + 0.1;
  const SamplingProblem sp = make_sampling_problem(hs.spec, alphas, hs.prior, hs.loss, cost);
  const PolicyTable base = solve(hs, build_diagnostic(hs), SolverConfig{});
  const PolicyTable pt = solve_sampling(sp, build_sampling_diagnostic(sp), SolverConfig{});
  EXPECT_NEAR(pt.bayes_risk, base.bayes_risk, 1e-8);
  EXPECT_FALSE(uses_label(pt, Action::wait(1)));
}

TEST(SamplingProperty, UninformativeModeIsNeverPreferred) {
  // Mode 2 has the same density under every hypothesis and the same cost, so
  // its continuation value can only lose to mode 1 (up to interpolation).
  std::vector<std::vector<std::vector<double>>> alphas{
      {{0, 4}, {0, 4}}, {{1, 4}, {0, 4}}, {{2, 4}, {0, 4}}};
  const SamplingProblem sp = make_sampling_problem(
      make_family(FamilyId::normal), alphas, uniform_prior(3), zero_one_loss(3),
      Eigen::MatrixXd::Constant(3, 2, 0.05));
  SolverConfig cfg;
  cfg.grid_points_per_dim = 201;
  const PolicyTable pt = solve_sampling(sp, build_sampling_diagnostic(sp), cfg);
  EXPECT_TRUE(uses_label(pt, Action::wait(0)));
  DpModel informative = pt.model, flat = pt.model;
  informative.modes.pop_back();
  flat.modes.erase(flat.modes.begin());
  double worst = 0.0;
  for (int k = 0; k < pt.horizon(); ++k) {
    const StageTable& t = pt.stages[static_cast<std::size_t>(k)];
    const StageTable* next = &pt.stages[static_cast<std::size_t>(k) + 1];
    for (int idx = 0; idx < t.grid.size(); ++idx) {
      double x[2];
      t.grid.node(idx, x);
      const double gain = bellman(informative, next, k, x).continue_value -
                          bellman(flat, next, k, x).continue_value;
      worst = std::max(worst, gain);
    }
  }
  // Bilinear interpolation error; 0.0039 at 101 points per axis, 0.0007 at 201.
  EXPECT_LE(worst, 2e-3);
}

TEST(Sampling, ExtraModesNeverRaiseTheRisk) {
  const SamplingProblem three = example_modes(3);
  const PolicyTable all = solve_sampling(three, build_sampling_diagnostic(three), coarse_2d());
  std::set<std::string> labels;
  for (int k = 0; k <= all.horizon(); ++k) {
    for (const Action& a : acceptance_regions(all, k).labels) labels.insert(action_label(a, 3));
  }
  EXPECT_TRUE(labels.count("accept_0") && labels.count("accept_1") && labels.count("accept_2"));
  for (int mode = 1; mode <= 3; ++mode) {
    const HypothesisSet one = single_mode_view(three, mode);
    const PolicyTable single = solve(one, build_diagnostic(one), SolverConfig{});
    EXPECT_LE(all.bayes_risk, single.bayes_risk + 1e-3) << "mode " << mode;
  }
}

TEST(Sampling, DegeneratePriorAcceptsImmediately) {
  SamplingProblem sp = example_modes(2);
  sp.prior = Eigen::Vector3d(1e-300, 1e-300, 1.0);
  const PolicyTable pt = solve_sampling(sp, build_sampling_diagnostic(sp), coarse_2d());
  const double x0[2] = {0, 0};
  EXPECT_EQ(decide(pt, 0, x0), Action::accept(2));
  EXPECT_LE(pt.bayes_risk, 1e-290);
}

TEST(Sampling, TwoDimensionalReducedStatistic) {
  // Variances differ across hypotheses inside each mode, giving a 2-D state.
  std::vector<std::vector<std::vector<double>>> alphas{
      {{0, 1}, {0, 0.5}}, {{1, 2}, {1, 1}}, {{0, 3}, {0, 1.5}}};
  const SamplingProblem sp = make_sampling_problem(
      make_family(FamilyId::normal), alphas, uniform_prior(3), zero_one_loss(3),
      (Eigen::MatrixXd(3, 2) << 0.05, 0.1, 0.05, 0.1, 0.05, 0.1).finished());
  const DpModel model = build_sampling_model(sp, 1e-9, 32);
  EXPECT_EQ(model.dim, 2);
  const PolicyTable pt = solve_sampling(sp, build_sampling_diagnostic(sp), coarse_2d());
  EXPECT_TRUE(std::isfinite(pt.bayes_risk));
  EXPECT_NEAR(evaluate_policy_exact(pt).risk, pt.bayes_risk, 1e-9);
}

TEST(Sampling, ReducedRankThreeIsRejected) {
  std::vector<std::vector<std::vector<double>>> alphas{
      {{0, 1}, {0, 1}}, {{1, 1}, {1, 2}}, {{2, 1}, {2, 3}}, {{3, 1}, {3, 5}}};
  const SamplingProblem sp = make_sampling_problem(
      make_family(FamilyId::normal), alphas, uniform_prior(4), zero_one_loss(4),
      Eigen::MatrixXd::Constant(4, 2, 0.1));
  try {
    solve_sampling(sp, build_sampling_diagnostic(sp), SolverConfig{});
    FAIL() << "expected RankTooHigh";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RankTooHigh);
  }
}

TEST(Sampling, DuplicatesAcrossAllModesAreRejected) {
  const FamilySpec spec = make_family(FamilyId::poisson);
  const Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(2, 2, 0.1);
  EXPECT_NO_THROW(make_sampling_problem(spec, {{{1}, {2}}, {{1}, {3}}}, uniform_prior(2),
                                        zero_one_loss(2), cost));
  try {
    make_sampling_problem(spec, {{{1}, {2}}, {{1}, {2}}}, uniform_prior(2), zero_one_loss(2), cost);
    FAIL() << "expected DuplicateHypothesis";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateHypothesis);
  }
}

TEST(Sampling, ModeIndexIsChecked) {
  const SamplingProblem sp = example_modes(2);
  const SamplingFactorization fac = build_sampling_diagnostic(sp);
  EXPECT_THROW(sampling_dss_update(fac, sp.spec, SamplingDss::origin(fac.rank), 3, 0.0), Error);
  EXPECT_THROW(sampling_dss_update(fac, sp.spec, SamplingDss::origin(fac.rank), 0, 0.0), Error);
}

}  // namespace
}  // namespace seqht
