#include <gtest/gtest.h>

#include "examples.hpp"
#include "random_instances.hpp"
#include "seqht/error.hpp"
#include "seqht/msprt.hpp"
#include "seqht/sim.hpp"

namespace seqht {
namespace {

MsprtPolicy policy(std::initializer_list<double> thresholds, int cap = 10000) {
  MsprtPolicy p;
  p.thresholds = Eigen::Map<const Eigen::VectorXd>(thresholds.begin(), static_cast<Eigen::Index>(thresholds.size()));
  p.step_cap = cap;
  p.loss = zero_one_loss(static_cast<int>(thresholds.size()));
  return p;
}

HypothesisSet table_cell(double s1, double s2, double c) {
  return make_hypothesis_set(make_family(FamilyId::normal), {{0, 1}, {s1, 1}, {s2, 1}},
                             uniform_prior(3), zero_one_loss(3), Eigen::Vector3d::Constant(c));
}

TEST(Msprt, AcceptsFirstHypothesisOverItsThreshold) {
  EXPECT_EQ(msprt_step(policy({0.5, 0.9, 0.9}), Belief{Eigen::Vector3d(0.6, 0.3, 0.1)}, 3),
            Action::accept(0));
  EXPECT_EQ(msprt_step(policy({0.9, 0.9, 0.9}), Belief{Eigen::Vector3d::Constant(1.0 / 3)}, 3),
            Action::wait());
}

TEST(Msprt, LowestIndexWinsWhenSeveralThresholdsAreMet) {
  EXPECT_EQ(msprt_step(policy({0.5, 0.4, 0.9}), Belief{Eigen::Vector3d(0.5, 0.45, 0.05)}, 1),
            Action::accept(0));
}

TEST(Msprt, StepCapForcesTheBayesDecision) {
  EXPECT_EQ(msprt_step(policy({0.99, 0.99, 0.99}, 5), Belief{Eigen::Vector3d(0.2, 0.5, 0.3)}, 5),
            Action::accept(1));
  EXPECT_EQ(msprt_step(policy({0.99, 0.99, 0.99}, 5), Belief{Eigen::Vector3d(0.2, 0.5, 0.3)}, 4),
            Action::wait());
}

TEST(Msprt, InvalidThresholdsAreRejected) {
  EXPECT_THROW(validate(policy({0.5, 1.0})), Error);
  EXPECT_THROW(validate(policy({0.0, 0.5})), Error);
  EXPECT_THROW(validate(policy({0.5, 0.5}, 0)), Error);
  EXPECT_NO_THROW(validate(policy({0.5, 0.999})));
}

TEST(MsprtProperty, ExactlyOneActionPerBelief) {
  Rng rng = make_stream(51, "msprt-actions", 0);
  for (int rep = 0; rep < 2000; ++rep) {
    const int n = 2 + static_cast<int>(rng() % 6);
    MsprtPolicy p;
    p.thresholds.resize(n);
    for (int i = 0; i < n; ++i) p.thresholds(i) = testing::unif(rng, 0.3, 0.99);
    p.loss = zero_one_loss(n);
    const Belief b{testing::random_prior(n, rng)};
    const Action a = msprt_step(p, b, 1);
    int first = -1;
    for (int i = 0; i < n && first < 0; ++i) {
      if (b.pi(i) >= p.thresholds(i)) first = i;
    }
    EXPECT_EQ(a, first >= 0 ? Action::accept(first) : Action::wait());
  }
}

TEST(MsprtProperty, RaisingThresholdsNeverStopsEarlier) {
  const HypothesisSet hs = table_cell(0.4, 0.6, 0.1);
  const SimProblem problem = sim_problem(hs);
  const MsprtSimPolicy low(hs, policy({0.6, 0.6, 0.6}));
  const MsprtSimPolicy high(hs, policy({0.8, 0.7, 0.9}));
  for (std::uint64_t r = 0; r < 500; ++r) {
    const Outcome a = simulate_one(problem, low, 3, r, SimOptions{});
    const Outcome b = simulate_one(problem, high, 3, r, SimOptions{});
    ASSERT_GE(b.stop_time, a.stop_time) << "replication " << r;
  }
}

TEST(MsprtTune, SingleLevelGridReturnsThatLevel) {
  const TuneResult t = msprt_tune(table_cell(1.0, 2.0, 0.2), {0.5}, 200, 1);
  EXPECT_EQ(t.table.size(), 1u);
  EXPECT_TRUE(t.policy.thresholds.isApprox(Eigen::Vector3d::Constant(0.5)));
}

TEST(MsprtTune, IsDeterministicForASeed) {
  const HypothesisSet hs = table_cell(0.4, 0.6, 0.2);
  const std::vector<double> grid{0.5, 0.7, 0.9};
  const TuneResult a = msprt_tune(hs, grid, 300, 17);
  const TuneResult b = msprt_tune(hs, grid, 300, 17);
  EXPECT_EQ(a.policy.thresholds, b.policy.thresholds);
  EXPECT_EQ(a.mean_cost, b.mean_cost);
  ASSERT_EQ(a.table.size(), 27u);
  for (std::size_t i = 0; i < a.table.size(); ++i) EXPECT_EQ(a.table[i].mean_cost, b.table[i].mean_cost);
}

TEST(MsprtTune, TableMatchesSimulationOnTheTuningStream) {
  // The tuner's per-combination mean equals an independent run over the same
  // replications.
  const HypothesisSet hs = table_cell(0.4, 0.6, 0.2);
  const TuneResult t = msprt_tune(hs, {0.6, 0.8}, 400, 5);
  const SimProblem problem = sim_problem(hs);
  const MsprtSimPolicy p(hs, t.policy);
  double total = 0.0;
  for (std::uint64_t r = 0; r < 400; ++r) {
    Rng rng = make_stream(5, "tune", r);
    const int truth = static_cast<int>(uniform01(rng) * 3.0);
    std::vector<double> state = p.initial_state();
    int k = 0;
    double cost = 0.0;
    for (;; ++k) {
      const Action a = p.decide(k, state, k >= t.policy.step_cap);
      if (a.is_accept()) {
        cost += hs.loss(truth, a.index);
        break;
      }
      const double y = draw(hs.spec, hs.naturals[static_cast<std::size_t>(truth)], rng);
      cost += hs.obs_cost(truth);
      p.observe(state, 0, y);
    }
    total += cost;
  }
  EXPECT_NEAR(t.mean_cost, total / 400.0, 1e-12);
}

TEST(MsprtTune, SymmetricProblemGetsSymmetricThresholds) {
  const HypothesisSet hs = make_hypothesis_set(make_family(FamilyId::normal), {{-0.5, 1}, {0.5, 1}},
                                               uniform_prior(2), zero_one_loss(2),
                                               Eigen::Vector2d::Constant(0.05));
  const std::vector<double> grid = default_threshold_grid();
  const TuneResult t = msprt_tune(hs, grid, 4000, 9);
  auto level = [&](double a) {
    return std::find(grid.begin(), grid.end(), a) - grid.begin();
  };
  EXPECT_LE(std::abs(level(t.policy.thresholds(0)) - level(t.policy.thresholds(1))), 1);
}

TEST(MsprtTune, DefaultGridLevels) {
  const std::vector<double> g = default_threshold_grid();
  ASSERT_EQ(g.size(), 12u);
  EXPECT_DOUBLE_EQ(g.front(), 0.5);
  EXPECT_DOUBLE_EQ(g[9], 0.95);
  EXPECT_DOUBLE_EQ(g.back(), 0.999);
}

TEST(MsprtTune, OversizedGridIsRejected) {
  TuneOptions opt;
  opt.max_combinations = 10;
  EXPECT_THROW(msprt_tune(table_cell(1.0, 2.0, 0.2), {0.5, 0.6, 0.7}, 10, 1, opt), Error);
}

}  // namespace
}  // namespace seqht
