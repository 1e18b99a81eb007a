#include <gtest/gtest.h>

#include <cstring>
#include <sstream>

#include "examples.hpp"
#include "seqht/error.hpp"
#include "seqht/policy_io.hpp"
#include "seqht/sampling.hpp"

namespace seqht {
namespace {

std::string serialize(const PolicyTable& pt, const std::string& problem = "") {
  std::ostringstream os(std::ios::binary);
  write_policy(os, pt, problem);
  return os.str();
}

PolicyFile deserialize(const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  return read_policy(is);
}

ErrorCode read_error(const std::string& bytes) {
  try {
    deserialize(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::ConfigError;
}

void expect_identical(const PolicyTable& a, const PolicyTable& b) {
  EXPECT_EQ(a.digest, b.digest);
  EXPECT_EQ(std::memcmp(&a.bayes_risk, &b.bayes_risk, sizeof(double)), 0);
  ASSERT_EQ(a.stages.size(), b.stages.size());
  for (std::size_t k = 0; k < a.stages.size(); ++k) {
    const StageTable& x = a.stages[k];
    const StageTable& y = b.stages[k];
    EXPECT_EQ(x.grid.n, y.grid.n);
    EXPECT_EQ(x.grid.lo, y.grid.lo);
    EXPECT_EQ(x.grid.step, y.grid.step);
    EXPECT_EQ(x.grid.lattice, y.grid.lattice);
    ASSERT_EQ(x.value.size(), y.value.size());
    EXPECT_EQ(std::memcmp(x.value.data(), y.value.data(), x.value.size() * sizeof(double)), 0);
    EXPECT_EQ(x.action, y.action);
  }
  EXPECT_EQ(model_digest(a.model), model_digest(b.model));
  EXPECT_EQ(a.model.L, b.model.L);
  EXPECT_EQ(a.model.drift, b.model.drift);
  EXPECT_EQ(a.config.horizon, b.config.horizon);
  EXPECT_EQ(a.config.quadrature_nodes, b.config.quadrature_nodes);
  EXPECT_EQ(a.sweep, b.sweep);
}

const PolicyTable& three_means() {
  static const PolicyTable pt = [] {
    const HypothesisSet hs = testing::example_three_means();
    return solve(hs, build_diagnostic(hs), SolverConfig{});
  }();
  return pt;
}

TEST(PolicyIo, RoundTripIsBitExact) {
  const std::string bytes = serialize(three_means(), "three means");
  const PolicyFile f = deserialize(bytes);
  EXPECT_EQ(f.problem, "three means");
  expect_identical(three_means(), f.table);
  EXPECT_EQ(serialize(f.table, "three means"), bytes);
}

TEST(PolicyIo, TwoDimensionalSamplingTableRoundTrips) {
  const SamplingProblem sp = testing::example_modes(2);
  SolverConfig cfg;
  cfg.grid_points_per_dim = 41;
  const PolicyTable pt = solve_sampling(sp, build_sampling_diagnostic(sp), cfg);
  const PolicyFile f = deserialize(serialize(pt));
  expect_identical(pt, f.table);
  const double x[2] = {1.5, 2.0};
  EXPECT_EQ(decide(pt, 3, x), decide(f.table, 3, x));
  EXPECT_EQ(evaluate_state(pt, 3, x).value, evaluate_state(f.table, 3, x).value);
}

TEST(PolicyIo, LoadedTableDecidesLikeTheOriginal) {
  const PolicyFile f = deserialize(serialize(three_means()));
  for (double x : {-50.0, 0.0, 58.0, 110.0, 151.0, 208.0, 400.0}) {
    for (int k : {0, 1, 4, 9}) EXPECT_EQ(decide(three_means(), k, &x), decide(f.table, k, &x));
  }
}

TEST(PolicyIo, CorruptionIsDetected) {
  std::string bytes = serialize(three_means());
  bytes[bytes.size() / 2] ^= 0x5a;
  EXPECT_EQ(read_error(bytes), ErrorCode::PolicyFormat);
}

TEST(PolicyIo, BadMagicIsDetected) {
  std::string bytes = serialize(three_means());
  bytes[0] = 'X';
  EXPECT_EQ(read_error(bytes), ErrorCode::PolicyFormat);
  EXPECT_EQ(read_error("not a policy file"), ErrorCode::PolicyFormat);
}

TEST(PolicyIo, UnknownVersionIsDetected) {
  std::string bytes = serialize(three_means());
  bytes[8] = static_cast<char>(kPolicyFormatVersion + 1);
  EXPECT_EQ(read_error(bytes), ErrorCode::PolicyFormat);
}

TEST(PolicyIo, TruncationIsDetected) {
  const std::string bytes = serialize(three_means());
  for (std::size_t keep : {std::size_t{0}, std::size_t{10}, bytes.size() / 3, bytes.size() - 1}) {
    EXPECT_EQ(read_error(bytes.substr(0, keep)), ErrorCode::PolicyFormat) << keep;
  }
}

TEST(PolicyIo, MissingFileIsReported) {
  try {
    read_policy(std::string("/nonexistent/policy.bin"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PolicyFormat);
  }
}

}  // namespace
}  // namespace seqht
