#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seqht/rng.hpp"

namespace seqht {

enum class FamilyId {
  normal,
  normal_known_variance,
  poisson,
  binomial,
  exponential,
  geometric,
  bernoulli,
  gamma,
  beta,
  negative_binomial,
  rayleigh,
  pareto,
  chi_squared,
  laplace_fixed_mean,
  lognormal,
  weibull_fixed_shape,
};

inline constexpr FamilyId kAllFamilies[] = {
    FamilyId::normal,           FamilyId::normal_known_variance, FamilyId::poisson,
    FamilyId::binomial,         FamilyId::exponential,           FamilyId::geometric,
    FamilyId::bernoulli,        FamilyId::gamma,                 FamilyId::beta,
    FamilyId::negative_binomial, FamilyId::rayleigh,             FamilyId::pareto,
    FamilyId::chi_squared,      FamilyId::laplace_fixed_mean,    FamilyId::lognormal,
    FamilyId::weibull_fixed_shape,
};

enum class Support {
  real_line,
  nonnegative_reals,
  integer_range,  // {0, ..., n}
  nonnegative_integers,
  unit_interval,
};

/// Natural statistics never exceed two components for the supported families,
/// so they live in fixed-capacity storage.
using StatVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 2, 1>;
using StatMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 2, 2>;

/// Family-level constants shared by every hypothesis.
struct FixedParams {
  double trials = 0.0;    // binomial n
  double shape = 0.0;     // Weibull gamma
  double location = 0.0;  // Laplace mean
  double variance = 0.0;  // normal with known variance
  double size = 0.0;      // negative binomial alpha
  double scale = 0.0;     // Pareto minimum x_m
};

struct FamilySpec {
  FamilyId id = FamilyId::normal;
  Support support = Support::real_line;
  int dim = 2;  // M, the natural-parameter dimension
  FixedParams fixed;
};

FamilySpec make_family(FamilyId id, const FixedParams& fixed = {});

std::string_view family_name(FamilyId id);
std::optional<FamilyId> parse_family(std::string_view name);

/// Length of the original parameter vector alpha for the family.
int parameter_count(FamilyId id);
bool is_discrete(const FamilySpec& spec);

struct NaturalParam {
  StatVec eta;
  double log_normalizer = 0.0;  // B(alpha)
  std::vector<double> alpha;
};

NaturalParam to_natural(const FamilySpec& spec, std::span<const double> alpha);
inline NaturalParam to_natural(const FamilySpec& spec, std::initializer_list<double> alpha) {
  return to_natural(spec, std::span<const double>(alpha.begin(), alpha.size()));
}

bool in_support(const FamilySpec& spec, double y);
StatVec suff_stat(const FamilySpec& spec, double y);
double log_carrier(const FamilySpec& spec, double y);

/// ln h(y) + eta^T t(y) - B(alpha).
double log_density(const FamilySpec& spec, const NaturalParam& theta, double y);

double draw(const FamilySpec& spec, const NaturalParam& theta, Rng& rng);
std::vector<double> sample(const FamilySpec& spec, const NaturalParam& theta, Rng& rng, int count);

struct QuadNode {
  double y;
  double w;
};

/// Quadrature rule for integrals against the family's density. Continuous
/// families get a Gaussian rule adapted to the distribution; discrete families
/// enumerate the support with at most 1e-12 probability left in the tails.
std::vector<QuadNode> integration_rule(const FamilySpec& spec, const NaturalParam& theta,
                                       int node_count);

struct StatMoments {
  StatVec mean;
  StatMat cov;
};

/// Mean and covariance of t(Y) under theta, computed from the integration rule.
StatMoments suff_stat_moments(const FamilySpec& spec, const NaturalParam& theta,
                              int node_count = 64);

}  // namespace seqht
