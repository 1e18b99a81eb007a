#include "seqht/expfam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "seqht/error.hpp"
#include "seqht/quadrature.hpp"

namespace seqht {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTailMass = 1e-12;

struct FamilyInfo {
  FamilyId id;
  std::string_view name;
  Support support;
  int dim;
  int params;
};

constexpr FamilyInfo kInfo[] = {
    {FamilyId::normal, "normal", Support::real_line, 2, 2},
    {FamilyId::normal_known_variance, "normal_known_variance", Support::real_line, 1, 1},
    {FamilyId::poisson, "poisson", Support::nonnegative_integers, 1, 1},
    {FamilyId::binomial, "binomial", Support::integer_range, 1, 1},
    {FamilyId::exponential, "exponential", Support::nonnegative_reals, 1, 1},
    {FamilyId::geometric, "geometric", Support::nonnegative_integers, 1, 1},
    {FamilyId::bernoulli, "bernoulli", Support::integer_range, 1, 1},
    {FamilyId::gamma, "gamma", Support::nonnegative_reals, 2, 2},
    {FamilyId::beta, "beta", Support::unit_interval, 2, 2},
    {FamilyId::negative_binomial, "negative_binomial", Support::nonnegative_integers, 1, 1},
    {FamilyId::rayleigh, "rayleigh", Support::nonnegative_reals, 1, 1},
    {FamilyId::pareto, "pareto", Support::nonnegative_reals, 1, 1},
    {FamilyId::chi_squared, "chi_squared", Support::nonnegative_reals, 1, 1},
    {FamilyId::laplace_fixed_mean, "laplace_fixed_mean", Support::real_line, 1, 1},
    {FamilyId::lognormal, "lognormal", Support::nonnegative_reals, 2, 2},
    {FamilyId::weibull_fixed_shape, "weibull_fixed_shape", Support::nonnegative_reals, 1, 1},
};

const FamilyInfo& info(FamilyId id) {
  for (const auto& f : kInfo) {
    if (f.id == id) return f;
  }
  throw Error(ErrorCode::UnsupportedFamily, "unknown family id");
}

[[noreturn]] void inadmissible(FamilyId id, const std::string& why) {
  throw Error(ErrorCode::InadmissibleParameter,
              std::string(family_name(id)) + ": " + why);
}

void require(bool ok, FamilyId id, const char* why) {
  if (!ok) inadmissible(id, why);
}

bool is_integer(double y) { return std::isfinite(y) && std::floor(y) == y; }

double trials(const FamilySpec& spec) {
  return spec.id == FamilyId::bernoulli ? 1.0 : spec.fixed.trials;
}

StatVec vec1(double a) {
  StatVec v(1);
  v(0) = a;
  return v;
}

StatVec vec2(double a, double b) {
  StatVec v(2);
  v(0) = a;
  v(1) = b;
  return v;
}

void validate_fixed(const FamilySpec& spec) {
  const auto id = spec.id;
  const auto& f = spec.fixed;
  switch (id) {
    case FamilyId::binomial:
      require(is_integer(f.trials) && f.trials >= 1, id, "trials n must be a positive integer");
      break;
    case FamilyId::weibull_fixed_shape:
      require(std::isfinite(f.shape) && f.shape > 0, id, "shape must be positive");
      break;
    case FamilyId::laplace_fixed_mean:
      require(std::isfinite(f.location), id, "location must be finite");
      break;
    case FamilyId::normal_known_variance:
      require(std::isfinite(f.variance) && f.variance > 0, id, "variance must be positive");
      break;
    case FamilyId::negative_binomial:
      require(std::isfinite(f.size) && f.size > 0, id, "size must be positive");
      break;
    case FamilyId::pareto:
      require(std::isfinite(f.scale) && f.scale > 0, id, "scale must be positive");
      break;
    default:
      break;
  }
}

// Enumerate a discrete support, trimming at most kTailMass of probability.
std::vector<QuadNode> enumerate_support(const FamilySpec& spec, const NaturalParam& theta) {
  const bool bounded = spec.support == Support::integer_range;
  const double upper = bounded ? trials(spec) : std::numeric_limits<double>::infinity();
  constexpr long long kMaxNodes = 50'000'000;

  std::vector<QuadNode> nodes;
  double cumulative = 0.0;
  double skipped = 0.0;
  for (long long i = 0; i <= kMaxNodes; ++i) {
    const double y = static_cast<double>(i);
    if (y > upper) break;
    const double p = std::exp(log_density(spec, theta, y));
    cumulative += p;
    if (nodes.empty() && skipped + p < 0.5 * kTailMass) {
      skipped += p;
      continue;
    }
    nodes.push_back({y, p});
    if (!bounded && 1.0 - cumulative < 0.5 * kTailMass) break;
  }
  if (!bounded && 1.0 - cumulative >= 0.5 * kTailMass) {
    throw Error(ErrorCode::UnsupportedFamily, "support enumeration did not converge");
  }
  return nodes;
}

}  // namespace

std::string_view family_name(FamilyId id) { return info(id).name; }

std::optional<FamilyId> parse_family(std::string_view name) {
  for (const auto& f : kInfo) {
    if (f.name == name) return f.id;
  }
  return std::nullopt;
}

int parameter_count(FamilyId id) { return info(id).params; }

bool is_discrete(const FamilySpec& spec) {
  return spec.support == Support::integer_range || spec.support == Support::nonnegative_integers;
}

FamilySpec make_family(FamilyId id, const FixedParams& fixed) {
  const auto& f = info(id);
  FamilySpec spec;
  spec.id = id;
  spec.support = f.support;
  spec.dim = f.dim;
  spec.fixed = fixed;
  if (id == FamilyId::bernoulli) spec.fixed.trials = 1.0;
  validate_fixed(spec);
  return spec;
}

NaturalParam to_natural(const FamilySpec& spec, std::span<const double> alpha) {
  const auto id = spec.id;
  if (static_cast<int>(alpha.size()) != parameter_count(id)) {
    std::ostringstream os;
    os << "expected " << parameter_count(id) << " parameter(s), got " << alpha.size();
    inadmissible(id, os.str());
  }
  for (double a : alpha) require(std::isfinite(a), id, "parameters must be finite");

  NaturalParam out;
  out.alpha.assign(alpha.begin(), alpha.end());
  const double a0 = alpha[0];
  const double a1 = alpha.size() > 1 ? alpha[1] : 0.0;

  switch (id) {
    case FamilyId::normal:
    case FamilyId::lognormal:
      require(a1 > 0, id, "variance must be positive");
      out.eta = vec2(a0 / a1, -0.5 / a1);
      out.log_normalizer = a0 * a0 / (2.0 * a1) + 0.5 * std::log(a1);
      break;
    case FamilyId::normal_known_variance: {
      const double v = spec.fixed.variance;
      out.eta = vec1(a0 / v);
      out.log_normalizer = a0 * a0 / (2.0 * v);
      break;
    }
    case FamilyId::poisson:
      require(a0 > 0, id, "rate must be positive");
      out.eta = vec1(std::log(a0));
      out.log_normalizer = a0;
      break;
    case FamilyId::binomial:
    case FamilyId::bernoulli:
      require(a0 > 0 && a0 < 1, id, "p must lie in (0, 1)");
      out.eta = vec1(std::log(a0 / (1.0 - a0)));
      out.log_normalizer = -trials(spec) * std::log1p(-a0);
      break;
    case FamilyId::exponential:
      require(a0 > 0, id, "rate must be positive");
      out.eta = vec1(-a0);
      out.log_normalizer = -std::log(a0);
      break;
    case FamilyId::geometric:
      require(a0 > 0 && a0 < 1, id, "p must lie in (0, 1)");
      out.eta = vec1(std::log1p(-a0));
      out.log_normalizer = -std::log(a0);
      break;
    case FamilyId::gamma:
      // t(y) = (-ln y, y); the shape enters with a negative sign so that
      // eta^T t reproduces y^(shape) e^(-rate y) against h(y) = 1/y.
      require(a0 > 0 && a1 > 0, id, "shape and rate must be positive");
      out.eta = vec2(-a0, -a1);
      out.log_normalizer = std::lgamma(a0) - a0 * std::log(a1);
      break;
    case FamilyId::beta:
      require(a0 > 0 && a1 > 0, id, "alpha and beta must be positive");
      out.eta = vec2(a0, a1);
      out.log_normalizer = std::lgamma(a0) + std::lgamma(a1) - std::lgamma(a0 + a1);
      break;
    case FamilyId::negative_binomial:
      require(a0 > 0 && a0 < 1, id, "p must lie in (0, 1)");
      out.eta = vec1(std::log1p(-a0));
      out.log_normalizer = -spec.fixed.size * std::log(a0);
      break;
    case FamilyId::rayleigh:
      require(a0 > 0, id, "sigma^2 must be positive");
      out.eta = vec1(-0.5 / a0);
      out.log_normalizer = std::log(a0);
      break;
    case FamilyId::pareto:
      require(a0 > 0, id, "shape must be positive");
      out.eta = vec1(-a0);
      out.log_normalizer = -std::log(a0) - a0 * std::log(spec.fixed.scale);
      break;
    case FamilyId::chi_squared:
      require(a0 > 0, id, "degrees of freedom must be positive");
      out.eta = vec1(0.5 * a0 - 1.0);
      out.log_normalizer = std::lgamma(0.5 * a0) + 0.5 * a0 * std::numbers::ln2;
      break;
    case FamilyId::laplace_fixed_mean:
      require(a0 > 0, id, "scale must be positive");
      out.eta = vec1(-1.0 / a0);
      out.log_normalizer = std::log(2.0 * a0);
      break;
    case FamilyId::weibull_fixed_shape: {
      require(a0 > 0, id, "scale must be positive");
      const double g = spec.fixed.shape;
      out.eta = vec1(-std::pow(a0, -g));
      out.log_normalizer = g * std::log(a0) - std::log(g);
      break;
    }
  }
  return out;
}

bool in_support(const FamilySpec& spec, double y) {
  if (!std::isfinite(y)) return false;
  switch (spec.id) {
    case FamilyId::normal:
    case FamilyId::normal_known_variance:
    case FamilyId::laplace_fixed_mean:
      return true;
    case FamilyId::poisson:
    case FamilyId::geometric:
    case FamilyId::negative_binomial:
      return is_integer(y) && y >= 0;
    case FamilyId::binomial:
    case FamilyId::bernoulli:
      return is_integer(y) && y >= 0 && y <= trials(spec);
    case FamilyId::exponential:
      return y >= 0;
    case FamilyId::gamma:
    case FamilyId::rayleigh:
    case FamilyId::chi_squared:
    case FamilyId::lognormal:
    case FamilyId::weibull_fixed_shape:
      return y > 0;
    case FamilyId::pareto:
      return y >= spec.fixed.scale;
    case FamilyId::beta:
      return y > 0 && y < 1;
  }
  return false;
}

namespace {
void require_support(const FamilySpec& spec, double y) {
  if (!in_support(spec, y)) {
    std::ostringstream os;
    os << "observation " << y << " is outside the support of " << family_name(spec.id);
    throw Error(ErrorCode::OutOfSupport, os.str());
  }
}
}  // namespace

StatVec suff_stat(const FamilySpec& spec, double y) {
  require_support(spec, y);
  switch (spec.id) {
    case FamilyId::normal:
      return vec2(y, y * y);
    case FamilyId::lognormal: {
      const double l = std::log(y);
      return vec2(l, l * l);
    }
    case FamilyId::gamma:
      return vec2(-std::log(y), y);
    case FamilyId::beta:
      return vec2(std::log(y), std::log1p(-y));
    case FamilyId::rayleigh:
      return vec1(y * y);
    case FamilyId::pareto:
    case FamilyId::chi_squared:
      return vec1(std::log(y));
    case FamilyId::laplace_fixed_mean:
      return vec1(std::abs(y - spec.fixed.location));
    case FamilyId::weibull_fixed_shape:
      return vec1(std::pow(y, spec.fixed.shape));
    default:
      return vec1(y);
  }
}

double log_carrier(const FamilySpec& spec, double y) {
  require_support(spec, y);
  constexpr double half_log_2pi = 0.91893853320467274178;
  switch (spec.id) {
    case FamilyId::normal:
      return -half_log_2pi;
    case FamilyId::normal_known_variance: {
      const double v = spec.fixed.variance;
      return -half_log_2pi - 0.5 * std::log(v) - y * y / (2.0 * v);
    }
    case FamilyId::poisson:
      return -std::lgamma(y + 1.0);
    case FamilyId::binomial:
    case FamilyId::bernoulli: {
      const double n = trials(spec);
      return std::lgamma(n + 1.0) - std::lgamma(y + 1.0) - std::lgamma(n - y + 1.0);
    }
    case FamilyId::exponential:
    case FamilyId::geometric:
    case FamilyId::laplace_fixed_mean:
      return 0.0;
    case FamilyId::gamma:
    case FamilyId::pareto:
      return -std::log(y);
    case FamilyId::beta:
      return -std::log(y) - std::log1p(-y);
    case FamilyId::negative_binomial: {
      const double r = spec.fixed.size;
      return std::lgamma(y + r) - std::lgamma(r) - std::lgamma(y + 1.0);
    }
    case FamilyId::rayleigh:
      return std::log(y);
    case FamilyId::chi_squared:
      return -0.5 * y;
    case FamilyId::lognormal:
      return -std::log(y) - half_log_2pi;
    case FamilyId::weibull_fixed_shape:
      return (spec.fixed.shape - 1.0) * std::log(y);
  }
  return kNegInf;
}

double log_density(const FamilySpec& spec, const NaturalParam& theta, double y) {
  const StatVec t = suff_stat(spec, y);
  return log_carrier(spec, y) + theta.eta.dot(t) - theta.log_normalizer;
}

double draw(const FamilySpec& spec, const NaturalParam& theta, Rng& rng) {
  const auto& a = theta.alpha;
  switch (spec.id) {
    case FamilyId::normal:
      return std::normal_distribution<double>(a[0], std::sqrt(a[1]))(rng);
    case FamilyId::normal_known_variance:
      return std::normal_distribution<double>(a[0], std::sqrt(spec.fixed.variance))(rng);
    case FamilyId::lognormal:
      return std::lognormal_distribution<double>(a[0], std::sqrt(a[1]))(rng);
    case FamilyId::poisson:
      return static_cast<double>(std::poisson_distribution<long long>(a[0])(rng));
    case FamilyId::binomial:
    case FamilyId::bernoulli:
      return static_cast<double>(
          std::binomial_distribution<long long>(static_cast<long long>(trials(spec)), a[0])(rng));
    case FamilyId::exponential:
      return std::exponential_distribution<double>(a[0])(rng);
    case FamilyId::geometric:
      return static_cast<double>(std::geometric_distribution<long long>(a[0])(rng));
    case FamilyId::gamma:
      return std::gamma_distribution<double>(a[0], 1.0 / a[1])(rng);
    case FamilyId::beta: {
      const double x = std::gamma_distribution<double>(a[0], 1.0)(rng);
      const double z = std::gamma_distribution<double>(a[1], 1.0)(rng);
      const double lo = std::nextafter(0.0, 1.0);
      const double hi = std::nextafter(1.0, 0.0);
      return std::clamp(x / (x + z), lo, hi);
    }
    case FamilyId::negative_binomial: {
      // Gamma-Poisson mixture; valid for non-integer size.
      const double p = a[0];
      const double rate = std::gamma_distribution<double>(spec.fixed.size, (1.0 - p) / p)(rng);
      if (!(rate > 0)) return 0.0;
      return static_cast<double>(std::poisson_distribution<long long>(rate)(rng));
    }
    case FamilyId::rayleigh: {
      const double u = uniform01(rng);
      return std::sqrt(-2.0 * a[0] * std::log1p(-u));
    }
    case FamilyId::pareto: {
      const double u = uniform01(rng);
      return spec.fixed.scale * std::exp(-std::log1p(-u) / a[0]);
    }
    case FamilyId::chi_squared:
      return std::chi_squared_distribution<double>(a[0])(rng);
    case FamilyId::laplace_fixed_mean: {
      const double e = std::exponential_distribution<double>(1.0 / a[0])(rng);
      return uniform01(rng) < 0.5 ? spec.fixed.location - e : spec.fixed.location + e;
    }
    case FamilyId::weibull_fixed_shape:
      return std::weibull_distribution<double>(spec.fixed.shape, a[0])(rng);
  }
  return 0.0;
}

std::vector<double> sample(const FamilySpec& spec, const NaturalParam& theta, Rng& rng,
                           int count) {
  if (count < 1) throw Error(ErrorCode::InadmissibleParameter, "sample count must be positive");
  std::vector<double> out(static_cast<std::size_t>(count));
  for (double& y : out) {
    // Continuous draws can round onto an open support boundary (e.g. 0 for
    // Rayleigh); redraw in that measure-zero case.
    do {
      y = draw(spec, theta, rng);
    } while (!in_support(spec, y));
  }
  return out;
}

namespace {

double positive(double y) { return std::max(y, std::numeric_limits<double>::min()); }

// ln X for X ~ Gamma(shape, 1): density exp(shape v - e^v) up to a constant.
// Working on the log scale keeps ln y statistics accurate for small shapes.
GaussRule log_gamma_rule(int n, double shape) {
  const double mode = std::log(shape);
  const double lo = mode - 50.0 * std::max(1.0 / shape, 1.0 / std::sqrt(shape));
  const double hi = std::log(shape + 60.0 + 20.0 * std::sqrt(shape));
  return gauss_from_log_density(n, lo, hi, [shape](double v) { return shape * v - std::exp(v); });
}

// logit Y for Y ~ Beta(a, b): density e^(a u) / (1 + e^u)^(a + b).
GaussRule logit_beta_rule(int n, double a, double b) {
  const double mode = std::log(a / b);
  const double s = std::sqrt(1.0 / a + 1.0 / b);
  const double lo = mode - 50.0 * std::max(1.0 / a, s);
  const double hi = mode + 50.0 * std::max(1.0 / b, s);
  return gauss_from_log_density(n, lo, hi, [a, b](double u) {
    const double softplus = u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
    return a * u - (a + b) * softplus;
  });
}

}  // namespace

std::vector<QuadNode> integration_rule(const FamilySpec& spec, const NaturalParam& theta,
                                       int node_count) {
  if (node_count < 1) {
    throw Error(ErrorCode::InadmissibleParameter, "node_count must be positive");
  }
  if (is_discrete(spec)) return enumerate_support(spec, theta);

  const auto& a = theta.alpha;
  std::vector<QuadNode> out;
  auto emit = [&](const GaussRule& rule, auto&& map) {
    out.reserve(rule.nodes.size());
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      out.push_back({map(rule.nodes[j]), rule.weights[j]});
    }
  };

  switch (spec.id) {
    case FamilyId::normal: {
      const double mu = a[0], sd = std::sqrt(a[1]);
      emit(gauss_hermite_normal(node_count), [&](double z) { return mu + sd * z; });
      break;
    }
    case FamilyId::normal_known_variance: {
      const double mu = a[0], sd = std::sqrt(spec.fixed.variance);
      emit(gauss_hermite_normal(node_count), [&](double z) { return mu + sd * z; });
      break;
    }
    case FamilyId::lognormal: {
      const double mu = a[0], sd = std::sqrt(a[1]);
      emit(gauss_hermite_normal(node_count), [&](double z) { return std::exp(mu + sd * z); });
      break;
    }
    case FamilyId::exponential:
      emit(gauss_laguerre(node_count, 0.0), [&](double x) { return x / a[0]; });
      break;
    case FamilyId::gamma: {
      const double rate = a[1];
      emit(log_gamma_rule(node_count, a[0]), [&](double v) { return positive(std::exp(v) / rate); });
      break;
    }
    case FamilyId::chi_squared:
      emit(log_gamma_rule(node_count, 0.5 * a[0]), [](double v) { return positive(2.0 * std::exp(v)); });
      break;
    case FamilyId::weibull_fixed_shape: {
      const double g = spec.fixed.shape;
      emit(gauss_laguerre(node_count, 0.0), [&](double x) { return a[0] * std::pow(x, 1.0 / g); });
      break;
    }
    case FamilyId::rayleigh:
      emit(gauss_laguerre(node_count, 0.0), [&](double x) { return std::sqrt(2.0 * a[0] * x); });
      break;
    case FamilyId::pareto: {
      const double xm = spec.fixed.scale;
      emit(gauss_laguerre(node_count, 0.0), [&](double x) { return xm * std::exp(x / a[0]); });
      break;
    }
    case FamilyId::laplace_fixed_mean: {
      const int half = std::max(1, (node_count + 1) / 2);
      const GaussRule rule = gauss_laguerre(half, 0.0);
      const double mu = spec.fixed.location;
      for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
        out.push_back({mu - a[0] * rule.nodes[j], 0.5 * rule.weights[j]});
        out.push_back({mu + a[0] * rule.nodes[j], 0.5 * rule.weights[j]});
      }
      break;
    }
    case FamilyId::beta:
      emit(logit_beta_rule(node_count, a[0], a[1]), [](double u) {
        return std::clamp(1.0 / (1.0 + std::exp(-u)), std::nextafter(0.0, 1.0),
                          std::nextafter(1.0, 0.0));
      });
      break;
    default:
      throw Error(ErrorCode::UnsupportedFamily,
                  std::string("no integration rule for ") + std::string(family_name(spec.id)));
  }
  return out;
}

StatMoments suff_stat_moments(const FamilySpec& spec, const NaturalParam& theta, int node_count) {
  const auto rule = integration_rule(spec, theta, node_count);
  const int m = spec.dim;
  StatMoments mom;
  mom.mean = StatVec::Zero(m);
  mom.cov = StatMat::Zero(m, m);
  double total = 0.0;
  for (const auto& q : rule) {
    mom.mean += q.w * suff_stat(spec, q.y);
    total += q.w;
  }
  mom.mean /= total;
  for (const auto& q : rule) {
    const StatVec d = suff_stat(spec, q.y) - mom.mean;
    mom.cov += q.w * d * d.transpose();
  }
  mom.cov /= total;
  return mom;
}

}  // namespace seqht
