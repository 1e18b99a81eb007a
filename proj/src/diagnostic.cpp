#include "seqht/diagnostic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "seqht/error.hpp"

namespace seqht {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InadmissibleParameter: return "InadmissibleParameter";
    case ErrorCode::OutOfSupport: return "OutOfSupport";
    case ErrorCode::UnsupportedFamily: return "UnsupportedFamily";
    case ErrorCode::InvalidHypothesisSet: return "InvalidHypothesisSet";
    case ErrorCode::DuplicateHypothesis: return "DuplicateHypothesis";
    case ErrorCode::ZeroEvidence: return "ZeroEvidence";
    case ErrorCode::RankTooHigh: return "RankTooHigh";
    case ErrorCode::HorizonNotConverged: return "HorizonNotConverged";
    case ErrorCode::InvalidSolverConfig: return "InvalidSolverConfig";
    case ErrorCode::NonterminatingPolicy: return "NonterminatingPolicy";
    case ErrorCode::StageOutOfRange: return "StageOutOfRange";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::PolicyFormat: return "PolicyFormat";
  }
  return "Error";
}

namespace {

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorCode::InvalidHypothesisSet, what);
}

constexpr double kIdentityTol = 1e-12;

}  // namespace

Eigen::VectorXd uniform_prior(int count) {
  return Eigen::VectorXd::Constant(count, 1.0 / count);
}

Eigen::MatrixXd zero_one_loss(int count) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Ones(count, count);
  a.diagonal().setZero();
  return a;
}

void validate(const HypothesisSet& hs) {
  const int n = hs.count();
  if (n < 2) invalid("at least two hypotheses are required");
  if (hs.prior.size() != n) invalid("prior length must equal the number of hypotheses");
  if (hs.loss.rows() != n || hs.loss.cols() != n) {
    invalid("loss must be a square matrix of size equal to the number of hypotheses");
  }
  if (hs.obs_cost.size() != n) invalid("obs_cost length must equal the number of hypotheses");

  for (int i = 0; i < n; ++i) {
    if (!(std::isfinite(hs.prior(i)) && hs.prior(i) > 0)) {
      invalid("prior components must be strictly positive");
    }
  }
  if (std::abs(hs.prior.sum() - 1.0) > 1e-12) invalid("prior must sum to 1");
  for (int i = 0; i < n; ++i) {
    if (hs.loss(i, i) != 0.0) invalid("loss diagonal must be zero");
    for (int j = 0; j < n; ++j) {
      if (!(std::isfinite(hs.loss(i, j)) && hs.loss(i, j) >= 0)) {
        invalid("loss entries must be finite and nonnegative");
      }
    }
    if (!(std::isfinite(hs.obs_cost(i)) && hs.obs_cost(i) >= 0)) {
      invalid("observation costs must be finite and nonnegative");
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double de = (hs.naturals[i].eta - hs.naturals[j].eta).norm();
      const double db = std::abs(hs.naturals[i].log_normalizer - hs.naturals[j].log_normalizer);
      if (de <= kIdentityTol && db <= kIdentityTol) {
        std::ostringstream os;
        os << "hypotheses " << i << " and " << j << " have identical natural parameters";
        throw Error(ErrorCode::DuplicateHypothesis, os.str());
      }
    }
  }
}

HypothesisSet make_hypothesis_set(const FamilySpec& spec,
                                  const std::vector<std::vector<double>>& alphas,
                                  const Eigen::VectorXd& prior, const Eigen::MatrixXd& loss,
                                  const Eigen::VectorXd& obs_cost) {
  HypothesisSet hs;
  hs.spec = spec;
  hs.naturals.reserve(alphas.size());
  for (const auto& a : alphas) hs.naturals.push_back(to_natural(spec, a));
  hs.prior = prior;
  hs.loss = loss;
  hs.obs_cost = obs_cost;
  validate(hs);
  return hs;
}

RankFactorization rank_factorize(const Eigen::MatrixXd& h, double tol) {
  RankFactorization out;
  const Eigen::Index rows = h.rows();
  const Eigen::Index cols = h.cols();
  if (rows == 0 || cols == 0) {
    out.L = Eigen::MatrixXd::Zero(rows, 0);
    out.U = Eigen::MatrixXd::Zero(0, cols);
    return out;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(h);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  int rank = 0;
  if (smax > 0) {
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      if (sv(i) >= tol * smax) ++rank;
    }
  }
  out.rank = rank;
  if (rank == 0) {
    out.L = Eigen::MatrixXd::Zero(rows, 0);
    out.U = Eigen::MatrixXd::Zero(0, cols);
    return out;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(h);
  const auto& perm = qr.colsPermutation().indices();
  out.pivots.assign(perm.data(), perm.data() + rank);
  std::sort(out.pivots.begin(), out.pivots.end());

  Eigen::MatrixXd c(rows, rank);
  for (int j = 0; j < rank; ++j) c.col(j) = h.col(out.pivots[static_cast<std::size_t>(j)]);
  out.U = c.colPivHouseholderQr().solve(h);
  for (int j = 0; j < rank; ++j) {
    out.U.col(out.pivots[static_cast<std::size_t>(j)]).setZero();
    out.U(j, out.pivots[static_cast<std::size_t>(j)]) = 1.0;
  }
  const double umax = out.U.cwiseAbs().maxCoeff();
  out.U = out.U.unaryExpr([umax](double v) { return std::abs(v) <= 1e-14 * umax ? 0.0 : v; });
  out.L = std::move(c);
  return out;
}

DiagnosticFactorization build_diagnostic(const HypothesisSet& hs, double tol) {
  validate(hs);
  const int n = hs.alternatives();
  const int m = hs.spec.dim;
  DiagnosticFactorization fac;
  fac.tol = tol;
  fac.H.resize(n, m);
  fac.dB.resize(n);
  const auto& base = hs.naturals[0];
  for (int i = 1; i <= n; ++i) {
    fac.H.row(i - 1) = (hs.naturals[i].eta - base.eta).transpose();
    fac.dB(i - 1) = hs.naturals[i].log_normalizer - base.log_normalizer;
  }

  // Pairwise duplicates at the rank tolerance (rows of H plus the reference).
  const double scale = std::max(1.0, fac.H.cwiseAbs().maxCoeff());
  for (int i = 0; i <= n; ++i) {
    for (int j = i + 1; j <= n; ++j) {
      Eigen::VectorXd hi = Eigen::VectorXd::Zero(m);
      if (i > 0) hi = fac.H.row(i - 1).transpose();
      const Eigen::VectorXd hj = fac.H.row(j - 1).transpose();
      const double bi = i == 0 ? 0.0 : fac.dB(i - 1);
      const double bj = fac.dB(j - 1);
      if ((hi - hj).cwiseAbs().maxCoeff() <= tol * scale &&
          std::abs(bi - bj) <= tol * std::max(1.0, std::abs(bi))) {
        std::ostringstream os;
        os << "hypotheses " << i << " and " << j << " coincide within tolerance " << tol;
        throw Error(ErrorCode::DuplicateHypothesis, os.str());
      }
    }
  }

  RankFactorization rf = rank_factorize(fac.H, tol);
  fac.L = std::move(rf.L);
  fac.U = std::move(rf.U);
  fac.rank = rf.rank;
  return fac;
}

DssState dss_update(const DiagnosticFactorization& fac, const FamilySpec& spec,
                    const DssState& state, double y) {
  const StatVec t = suff_stat(spec, y);
  return {state.x + fac.U * t, state.k + 1};
}

Eigen::VectorXd normalize_log_weights(const Eigen::VectorXd& log_w) {
  const double top = log_w.maxCoeff();
  Eigen::VectorXd p(log_w.size());
  if (!std::isfinite(top)) {
    throw Error(ErrorCode::ZeroEvidence, "all hypotheses have zero posterior weight");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < log_w.size(); ++i) {
    p(i) = std::exp(log_w(i) - top);
    total += p(i);
  }
  return p / total;
}

Belief reconstruct_belief(const DiagnosticFactorization& fac, const HypothesisSet& hs,
                          const DssState& state) {
  const int n = hs.alternatives();
  Eigen::VectorXd log_w(n + 1);
  log_w(0) = std::log(hs.prior(0));
  const Eigen::VectorXd lx = fac.L * state.x;
  for (int i = 1; i <= n; ++i) {
    log_w(i) = std::log(hs.prior(i)) + lx(i - 1) - state.k * fac.dB(i - 1);
  }
  return {normalize_log_weights(log_w)};
}

Belief bayes_update_direct(const HypothesisSet& hs, const Belief& belief, double y) {
  const int n = hs.count();
  Eigen::VectorXd log_w(n);
  for (int j = 0; j < n; ++j) {
    const double pj = belief.pi(j);
    log_w(j) = pj > 0 ? std::log(pj) + log_density(hs.spec, hs.naturals[j], y)
                      : -std::numeric_limits<double>::infinity();
  }
  return {normalize_log_weights(log_w)};
}

std::vector<double> normal_zeta(const HypothesisSet& hs) {
  std::vector<double> zeta;
  if (hs.spec.id != FamilyId::normal) return zeta;
  const double mu0 = hs.naturals[0].alpha[0];
  const double v0 = hs.naturals[0].alpha[1];
  for (int i = 1; i < hs.count(); ++i) {
    const double mu = hs.naturals[i].alpha[0];
    const double v = hs.naturals[i].alpha[1];
    zeta.push_back(v == v0 ? std::numeric_limits<double>::quiet_NaN()
                           : (v0 * mu - v * mu0) / (v - v0));
  }
  return zeta;
}

}  // namespace seqht
