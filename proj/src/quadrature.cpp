#include "seqht/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <stdexcept>

namespace seqht {

GaussRule golub_welsch(const std::vector<double>& diag, const std::vector<double>& offdiag_sq) {
  const int n = static_cast<int>(diag.size());
  if (n < 1 || static_cast<int>(offdiag_sq.size()) != n - 1) {
    throw std::invalid_argument("golub_welsch: inconsistent recurrence lengths");
  }
  GaussRule rule;
  if (n == 1) {
    rule.nodes = {diag[0]};
    rule.weights = {1.0};
    return rule;
  }
  Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(diag.data(), n);
  Eigen::VectorXd e(n - 1);
  for (int i = 0; i < n - 1; ++i) e(i) = std::sqrt(offdiag_sq[static_cast<std::size_t>(i)]);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw std::runtime_error("golub_welsch: eigensolver failed");

  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    rule.nodes[static_cast<std::size_t>(j)] = es.eigenvalues()(j);
    const double v0 = es.eigenvectors()(0, j);
    rule.weights[static_cast<std::size_t>(j)] = v0 * v0;
  }
  const double total = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
  for (double& w : rule.weights) w /= total;
  return rule;
}

GaussRule gauss_hermite_normal(int n) {
  std::vector<double> diag(static_cast<std::size_t>(n), 0.0);
  std::vector<double> off(static_cast<std::size_t>(n - 1));
  for (int k = 1; k < n; ++k) off[static_cast<std::size_t>(k - 1)] = k;
  GaussRule rule = golub_welsch(diag, off);

  // Enforce exact mirror symmetry about zero.
  const std::size_t m = rule.nodes.size();
  for (std::size_t j = 0; j < m / 2; ++j) {
    const std::size_t k = m - 1 - j;
    const double x = 0.5 * (rule.nodes[k] - rule.nodes[j]);
    const double w = 0.5 * (rule.weights[k] + rule.weights[j]);
    rule.nodes[j] = -x;
    rule.nodes[k] = x;
    rule.weights[j] = w;
    rule.weights[k] = w;
  }
  if (m % 2 == 1) rule.nodes[m / 2] = 0.0;
  return rule;
}

GaussRule gauss_laguerre(int n, double alpha) {
  std::vector<double> diag(static_cast<std::size_t>(n));
  std::vector<double> off(static_cast<std::size_t>(n - 1));
  for (int k = 0; k < n; ++k) diag[static_cast<std::size_t>(k)] = 2.0 * k + alpha + 1.0;
  for (int k = 1; k < n; ++k) off[static_cast<std::size_t>(k - 1)] = k * (k + alpha);
  return golub_welsch(diag, off);
}

GaussRule gauss_jacobi_beta(int n, double a, double b) {
  // Jacobi weight (1-x)^al (1+x)^be on [-1, 1] with y = (1 + x) / 2.
  const double al = b - 1.0;
  const double be = a - 1.0;
  const double ab = al + be;
  std::vector<double> diag(static_cast<std::size_t>(n));
  std::vector<double> off(static_cast<std::size_t>(n - 1));
  diag[0] = (be - al) / (ab + 2.0);
  for (int k = 1; k < n; ++k) {
    const double s = 2.0 * k + ab;
    diag[static_cast<std::size_t>(k)] = (be * be - al * al) / (s * (s + 2.0));
  }
  for (int k = 1; k < n; ++k) {
    double v;
    if (k == 1) {
      v = 4.0 * (1.0 + al) * (1.0 + be) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab));
    } else {
      const double s = 2.0 * k + ab;
      v = 4.0 * k * (k + al) * (k + be) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0));
    }
    off[static_cast<std::size_t>(k - 1)] = v;
  }
  GaussRule rule = golub_welsch(diag, off);
  const double lo = std::nextafter(0.0, 1.0);
  const double hi = std::nextafter(1.0, 0.0);
  for (double& x : rule.nodes) x = std::clamp(0.5 * (1.0 + x), lo, hi);
  return rule;
}

GaussRule gauss_from_log_density(int n, double lo, double hi, const std::function<double(double)>& log_w,
                                 int grid_points) {
  const int m = std::max(grid_points, 4 * n);
  const double h = (hi - lo) / (m - 1);
  std::vector<double> u(static_cast<std::size_t>(m));
  std::vector<double> lw(static_cast<std::size_t>(m));
  double peak = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < m; ++j) {
    u[j] = lo + h * j;
    lw[j] = log_w(u[j]);
    peak = std::max(peak, lw[j]);
  }
  std::vector<double> w(static_cast<std::size_t>(m));
  double total = 0.0;
  for (int j = 0; j < m; ++j) {
    w[j] = std::exp(lw[j] - peak) * ((j == 0 || j == m - 1) ? 0.5 : 1.0);
    total += w[j];
  }
  double mean = 0.0;
  for (int j = 0; j < m; ++j) {
    w[j] /= total;
    mean += w[j] * u[j];
  }
  double var = 0.0;
  for (int j = 0; j < m; ++j) var += w[j] * (u[j] - mean) * (u[j] - mean);
  const double sd = std::sqrt(var);
  for (double& x : u) x = (x - mean) / sd;

  // Stieltjes with full reorthogonalisation on the standardised points.
  std::vector<std::vector<double>> p;
  std::vector<double> diag, off;
  p.emplace_back(static_cast<std::size_t>(m), 1.0);
  double beta_prev = 0.0;
  for (int k = 0; k < n; ++k) {
    const auto& pk = p.back();
    double a = 0.0;
    for (int j = 0; j < m; ++j) a += w[j] * u[j] * pk[j] * pk[j];
    diag.push_back(a);
    if (k == n - 1) break;
    std::vector<double> q(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
      q[j] = (u[j] - a) * pk[j] - (k > 0 ? beta_prev * p[p.size() - 2][j] : 0.0);
    }
    for (const auto& pi : p) {
      double c = 0.0;
      for (int j = 0; j < m; ++j) c += w[j] * q[j] * pi[j];
      for (int j = 0; j < m; ++j) q[j] -= c * pi[j];
    }
    double nrm = 0.0;
    for (int j = 0; j < m; ++j) nrm += w[j] * q[j] * q[j];
    nrm = std::sqrt(nrm);
    off.push_back(nrm * nrm);
    for (double& x : q) x /= nrm;
    p.push_back(std::move(q));
    beta_prev = nrm;
  }
  GaussRule rule = golub_welsch(diag, off);
  for (double& x : rule.nodes) x = mean + sd * x;
  return rule;
}

}  // namespace seqht
