#pragma once

#include <functional>
#include <vector>

namespace seqht {

/// Gauss rule normalised so that the weights sum to one (a probability rule).
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Nodes/weights for E[f(Z)], Z ~ N(0, 1) (probabilists' Gauss-Hermite).
/// The rule is symmetrised so that odd moments vanish to rounding.
GaussRule gauss_hermite_normal(int n);

/// Nodes/weights for E[f(X)], X ~ Gamma(alpha + 1, 1) (generalised Gauss-Laguerre).
GaussRule gauss_laguerre(int n, double alpha);

/// Nodes/weights for E[f(Y)], Y ~ Beta(a, b) on [0, 1] (shifted Gauss-Jacobi).
GaussRule gauss_jacobi_beta(int n, double a, double b);

/// Gauss rule for a smooth density known up to a constant through its log on
/// [lo, hi]. The moments come from a fine trapezoid discretisation and the
/// recurrence from the Stieltjes procedure; mass outside [lo, hi] is dropped.
GaussRule gauss_from_log_density(int n, double lo, double hi, const std::function<double(double)>& log_w,
                                 int grid_points = 6001);

/// Golub-Welsch: nodes and normalised weights of the monic orthogonal family
/// with recurrence p_{n+1} = (x - diag_n) p_n - offdiag_sq_n p_{n-1}.
/// `offdiag_sq` has one fewer entry than `diag`.
GaussRule golub_welsch(const std::vector<double>& diag, const std::vector<double>& offdiag_sq);

}  // namespace seqht
