#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "seqht/expfam.hpp"

namespace seqht {

/// A terminal decision (accept hypothesis `index`) or another observation
/// under sampling mode `index`. Plain waiting is sampling with mode 0.
struct Action {
  enum class Kind : std::uint8_t { accept, sample };
  Kind kind = Kind::sample;
  int index = 0;

  static Action accept(int j) { return {Kind::accept, j}; }
  static Action wait(int mode = 0) { return {Kind::sample, mode}; }
  bool is_accept() const { return kind == Kind::accept; }
  friend bool operator==(const Action&, const Action&) = default;
};

/// Table codes: 0..hypotheses-1 accept, hypotheses + m samples mode m.
inline std::int32_t encode_action(Action a, int hypotheses) {
  return a.is_accept() ? a.index : hypotheses + a.index;
}
inline Action decode_action(std::int32_t code, int hypotheses) {
  return code < hypotheses ? Action::accept(code) : Action::wait(code - hypotheses);
}

/// "accept_j", "wait" when there is a single mode, otherwise "sample_m" (1-based).
std::string action_label(Action a, int modes);

/// Axis-aligned uniform grid; node (i0, i1) is stored at i0 * n[1] + i1.
struct StageGrid {
  int k = 0;
  int dim = 1;
  std::array<double, 2> lo{0.0, 0.0};
  std::array<double, 2> step{0.0, 0.0};
  std::array<int, 2> n{1, 1};
  bool lattice = false;

  int size() const { return dim == 1 ? n[0] : n[0] * n[1]; }
  double hi(int d) const { return lo[d] + step[d] * (n[d] - 1); }
  double coord(int d, int i) const { return lo[d] + step[d] * i; }
  void node(int idx, double* x) const;
};

struct StageTable {
  StageGrid grid;
  std::vector<double> value;
  std::vector<std::int32_t> action;
};

/// Piecewise-linear (1-D) or bilinear (2-D) interpolation, clamped at the
/// grid boundary.
double interpolate(const StageTable& table, const double* x);

/// One observation option: the state moves by proj * t(y) + shift and costs
/// cost(i) when hypothesis i is true.
struct DpMode {
  std::vector<NaturalParam> naturals;  // per hypothesis
  Eigen::MatrixXd proj;                // dim x M
  Eigen::VectorXd shift;               // dim
  Eigen::VectorXd cost;                // per hypothesis
  // Quadrature image of the increment under each hypothesis.
  std::vector<std::vector<double>> inc;     // [i][q * dim + d]
  std::vector<std::vector<double>> weight;  // [i][q]
  std::vector<std::array<double, 2>> mean;  // [i][d]
  std::vector<std::array<double, 2>> sd;    // [i][d]
};

/// Optimal stopping over a low-dimensional statistic x at stage k. The
/// posterior log-weights are log_prior(0) and
/// log_prior(i) + (L x)(i-1) - k drift(i-1) for i >= 1.
struct DpModel {
  FamilySpec family;
  int dim = 1;
  int hypotheses = 2;
  Eigen::MatrixXd L;
  Eigen::VectorXd drift;
  Eigen::VectorXd log_prior;
  Eigen::MatrixXd loss;
  std::vector<DpMode> modes;
  double lattice_spacing = 0.0;  // > 0 when every 1-D increment is on a lattice

  int mode_count() const { return static_cast<int>(modes.size()); }
  void posterior(int k, const double* x, double* pi) const;
  std::vector<double> posterior(int k, const double* x) const;
  /// Next state after observing y under mode m.
  void advance(int mode, double y, double* x) const;
};

/// Fills quadrature increments and their moments for every mode, then detects
/// an exact 1-D lattice.
void prepare_model(DpModel& model, int quadrature_nodes);

std::uint64_t model_digest(const DpModel& model);

struct GridSettings {
  int points_1d = 2001;
  int points_2d = 401;
  double width_sigmas = 6.0;
  int max_lattice_nodes = 200001;
  int threads = 0;  // 0: hardware concurrency
};

StageGrid make_stage_grid(const DpModel& model, const GridSettings& settings, int k);

struct NodeEval {
  double value = 0.0;
  std::int32_t action = 0;
  double stop_value = 0.0;
  double continue_value = 0.0;  // +inf at the forced-stop stage
};

/// min over accepting each hypothesis and over sampling each mode, with the
/// continuation evaluated by quadrature against `next`. A null `next` forces
/// acceptance. Ties go to accepting, then to the lowest index.
NodeEval bellman(const DpModel& model, const StageTable* next, int k, const double* x);

/// Stages 0..horizon; stage `horizon` is the forced-stop envelope.
std::vector<StageTable> backward_induction(const DpModel& model, const GridSettings& settings,
                                           int horizon);

struct ForwardResult {
  double risk = 0.0;
  std::vector<double> per_truth;  // expected cost given hypothesis i
  double mean_stop = 0.0;
};

/// Pushes the prior through the stored node actions with the same quadrature
/// and interpolation weights the backward pass uses. Costs are split across
/// hypotheses by the posterior at each node.
ForwardResult forward_evaluate(const DpModel& model, const std::vector<StageTable>& stages);

int resolve_threads(int requested);

}  // namespace seqht
