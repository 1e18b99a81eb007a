#include "seqht/dp_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "parallel.hpp"
#include "seqht/error.hpp"

namespace seqht {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Hypotheses whose posterior weight falls below this are skipped in the
// continuation integral; their contribution is below double resolution.
constexpr double kNegligible = 1e-17;

struct Locator {
  int i;
  double f;
};

// Cell index and fractional offset along one axis, clamped to the grid.
inline Locator locate(const StageGrid& g, int d, double x) {
  const int n = g.n[d];
  if (n == 1) return {0, 0.0};
  const double u = (x - g.lo[d]) / g.step[d];
  if (!(u > 0.0)) return {0, 0.0};
  if (u >= n - 1) return {n - 2, 1.0};
  const int i = static_cast<int>(u);
  return {i, u - i};
}

std::uint64_t fnv(std::uint64_t h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv_doubles(std::uint64_t h, const double* v, std::size_t n) {
  return fnv(h, v, n * sizeof(double));
}

}  // namespace

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

std::string action_label(Action a, int modes) {
  if (a.is_accept()) return "accept_" + std::to_string(a.index);
  if (modes == 1) return "wait";
  return "sample_" + std::to_string(a.index + 1);
}

void StageGrid::node(int idx, double* x) const {
  if (dim == 1) {
    x[0] = coord(0, idx);
    return;
  }
  x[0] = coord(0, idx / n[1]);
  x[1] = coord(1, idx % n[1]);
}

double interpolate(const StageTable& table, const double* x) {
  const StageGrid& g = table.grid;
  const double* v = table.value.data();
  const Locator a = locate(g, 0, x[0]);
  if (g.dim == 1) {
    if (g.n[0] == 1) return v[0];
    return v[a.i] + a.f * (v[a.i + 1] - v[a.i]);
  }
  const Locator b = locate(g, 1, x[1]);
  const int n1 = g.n[1];
  const int a1 = g.n[0] == 1 ? a.i : a.i + 1;
  const int b1 = n1 == 1 ? b.i : b.i + 1;
  const double v00 = v[a.i * n1 + b.i];
  const double v01 = v[a.i * n1 + b1];
  const double v10 = v[a1 * n1 + b.i];
  const double v11 = v[a1 * n1 + b1];
  const double lo = v00 + b.f * (v01 - v00);
  const double hi = v10 + b.f * (v11 - v10);
  return lo + a.f * (hi - lo);
}

void DpModel::posterior(int k, const double* x, double* pi) const {
  pi[0] = log_prior(0);
  double top = pi[0];
  for (int i = 1; i < hypotheses; ++i) {
    double lx = 0.0;
    for (int d = 0; d < dim; ++d) lx += L(i - 1, d) * x[d];
    pi[i] = log_prior(i) + lx - k * drift(i - 1);
    top = std::max(top, pi[i]);
  }
  double total = 0.0;
  for (int i = 0; i < hypotheses; ++i) {
    pi[i] = std::exp(pi[i] - top);
    total += pi[i];
  }
  for (int i = 0; i < hypotheses; ++i) pi[i] /= total;
}

std::vector<double> DpModel::posterior(int k, const double* x) const {
  std::vector<double> pi(static_cast<std::size_t>(hypotheses));
  posterior(k, x, pi.data());
  return pi;
}

void DpModel::advance(int mode, double y, double* x) const {
  const DpMode& m = modes.at(static_cast<std::size_t>(mode));
  const StatVec t = suff_stat(family, y);
  for (int d = 0; d < dim; ++d) x[d] += m.proj.row(d).dot(t) + m.shift(d);
}

void prepare_model(DpModel& model, int quadrature_nodes) {
  const int dim = model.dim;
  for (DpMode& m : model.modes) {
    m.inc.assign(static_cast<std::size_t>(model.hypotheses), {});
    m.weight.assign(static_cast<std::size_t>(model.hypotheses), {});
    m.mean.assign(static_cast<std::size_t>(model.hypotheses), {0.0, 0.0});
    m.sd.assign(static_cast<std::size_t>(model.hypotheses), {0.0, 0.0});
    for (int i = 0; i < model.hypotheses; ++i) {
      const auto rule =
          integration_rule(model.family, m.naturals[static_cast<std::size_t>(i)], quadrature_nodes);
      auto& inc = m.inc[static_cast<std::size_t>(i)];
      auto& w = m.weight[static_cast<std::size_t>(i)];
      inc.reserve(rule.size() * static_cast<std::size_t>(dim));
      w.reserve(rule.size());
      for (const auto& node : rule) {
        const StatVec t = suff_stat(model.family, node.y);
        for (int d = 0; d < dim; ++d) inc.push_back(m.proj.row(d).dot(t) + m.shift(d));
        w.push_back(node.w);
      }
      for (int d = 0; d < dim; ++d) {
        double mean = 0.0;
        for (std::size_t q = 0; q < w.size(); ++q) mean += w[q] * inc[q * dim + d];
        double var = 0.0;
        for (std::size_t q = 0; q < w.size(); ++q) {
          const double dev = inc[q * dim + d] - mean;
          var += w[q] * dev * dev;
        }
        m.mean[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] = mean;
        m.sd[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] = std::sqrt(var);
      }
    }
  }

  model.lattice_spacing = 0.0;
  if (dim != 1 || !is_discrete(model.family)) return;
  double h = kInf;
  for (const DpMode& m : model.modes) {
    for (const auto& inc : m.inc) {
      for (double v : inc) {
        if (std::abs(v) > 1e-12) h = std::min(h, std::abs(v));
      }
    }
  }
  if (!std::isfinite(h)) return;
  for (const DpMode& m : model.modes) {
    for (const auto& inc : m.inc) {
      for (double v : inc) {
        const double r = v / h;
        if (std::abs(r - std::round(r)) > 1e-9) return;
      }
    }
  }
  model.lattice_spacing = h;
}

std::uint64_t model_digest(const DpModel& m) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const int id = static_cast<int>(m.family.id);
  h = fnv(h, &id, sizeof id);
  h = fnv(h, &m.family.fixed, sizeof m.family.fixed);
  h = fnv(h, &m.dim, sizeof m.dim);
  h = fnv(h, &m.hypotheses, sizeof m.hypotheses);
  h = fnv_doubles(h, m.L.data(), static_cast<std::size_t>(m.L.size()));
  h = fnv_doubles(h, m.drift.data(), static_cast<std::size_t>(m.drift.size()));
  h = fnv_doubles(h, m.log_prior.data(), static_cast<std::size_t>(m.log_prior.size()));
  h = fnv_doubles(h, m.loss.data(), static_cast<std::size_t>(m.loss.size()));
  for (const DpMode& mode : m.modes) {
    h = fnv_doubles(h, mode.proj.data(), static_cast<std::size_t>(mode.proj.size()));
    h = fnv_doubles(h, mode.shift.data(), static_cast<std::size_t>(mode.shift.size()));
    h = fnv_doubles(h, mode.cost.data(), static_cast<std::size_t>(mode.cost.size()));
    for (const auto& nat : mode.naturals) {
      h = fnv_doubles(h, nat.alpha.data(), nat.alpha.size());
    }
  }
  return h;
}

StageGrid make_stage_grid(const DpModel& model, const GridSettings& settings, int k) {
  StageGrid g;
  g.k = k;
  g.dim = model.dim;
  const double root = std::sqrt(static_cast<double>(k));
  for (int d = 0; d < model.dim; ++d) {
    double lo = kInf;
    double hi = -kInf;
    double sd = 0.0;
    for (const DpMode& m : model.modes) {
      for (int i = 0; i < model.hypotheses; ++i) {
        const double mu = k * m.mean[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
        lo = std::min(lo, mu);
        hi = std::max(hi, mu);
        sd = std::max(sd, m.sd[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)]);
      }
    }
    lo -= settings.width_sigmas * root * sd;
    hi += settings.width_sigmas * root * sd;

    const double span = hi - lo;
    const double scale = std::max({1.0, std::abs(lo), std::abs(hi)});
    if (!(span > 1e-12 * scale)) {
      g.lo[static_cast<std::size_t>(d)] = 0.5 * (lo + hi);
      g.step[static_cast<std::size_t>(d)] = 0.0;
      g.n[static_cast<std::size_t>(d)] = 1;
      continue;
    }
    if (model.lattice_spacing > 0) {
      const double h = model.lattice_spacing;
      const double first = std::floor(lo / h);
      const double last = std::ceil(hi / h);
      if (last - first + 1 <= settings.max_lattice_nodes) {
        g.lattice = true;
        g.lo[static_cast<std::size_t>(d)] = first * h;
        g.step[static_cast<std::size_t>(d)] = h;
        g.n[static_cast<std::size_t>(d)] = static_cast<int>(last - first) + 1;
        continue;
      }
    }
    const int n = model.dim == 1 ? settings.points_1d : settings.points_2d;
    g.lo[static_cast<std::size_t>(d)] = lo;
    g.step[static_cast<std::size_t>(d)] = span / (n - 1);
    g.n[static_cast<std::size_t>(d)] = n;
  }
  return g;
}

NodeEval bellman(const DpModel& model, const StageTable* next, int k, const double* x) {
  const int n = model.hypotheses;
  const int dim = model.dim;
  double pi[64];
  std::vector<double> pi_heap;
  double* p = pi;
  if (n > 64) {
    pi_heap.resize(static_cast<std::size_t>(n));
    p = pi_heap.data();
  }
  model.posterior(k, x, p);

  NodeEval out;
  out.stop_value = kInf;
  for (int j = 0; j < n; ++j) {
    double a = 0.0;
    for (int i = 0; i < n; ++i) a += p[i] * model.loss(i, j);
    if (a < out.stop_value) {
      out.stop_value = a;
      out.action = j;
    }
  }
  out.value = out.stop_value;
  out.continue_value = kInf;
  if (next == nullptr) return out;

  // Waiting costs at least the expected per-period cost.
  double floor_cost = kInf;
  for (const DpMode& m : model.modes) {
    double c = 0.0;
    for (int i = 0; i < n; ++i) c += p[i] * m.cost(i);
    floor_cost = std::min(floor_cost, c);
  }
  if (out.stop_value <= floor_cost) return out;

  double y[2] = {0.0, 0.0};
  for (int a = 0; a < model.mode_count(); ++a) {
    const DpMode& m = model.modes[static_cast<std::size_t>(a)];
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      if (p[i] < kNegligible) continue;
      const auto& inc = m.inc[static_cast<std::size_t>(i)];
      const auto& w = m.weight[static_cast<std::size_t>(i)];
      double e = 0.0;
      const std::size_t q_count = w.size();
      for (std::size_t q = 0; q < q_count; ++q) {
        for (int d = 0; d < dim; ++d) y[d] = x[d] + inc[q * dim + d];
        e += w[q] * interpolate(*next, y);
      }
      total += p[i] * (m.cost(i) + e);
    }
    if (total < out.continue_value) {
      out.continue_value = total;
      if (total < out.value) {
        out.value = total;
        out.action = n + a;
      }
    }
  }
  return out;
}

std::vector<StageTable> backward_induction(const DpModel& model, const GridSettings& settings,
                                           int horizon) {
  std::vector<StageTable> stages(static_cast<std::size_t>(horizon) + 1);
  const int threads = resolve_threads(settings.threads);
  for (int k = horizon; k >= 0; --k) {
    StageTable& t = stages[static_cast<std::size_t>(k)];
    t.grid = make_stage_grid(model, settings, k);
    const int size = t.grid.size();
    t.value.assign(static_cast<std::size_t>(size), 0.0);
    t.action.assign(static_cast<std::size_t>(size), 0);
    const StageTable* next = k == horizon ? nullptr : &stages[static_cast<std::size_t>(k) + 1];
    detail::parallel_for(size, threads, [&](int begin, int end) {
      double x[2];
      for (int idx = begin; idx < end; ++idx) {
        t.grid.node(idx, x);
        const NodeEval e = bellman(model, next, k, x);
        t.value[static_cast<std::size_t>(idx)] = e.value;
        t.action[static_cast<std::size_t>(idx)] = e.action;
      }
    });
  }
  return stages;
}

ForwardResult forward_evaluate(const DpModel& model, const std::vector<StageTable>& stages) {
  const int n = model.hypotheses;
  const int dim = model.dim;
  ForwardResult out;
  std::vector<double> cost(static_cast<std::size_t>(n), 0.0);
  std::vector<double> stop(static_cast<std::size_t>(n), 0.0);
  std::vector<double> pi(static_cast<std::size_t>(n));

  std::vector<double> mass(1, 1.0);
  for (std::size_t k = 0; k < stages.size(); ++k) {
    const StageTable& t = stages[k];
    const bool last = k + 1 == stages.size();
    std::vector<double> next_mass;
    if (!last) next_mass.assign(static_cast<std::size_t>(stages[k + 1].grid.size()), 0.0);
    double x[2];
    double y[2] = {0.0, 0.0};
    for (int idx = 0; idx < t.grid.size(); ++idx) {
      const double mk = mass[static_cast<std::size_t>(idx)];
      if (mk == 0.0) continue;
      t.grid.node(idx, x);
      model.posterior(static_cast<int>(k), x, pi.data());
      const std::int32_t code = t.action[static_cast<std::size_t>(idx)];
      if (code < n) {
        for (int i = 0; i < n; ++i) {
          const double mi = mk * pi[static_cast<std::size_t>(i)];
          cost[static_cast<std::size_t>(i)] += mi * model.loss(i, code);
          stop[static_cast<std::size_t>(i)] += mi * static_cast<double>(k);
        }
        continue;
      }
      const DpMode& m = model.modes[static_cast<std::size_t>(code - n)];
      const StageGrid& g = stages[k + 1].grid;
      for (int i = 0; i < n; ++i) {
        const double mi = mk * pi[static_cast<std::size_t>(i)];
        cost[static_cast<std::size_t>(i)] += mi * m.cost(i);
        if (pi[static_cast<std::size_t>(i)] < kNegligible) continue;
        const auto& inc = m.inc[static_cast<std::size_t>(i)];
        const auto& w = m.weight[static_cast<std::size_t>(i)];
        for (std::size_t q = 0; q < w.size(); ++q) {
          for (int d = 0; d < dim; ++d) y[d] = x[d] + inc[q * dim + d];
          const double wq = mi * w[q];
          const Locator a = locate(g, 0, y[0]);
          const int a1 = g.n[0] == 1 ? a.i : a.i + 1;
          if (dim == 1) {
            next_mass[static_cast<std::size_t>(a.i)] += wq * (1.0 - a.f);
            next_mass[static_cast<std::size_t>(a1)] += wq * a.f;
            continue;
          }
          const Locator b = locate(g, 1, y[1]);
          const int b1 = g.n[1] == 1 ? b.i : b.i + 1;
          const int n1 = g.n[1];
          next_mass[static_cast<std::size_t>(a.i * n1 + b.i)] += wq * (1.0 - a.f) * (1.0 - b.f);
          next_mass[static_cast<std::size_t>(a.i * n1 + b1)] += wq * (1.0 - a.f) * b.f;
          next_mass[static_cast<std::size_t>(a1 * n1 + b.i)] += wq * a.f * (1.0 - b.f);
          next_mass[static_cast<std::size_t>(a1 * n1 + b1)] += wq * a.f * b.f;
        }
      }
    }
    mass.swap(next_mass);
  }

  out.per_truth.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double theta = std::exp(model.log_prior(i));
    out.risk += cost[static_cast<std::size_t>(i)];
    out.mean_stop += stop[static_cast<std::size_t>(i)];
    out.per_truth[static_cast<std::size_t>(i)] = cost[static_cast<std::size_t>(i)] / theta;
  }
  return out;
}

}  // namespace seqht
