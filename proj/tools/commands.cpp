#include "commands.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "config.hpp"
#include "json.hpp"
#include "seqht/error.hpp"
#include "seqht/policy_io.hpp"
#include "seqht/sim.hpp"

namespace seqht::cli {

namespace {

using Clock = std::chrono::steady_clock;

struct Options {
  std::string config;
  std::string out;
  std::string policy_file;
  std::string observations;
  std::string policy_kind = "optimal";
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  std::optional<int> tune_reps;
  std::optional<int> step_cap;
  bool strict = false;
  std::optional<int> stage;
  std::optional<int> threads;
};

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::RankTooHigh:
    case ErrorCode::HorizonNotConverged:
    case ErrorCode::ZeroEvidence:
      return 3;
    case ErrorCode::NonterminatingPolicy:
      return 4;
    default:
      return 2;
  }
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::ConfigError, "cannot open '" + path + "' for writing");
  f << std::setprecision(10);
  return f;
}

ProblemConfig load(const Options& o) {
  ProblemConfig cfg = load_config(o.config);
  if (o.threads) cfg.solver.threads = *o.threads;
  if (o.seed) cfg.sim.seed = *o.seed;
  if (o.reps) {
    if (*o.reps < 1) throw Error(ErrorCode::ConfigError, "--reps must be positive");
    cfg.sim.reps = *o.reps;
  }
  if (o.tune_reps) {
    if (*o.tune_reps < 1) throw Error(ErrorCode::ConfigError, "--tune-reps must be positive");
    cfg.msprt.reps = *o.tune_reps;
  }
  if (o.step_cap) {
    if (*o.step_cap < 1) throw Error(ErrorCode::ConfigError, "--step-cap must be positive");
    cfg.msprt.step_cap = *o.step_cap;
  }
  return cfg;
}

std::string problem_blob(const ProblemConfig& cfg, const Problem& p) {
  nlohmann::json j;
  j["name"] = p.name;
  j["source"] = cfg.source_name;
  j["config"] = cfg.text;
  return j.dump();
}

DpModel model_for(const ProblemConfig& cfg, const Problem& p, int quadrature_nodes) {
  if (p.is_sampling()) return build_sampling_model(*p.sampling, cfg.rank_tol, quadrature_nodes);
  return build_model(*p.base, build_diagnostic(*p.base, cfg.rank_tol), quadrature_nodes);
}

PolicyTable solve_problem(const ProblemConfig& cfg, const Problem& p, int& rank) {
  if (p.is_sampling()) {
    const SamplingFactorization fac = build_sampling_diagnostic(*p.sampling, cfg.rank_tol);
    rank = fac.rank;
    return solve_sampling(*p.sampling, fac, cfg.solver);
  }
  const DiagnosticFactorization fac = build_diagnostic(*p.base, cfg.rank_tol);
  rank = fac.rank;
  return solve(*p.base, fac, cfg.solver);
}

std::string join(const Eigen::VectorXd& v, const char* sep) {
  std::ostringstream os;
  os << std::setprecision(10);
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? sep : "") << v(i);
  return os.str();
}

int cmd_solve(const Options& o, std::ostream& out) {
  const ProblemConfig cfg = load(o);
  const Problem& p = cfg.primary();
  const auto t0 = Clock::now();
  int rank = 0;
  const PolicyTable pt = solve_problem(cfg, p, rank);
  const double elapsed = seconds_since(t0);
  write_policy(o.out, pt, problem_blob(cfg, p));

  int max_nodes = 0;
  bool lattice = true;
  for (const auto& s : pt.stages) {
    max_nodes = std::max(max_nodes, s.grid.size());
    lattice = lattice && (s.grid.lattice || s.grid.size() == 1);
  }
  out << std::setprecision(8);
  out << "problem: " << p.name << '\n';
  out << "family: " << family_name(p.spec().id) << '\n';
  out << "hypotheses: " << pt.hypotheses() << '\n';
  if (p.is_sampling()) {
    out << "modes: " << pt.modes() << '\n';
    out << "r_s = " << rank << '\n';
    out << "state_dim: " << pt.model.dim << '\n';
  } else {
    out << "r = " << rank << '\n';
  }
  out << "horizon: " << pt.horizon() << '\n';
  out << "bayes_risk: " << pt.bayes_risk << '\n';
  out << "grid: max " << max_nodes << " nodes per stage (" << (lattice ? "lattice" : "continuous")
      << ")\n";
  for (const auto& [k, risk] : pt.sweep) out << "sweep: K_max=" << k << " risk=" << risk << '\n';
  out << "solve_seconds: " << std::setprecision(3) << elapsed << '\n';
  out << "wrote: " << o.out << '\n';
  return 0;
}

int cmd_regions(const Options& o, std::ostream& out) {
  const PolicyFile pf = read_policy(o.policy_file);
  const PolicyTable& pt = pf.table;
  const int k = o.stage.value_or(0);
  const RegionReport r = acceptance_regions(pt, k);

  std::ofstream file;
  if (!o.out.empty()) file = open_out(o.out);
  std::ostream& csv = o.out.empty() ? out : file;
  csv << std::setprecision(10);
  const int modes = pt.modes();
  if (r.grid.dim == 1) {
    csv << "k,x,action\n";
    for (int i = 0; i < r.grid.n[0]; ++i) {
      csv << k << ',' << r.grid.coord(0, i) << ','
          << action_label(r.labels[static_cast<std::size_t>(i)], modes) << '\n';
    }
    if (!o.out.empty()) {
      const std::filesystem::path path(o.out);
      const auto bp = path.parent_path() / (path.stem().string() + "_breakpoints.csv");
      std::ofstream b = open_out(bp.string());
      b << "k,lo,hi,action\n";
      for (const Interval& iv : r.intervals) {
        b << k << ',' << iv.lo << ',' << iv.hi << ',' << action_label(iv.action, modes) << '\n';
      }
    }
  } else {
    csv << "k,x1,x2,action\n";
    double x[2];
    for (int idx = 0; idx < r.grid.size(); ++idx) {
      r.grid.node(idx, x);
      csv << k << ',' << x[0] << ',' << x[1] << ','
          << action_label(r.labels[static_cast<std::size_t>(idx)], modes) << '\n';
    }
  }
  return 0;
}

std::vector<double> read_observations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open observations file '" + path + "'");
  std::vector<double> ys;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r,");
    const std::string cell = line.substr(first, last - first + 1);
    if (line_no == 1 && cell == "y") continue;
    try {
      std::size_t used = 0;
      const double y = std::stod(cell, &used);
      if (used != cell.size()) throw std::invalid_argument(cell);
      ys.push_back(y);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError,
                  path + ":" + std::to_string(line_no) + ": not a number: '" + cell + "'");
    }
  }
  return ys;
}

int cmd_run(const Options& o, std::ostream& out, std::ostream& err) {
  const PolicyFile pf = read_policy(o.policy_file);
  const PolicyTable& pt = pf.table;
  const std::vector<double> ys = read_observations(o.observations);
  const DpModel& m = pt.model;

  std::ofstream file;
  if (!o.out.empty()) file = open_out(o.out);
  std::ostream& csv = o.out.empty() ? out : file;
  csv << std::setprecision(6) << std::fixed;
  csv << "k,y";
  for (int d = 0; d < m.dim; ++d) csv << ",x" << d + 1;
  for (int i = 0; i < m.hypotheses; ++i) csv << ",pi_" << i;
  csv << ",action\n";

  std::vector<double> x(static_cast<std::size_t>(m.dim), 0.0);
  std::size_t used = 0;
  for (int k = 0;; ++k) {
    const Action a = decide(pt, k, x.data());
    const auto pi = m.posterior(k, x.data());
    csv << k << ',';
    if (k > 0) csv << ys[used - 1];
    for (double v : x) csv << ',' << v;
    for (double v : pi) csv << ',' << v;
    csv << ',' << action_label(a, m.mode_count()) << '\n';
    if (a.is_accept()) break;
    if (used == ys.size()) {
      err << "note: observations exhausted before a terminal decision at k = " << k << '\n';
      return 0;
    }
    m.advance(a.index, ys[used++], x.data());
  }
  if (used < ys.size()) {
    err << "warning: ignoring " << ys.size() - used << " observation(s) after acceptance\n";
  }
  return 0;
}

nlohmann::json report_json(const SimulationReport& r) {
  nlohmann::json j;
  j["policy_id"] = r.policy_id;
  j["replications"] = r.replications;
  j["seed"] = r.seed;
  j["mean_cost"] = r.mean_cost;
  j["stderr"] = r.stderr_cost;
  j["ci95"] = {r.ci95.first, r.ci95.second};
  j["mean_stop_time"] = r.mean_stop_time;
  j["accept_frequencies"] = r.accept_frequencies;
  j["capped"] = r.capped;
  for (const TruthStats& t : r.per_truth) {
    j["per_truth"].push_back({{"count", t.count},
                              {"mean_cost", t.mean_cost},
                              {"stderr", t.stderr_cost},
                              {"mean_stop_time", t.mean_stop_time},
                              {"accept_frequencies", t.accept_frequencies}});
  }
  return j;
}

MsprtPolicy msprt_for(const ProblemConfig& cfg, const HypothesisSet& hs, std::ostream& out,
                      std::uint64_t seed, int threads) {
  if (cfg.msprt.thresholds) {
    MsprtPolicy p;
    const auto& t = *cfg.msprt.thresholds;
    if (static_cast<int>(t.size()) != hs.count()) {
      throw Error(ErrorCode::ConfigError, "msprt thresholds need one value per hypothesis");
    }
    p.thresholds = Eigen::Map<const Eigen::VectorXd>(t.data(), hs.count());
    p.step_cap = cfg.msprt.step_cap;
    p.loss = hs.loss;
    return p;
  }
  TuneOptions opt;
  opt.step_cap = cfg.msprt.step_cap;
  opt.threads = threads;
  const TuneResult tr = msprt_tune(hs, cfg.msprt.grid, cfg.msprt.reps, seed, opt);
  out << "tuned msprt thresholds: " << join(tr.policy.thresholds, " ") << " (cost "
      << tr.mean_cost << " +- " << tr.stderr_cost << ")\n";
  return tr.policy;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const ProblemConfig cfg = load(o);
  const Problem& p = cfg.primary();
  const SimProblem sp = p.is_sampling() ? sim_problem(*p.sampling) : sim_problem(*p.base);
  SimOptions so;
  so.threads = cfg.solver.threads;
  so.step_cap = cfg.msprt.step_cap;
  so.fail_on_cap = o.strict;

  std::unique_ptr<Policy> policy;
  if (o.policy_kind == "optimal") {
    std::shared_ptr<const PolicyTable> table;
    if (!o.policy_file.empty()) {
      PolicyFile pf = read_policy(o.policy_file);
      const DpModel expected = model_for(cfg, p, pf.table.config.quadrature_nodes);
      if (model_digest(expected) != pf.table.digest) {
        throw Error(ErrorCode::ConfigError,
                    "policy file '" + o.policy_file + "' was solved for a different problem");
      }
      table = std::make_shared<const PolicyTable>(std::move(pf.table));
    } else {
      int rank = 0;
      table = std::make_shared<const PolicyTable>(solve_problem(cfg, p, rank));
    }
    policy = std::make_unique<TablePolicy>(table);
  } else if (o.policy_kind == "msprt") {
    if (p.is_sampling()) {
      throw Error(ErrorCode::ConfigError, "msprt simulation needs a base (single-mode) problem");
    }
    policy = std::make_unique<MsprtSimPolicy>(
        *p.base, msprt_for(cfg, *p.base, out, cfg.sim.seed, cfg.solver.threads));
  } else {
    throw Error(ErrorCode::ConfigError, "--policy must be 'optimal' or 'msprt'");
  }

  const SimulationReport r = run_sim(sp, *policy, cfg.sim.reps, cfg.sim.seed, so);
  const nlohmann::json j = report_json(r);
  if (!o.out.empty()) {
    std::ofstream f = open_out(o.out);
    f << j.dump(2) << '\n';
  }
  out << std::setprecision(6);
  out << "policy: " << r.policy_id << '\n';
  out << "replications: " << r.replications << '\n';
  out << "mean_cost: " << r.mean_cost << " +- " << r.stderr_cost << " (ci95 " << r.ci95.first
      << ", " << r.ci95.second << ")\n";
  out << "mean_stop_time: " << r.mean_stop_time << '\n';
  out << "capped: " << r.capped << '\n';
  return 0;
}

int cmd_tune(const Options& o, std::ostream& out) {
  ProblemConfig cfg = load(o);
  const Problem& p = cfg.primary();
  if (p.is_sampling()) throw Error(ErrorCode::ConfigError, "MSPRT tuning needs a base problem");
  if (o.reps) cfg.msprt.reps = *o.reps;
  TuneOptions opt;
  opt.step_cap = cfg.msprt.step_cap;
  opt.threads = cfg.solver.threads;
  const TuneResult tr = msprt_tune(*p.base, cfg.msprt.grid, cfg.msprt.reps, cfg.sim.seed, opt);
  if (!o.out.empty()) {
    std::ofstream f = open_out(o.out);
    f << "combination";
    for (int i = 0; i < p.base->count(); ++i) f << ",A_" << i;
    f << ",cost,stderr\n";
    for (std::size_t c = 0; c < tr.table.size(); ++c) {
      f << c << ',' << join(tr.table[c].thresholds, ",") << ',' << tr.table[c].mean_cost << ','
        << tr.table[c].stderr_cost << '\n';
    }
  }
  out << std::setprecision(6);
  out << "combinations: " << tr.table.size() << '\n';
  out << "best thresholds: " << join(tr.policy.thresholds, " ") << '\n';
  out << "cost: " << tr.mean_cost << " +- " << tr.stderr_cost << '\n';
  return 0;
}

int cmd_compare(const Options& o, std::ostream& out) {
  const ProblemConfig cfg = load(o);
  std::ofstream file;
  if (!o.out.empty()) file = open_out(o.out);
  std::ostream& csv = o.out.empty() ? out : file;
  csv << std::setprecision(10);
  csv << "cell,optimal,optimal_stderr,optimal_ci95_lo,optimal_ci95_hi,msprt,msprt_stderr,"
         "msprt_ci95_lo,msprt_ci95_hi,difference,difference_stderr,loss_pct,bayes_risk,"
         "thresholds,msprt_capped\n";
  SimOptions so;
  so.threads = cfg.solver.threads;
  so.step_cap = cfg.msprt.step_cap;
  for (const Problem& p : cfg.problems) {
    if (p.is_sampling()) throw Error(ErrorCode::ConfigError, "compare needs base problems");
    const auto t0 = Clock::now();
    int rank = 0;
    auto table = std::make_shared<const PolicyTable>(solve_problem(cfg, p, rank));
    std::ostringstream sink;
    const MsprtPolicy mp = msprt_for(cfg, *p.base, sink, cfg.sim.seed, cfg.solver.threads);
    const TablePolicy opt(table);
    const MsprtSimPolicy ms(*p.base, mp);
    const PairedReport pr =
        compare(sim_problem(*p.base), opt, ms, cfg.sim.reps, cfg.sim.seed, so);
    csv << p.name << ',' << pr.first.mean_cost << ',' << pr.first.stderr_cost << ','
        << pr.first.ci95.first << ',' << pr.first.ci95.second << ',' << pr.second.mean_cost << ','
        << pr.second.stderr_cost << ',' << pr.second.ci95.first << ',' << pr.second.ci95.second
        << ',' << pr.mean_difference << ',' << pr.stderr_difference << ',' << pr.loss_percent
        << ',' << table->bayes_risk << ',' << join(mp.thresholds, ";") << ','
        << pr.second.capped << '\n';
    if (!o.out.empty()) {
      out << std::setprecision(5) << p.name << ": optimal " << pr.first.mean_cost << " msprt "
          << pr.second.mean_cost << " loss " << pr.loss_percent << "% ("
          << std::setprecision(3) << seconds_since(t0) << " s)\n";
    }
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayes-optimal sequential multi-hypothesis testing"};
  app.require_subcommand(1);
  Options o;

  const auto add_threads = [&](CLI::App* c) {
    c->add_option("--threads", o.threads, "worker threads (0: all cores)");
  };
  auto* solve_cmd = app.add_subcommand("solve", "solve the optimal policy and write a policy file");
  solve_cmd->add_option("--config", o.config, "problem config (YAML)")->required();
  solve_cmd->add_option("--out", o.out, "policy file to write")->required();
  add_threads(solve_cmd);

  auto* regions_cmd = app.add_subcommand("regions", "export acceptance regions at one stage");
  regions_cmd->add_option("policy", o.policy_file, "policy file")->required();
  regions_cmd->add_option("--stage", o.stage, "stage k")->required();
  regions_cmd->add_option("--out", o.out, "CSV file (default: stdout)");

  auto* run_cmd = app.add_subcommand("run", "step a policy through an observation file");
  run_cmd->add_option("policy", o.policy_file, "policy file")->required();
  run_cmd->add_option("observations", o.observations, "one observation per line")->required();
  run_cmd->add_option("--out", o.out, "CSV file (default: stdout)");

  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo evaluation of a policy");
  sim_cmd->add_option("--config", o.config, "problem config (YAML)")->required();
  sim_cmd->add_option("--policy", o.policy_kind, "optimal or msprt");
  sim_cmd->add_option("--policy-file", o.policy_file, "solved policy to reuse");
  sim_cmd->add_option("--out", o.out, "JSON report");
  sim_cmd->add_option("--reps", o.reps, "replications");
  sim_cmd->add_option("--seed", o.seed, "master seed");
  sim_cmd->add_option("--tune-reps", o.tune_reps, "MSPRT tuning replications");
  sim_cmd->add_option("--step-cap", o.step_cap, "observations allowed per replication");
  sim_cmd->add_flag("--strict", o.strict, "fail instead of forcing a decision at the step cap");
  add_threads(sim_cmd);

  auto* tune_cmd = app.add_subcommand("tune-msprt", "tune MSPRT thresholds by enumeration");
  tune_cmd->add_option("--config", o.config, "problem config (YAML)")->required();
  tune_cmd->add_option("--out", o.out, "CSV of every combination");
  tune_cmd->add_option("--reps", o.reps, "replications");
  tune_cmd->add_option("--seed", o.seed, "master seed");
  add_threads(tune_cmd);

  auto* compare_cmd = app.add_subcommand("compare", "paired optimal vs MSPRT comparison");
  compare_cmd->add_option("--config", o.config, "problem config (YAML)")->required();
  compare_cmd->add_option("--out", o.out, "CSV file (default: stdout)");
  compare_cmd->add_option("--reps", o.reps, "paired replications per cell");
  compare_cmd->add_option("--seed", o.seed, "master seed");
  compare_cmd->add_option("--tune-reps", o.tune_reps, "MSPRT tuning replications");
  add_threads(compare_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*solve_cmd) return cmd_solve(o, out);
    if (*regions_cmd) return cmd_regions(o, out);
    if (*run_cmd) return cmd_run(o, out, err);
    if (*sim_cmd) return cmd_simulate(o, out);
    if (*tune_cmd) return cmd_tune(o, out);
    if (*compare_cmd) return cmd_compare(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace seqht::cli
