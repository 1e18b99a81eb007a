#include "config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

#include "seqht/error.hpp"

namespace seqht::cli {

namespace {

class Parser {
 public:
  explicit Parser(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Mark& mark, const std::string& what) const {
    std::ostringstream os;
    os << source_;
    if (!mark.is_null()) os << ':' << mark.line + 1 << ':' << mark.column + 1;
    os << ": " << what;
    throw Error(ErrorCode::ConfigError, os.str());
  }
  [[noreturn]] void fail(const YAML::Node& node, const std::string& what) const {
    fail(node.Mark(), what);
  }

  void keys(const YAML::Node& node, const std::set<std::string>& allowed,
            const std::string& where) const {
    if (!node.IsMap()) fail(node, where + " must be a mapping");
    for (const auto& kv : node) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) fail(kv.first, "unknown key '" + key + "' in " + where);
    }
  }

  double number(const YAML::Node& node, const std::string& what) const {
    if (!node.IsScalar()) fail(node, what + " must be a number");
    try {
      return node.as<double>();
    } catch (const YAML::Exception&) {
      fail(node, what + " must be a number, got '" + node.Scalar() + "'");
    }
  }

  int integer(const YAML::Node& node, const std::string& what) const {
    const double v = number(node, what);
    if (v != std::floor(v) || std::abs(v) > 2e9) fail(node, what + " must be an integer");
    return static_cast<int>(v);
  }

  std::vector<double> numbers(const YAML::Node& node, const std::string& what) const {
    if (node.IsScalar()) return {number(node, what)};
    if (!node.IsSequence()) fail(node, what + " must be a number or a list of numbers");
    std::vector<double> out;
    for (const auto& item : node) out.push_back(number(item, what));
    return out;
  }

  Eigen::MatrixXd matrix(const YAML::Node& node, int rows, int cols, const std::string& what) const {
    if (!node.IsSequence() || static_cast<int>(node.size()) != rows) {
      std::ostringstream os;
      os << what << " must be a list of " << rows << " rows";
      fail(node, os.str());
    }
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
      const YAML::Node row = node[static_cast<std::size_t>(i)];
      if (!row.IsSequence() || static_cast<int>(row.size()) != cols) {
        std::ostringstream os;
        os << what << " row " << i << " must have " << cols << " entries";
        fail(row, os.str());
      }
      for (int j = 0; j < cols; ++j) m(i, j) = number(row[static_cast<std::size_t>(j)], what);
    }
    return m;
  }

  FamilySpec family(const YAML::Node& node) const {
    if (!node) fail(YAML::Mark::null_mark(), "missing required key 'family'");
    keys(node, {"id", "trials", "shape", "location", "variance", "size", "scale"}, "family");
    if (!node["id"]) fail(node, "family needs an 'id'");
    const auto name = node["id"].as<std::string>();
    const auto id = parse_family(name);
    if (!id) fail(node["id"], "unknown family '" + name + "'");
    FixedParams fp;
    if (node["trials"]) fp.trials = number(node["trials"], "trials");
    if (node["shape"]) fp.shape = number(node["shape"], "shape");
    if (node["location"]) fp.location = number(node["location"], "location");
    if (node["variance"]) fp.variance = number(node["variance"], "variance");
    if (node["size"]) fp.size = number(node["size"], "size");
    if (node["scale"]) fp.scale = number(node["scale"], "scale");
    try {
      return make_family(*id, fp);
    } catch (const Error& e) {
      fail(node, e.what());
    }
  }

  NaturalParam natural(const FamilySpec& spec, const YAML::Node& node) const {
    const auto alpha = numbers(node, "hypothesis parameters");
    try {
      return to_natural(spec, alpha);
    } catch (const Error& e) {
      fail(node, e.what());
    }
  }

  Eigen::VectorXd prior(const YAML::Node& node, int n) const {
    if (!node || (node.IsScalar() && node.Scalar() == "uniform")) return uniform_prior(n);
    const auto v = numbers(node, "prior");
    if (static_cast<int>(v.size()) != n) {
      fail(node, "prior length must equal the number of hypotheses");
    }
    return Eigen::Map<const Eigen::VectorXd>(v.data(), n);
  }

  Eigen::MatrixXd loss(const YAML::Node& node, int n) const {
    if (!node || (node.IsScalar() && node.Scalar() == "zero-one")) return zero_one_loss(n);
    return matrix(node, n, n, "loss");
  }

  // Re-raises a set-level validation failure at the node it concerns.
  [[noreturn]] void relocate(const Error& e, const YAML::Node& doc, const YAML::Node& fallback) const {
    const std::string msg = e.what();
    for (const char* key : {"prior", "loss", "obs_cost", "mode_cost"}) {
      if (msg.find(key) != std::string::npos && doc[key]) fail(doc[key], msg);
    }
    if (msg.find("observation costs") != std::string::npos && doc["obs_cost"]) {
      fail(doc["obs_cost"], msg);
    }
    if (msg.find("mode costs") != std::string::npos && doc["sampling"]) {
      fail(doc["sampling"]["mode_cost"] ? doc["sampling"]["mode_cost"] : doc["sampling"], msg);
    }
    fail(fallback, msg);
  }

  Problem problem(const YAML::Node& doc, const std::string& name) const {
    Problem p;
    p.name = name;
    const FamilySpec spec = family(doc["family"]);
    if (doc["sampling"]) {
      if (doc["hypotheses"] || doc["obs_cost"]) {
        fail(doc["sampling"], "use either 'sampling' or 'hypotheses'/'obs_cost', not both");
      }
      const YAML::Node s = doc["sampling"];
      keys(s, {"hypotheses", "mode_cost"}, "sampling");
      const YAML::Node hyps = s["hypotheses"];
      if (!hyps || !hyps.IsSequence()) fail(s, "sampling needs a 'hypotheses' list");
      SamplingProblem sp;
      sp.spec = spec;
      for (const auto& h : hyps) {
        if (!h.IsSequence() || h.size() == 0) {
          fail(h, "each sampling hypothesis lists one parameter vector per mode");
        }
        std::vector<NaturalParam> row;
        for (const auto& mode : h) row.push_back(natural(spec, mode));
        sp.naturals.push_back(std::move(row));
      }
      const int n = static_cast<int>(sp.naturals.size());
      const int k = static_cast<int>(sp.naturals.front().size());
      for (std::size_t i = 0; i < sp.naturals.size(); ++i) {
        if (static_cast<int>(sp.naturals[i].size()) != k) {
          fail(hyps[i], "every hypothesis needs the same number of modes");
        }
      }
      sp.prior = prior(doc["prior"], n);
      sp.loss = loss(doc["loss"], n);
      const YAML::Node mc = s["mode_cost"];
      if (!mc) fail(s, "sampling needs 'mode_cost'");
      if (mc.IsSequence() && mc.size() > 0 && mc[0].IsScalar()) {
        const auto row = numbers(mc, "mode_cost");
        if (static_cast<int>(row.size()) != k) fail(mc, "mode_cost needs one entry per mode");
        sp.mode_cost.resize(n, k);
        for (int i = 0; i < n; ++i) {
          for (int a = 0; a < k; ++a) sp.mode_cost(i, a) = row[static_cast<std::size_t>(a)];
        }
      } else {
        sp.mode_cost = matrix(mc, n, k, "mode_cost");
      }
      try {
        validate(sp);
      } catch (const Error& e) {
        relocate(e, doc, hyps);
      }
      p.sampling = std::move(sp);
      return p;
    }

    const YAML::Node hyps = doc["hypotheses"];
    if (!hyps) fail(YAML::Mark::null_mark(), "missing required key 'hypotheses'");
    if (!hyps.IsSequence()) fail(hyps, "hypotheses must be a list");
    HypothesisSet hs;
    hs.spec = spec;
    for (const auto& h : hyps) hs.naturals.push_back(natural(spec, h));
    const int n = hs.count();
    hs.prior = prior(doc["prior"], n);
    hs.loss = loss(doc["loss"], n);
    const YAML::Node c = doc["obs_cost"];
    if (!c) fail(YAML::Mark::null_mark(), "missing required key 'obs_cost'");
    const auto cost = numbers(c, "obs_cost");
    if (cost.size() == 1) {
      hs.obs_cost = Eigen::VectorXd::Constant(n, cost[0]);
    } else if (static_cast<int>(cost.size()) == n) {
      hs.obs_cost = Eigen::Map<const Eigen::VectorXd>(cost.data(), n);
    } else {
      fail(c, "obs_cost must be one number or one per hypothesis");
    }
    try {
      validate(hs);
    } catch (const Error& e) {
      relocate(e, doc, hyps);
    }
    p.base = std::move(hs);
    return p;
  }

  SolverConfig solver(const YAML::Node& node, double& rank_tol) const {
    SolverConfig cfg;
    if (!node) return cfg;
    keys(node, {"horizon", "grid_points_per_dim", "grid_width_sigmas", "quadrature_nodes",
                "convergence_tol", "max_horizon", "threads", "rank_tol"},
         "solver");
    if (node["horizon"]) cfg.horizon = integer(node["horizon"], "horizon");
    if (node["grid_points_per_dim"]) {
      cfg.grid_points_per_dim = integer(node["grid_points_per_dim"], "grid_points_per_dim");
    }
    if (node["grid_width_sigmas"]) {
      cfg.grid_width_sigmas = number(node["grid_width_sigmas"], "grid_width_sigmas");
    }
    if (node["quadrature_nodes"]) {
      cfg.quadrature_nodes = integer(node["quadrature_nodes"], "quadrature_nodes");
    }
    if (node["convergence_tol"]) {
      cfg.convergence_tol = number(node["convergence_tol"], "convergence_tol");
    }
    if (node["max_horizon"]) cfg.max_horizon = integer(node["max_horizon"], "max_horizon");
    if (node["threads"]) cfg.threads = integer(node["threads"], "threads");
    if (node["rank_tol"]) {
      rank_tol = number(node["rank_tol"], "rank_tol");
      if (!(rank_tol > 0 && rank_tol < 1)) fail(node["rank_tol"], "rank_tol must lie in (0, 1)");
    }
    try {
      validate(cfg);
    } catch (const Error& e) {
      fail(node, e.what());
    }
    return cfg;
  }

  MsprtSettings msprt(const YAML::Node& node) const {
    MsprtSettings m;
    if (!node) return m;
    keys(node, {"grid", "reps", "step_cap", "thresholds"}, "msprt");
    if (node["grid"]) {
      m.grid = numbers(node["grid"], "msprt grid");
      if (m.grid.empty()) fail(node["grid"], "msprt grid must not be empty");
      for (double g : m.grid) {
        if (!(g > 0 && g < 1)) fail(node["grid"], "msprt grid values must lie in (0, 1)");
      }
    }
    if (node["reps"]) {
      m.reps = integer(node["reps"], "msprt reps");
      if (m.reps < 1) fail(node["reps"], "msprt reps must be positive");
    }
    if (node["step_cap"]) {
      m.step_cap = integer(node["step_cap"], "step_cap");
      if (m.step_cap < 1) fail(node["step_cap"], "step_cap must be positive");
    }
    if (node["thresholds"]) {
      m.thresholds = numbers(node["thresholds"], "msprt thresholds");
      for (double g : *m.thresholds) {
        if (!(g > 0 && g < 1)) fail(node["thresholds"], "msprt thresholds must lie in (0, 1)");
      }
    }
    return m;
  }

  SimSettings sim(const YAML::Node& node) const {
    SimSettings s;
    if (!node) return s;
    keys(node, {"reps", "seed"}, "sim");
    if (node["reps"]) {
      s.reps = integer(node["reps"], "sim reps");
      if (s.reps < 1) fail(node["reps"], "sim reps must be positive");
    }
    if (node["seed"]) {
      try {
        s.seed = node["seed"].as<std::uint64_t>();
      } catch (const YAML::Exception&) {
        fail(node["seed"], "seed must be a nonnegative integer");
      }
    }
    return s;
  }

 private:
  std::string source_;
};

const std::set<std::string> kProblemKeys = {"name",  "family", "hypotheses", "prior",
                                            "loss",  "obs_cost", "sampling"};

}  // namespace

ProblemConfig parse_config(const std::string& text, const std::string& source_name) {
  Parser p(source_name);
  YAML::Node doc;
  try {
    doc = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    p.fail(e.mark, e.msg);
  }
  if (!doc.IsMap()) p.fail(doc, "config must be a mapping");
  std::set<std::string> top = kProblemKeys;
  top.insert({"schema", "solver", "msprt", "sim", "cells"});
  p.keys(doc, top, "config");
  if (doc["schema"] && doc["schema"].as<std::string>() != kConfigSchema) {
    p.fail(doc["schema"], std::string("unsupported schema; expected '") + kConfigSchema + "'");
  }

  ProblemConfig cfg;
  cfg.source_name = source_name;
  cfg.text = text;
  cfg.solver = p.solver(doc["solver"], cfg.rank_tol);
  cfg.msprt = p.msprt(doc["msprt"]);
  cfg.sim = p.sim(doc["sim"]);

  const auto name_of = [](const YAML::Node& n, const std::string& fallback) {
    return n["name"] ? n["name"].as<std::string>() : fallback;
  };
  if (doc["cells"]) {
    const YAML::Node cells = doc["cells"];
    if (!cells.IsSequence() || cells.size() == 0) p.fail(cells, "cells must be a non-empty list");
    cfg.has_cells = true;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const YAML::Node cell = cells[c];
      p.keys(cell, kProblemKeys, "cell");
      // A cell overrides any problem key of the enclosing document.
      YAML::Node merged(YAML::NodeType::Map);
      for (const auto& key : kProblemKeys) {
        if (cell[key]) {
          merged[key] = cell[key];
        } else if (doc[key]) {
          merged[key] = doc[key];
        }
      }
      if (merged["sampling"] && cell["hypotheses"]) merged.remove("sampling");
      if (merged["hypotheses"] && cell["sampling"]) {
        merged.remove("hypotheses");
        merged.remove("obs_cost");
      }
      cfg.problems.push_back(p.problem(merged, name_of(cell, "cell" + std::to_string(c))));
    }
  } else {
    cfg.problems.push_back(p.problem(doc, name_of(doc, "problem")));
  }
  return cfg;
}

ProblemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace seqht::cli
