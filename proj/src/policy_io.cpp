#include "seqht/policy_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "seqht/error.hpp"

namespace seqht {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'Q', 'H', 'T', 'P', 'O', 'L'};

[[noreturn]] void format_error(const std::string& what) {
  throw Error(ErrorCode::PolicyFormat, what);
}

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.append(c, n);
  }
  template <class T>
  void pod(const T& v) {
    bytes(&v, sizeof v);
  }
  void u64(std::uint64_t v) { pod(v); }
  void i32(std::int32_t v) { pod(v); }
  void f64(double v) { pod(v); }
  void doubles(const double* p, std::size_t n) {
    u64(n);
    bytes(p, n * sizeof(double));
  }
  void matrix(const Eigen::MatrixXd& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
  }
  void vector(const Eigen::VectorXd& v) { doubles(v.data(), static_cast<std::size_t>(v.size())); }
  const std::string& data() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string data) : buf_(std::move(data)) {}
  void bytes(void* p, std::size_t n) {
    if (n > buf_.size() - pos_) format_error("policy file is truncated");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  template <class T>
  T pod() {
    T v{};
    bytes(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  std::int32_t i32() { return pod<std::int32_t>(); }
  double f64() { return pod<double>(); }
  std::uint64_t count(std::size_t elem) {
    const std::uint64_t n = u64();
    if (elem != 0 && n > (buf_.size() - pos_) / elem) format_error("policy file is truncated");
    return n;
  }
  std::vector<double> doubles() {
    std::vector<double> v(count(sizeof(double)));
    bytes(v.data(), v.size() * sizeof(double));
    return v;
  }
  Eigen::MatrixXd matrix() {
    const std::uint64_t r = u64();
    const std::uint64_t c = u64();
    if (c != 0 && r > (buf_.size() - pos_) / sizeof(double) / c) format_error("policy file is truncated");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
    return m;
  }
  Eigen::VectorXd vector() {
    const auto v = doubles();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  std::string string(std::size_t n) {
    if (n > buf_.size() - pos_) format_error("policy file is truncated");
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t position() const { return pos_; }
  std::size_t size() const { return buf_.size(); }

 private:
  std::string buf_;
  std::size_t pos_ = 0;
};

std::uint64_t checksum(const char* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(p[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

nlohmann::json config_json(const SolverConfig& c) {
  return {{"horizon", c.horizon},
          {"grid_points_per_dim", c.grid_points_per_dim},
          {"grid_width_sigmas", c.grid_width_sigmas},
          {"quadrature_nodes", c.quadrature_nodes},
          {"convergence_tol", c.convergence_tol},
          {"max_horizon", c.max_horizon},
          {"threads", c.threads}};
}

SolverConfig config_from(const nlohmann::json& j) {
  SolverConfig c;
  c.horizon = j.at("horizon").get<int>();
  c.grid_points_per_dim = j.at("grid_points_per_dim").get<int>();
  c.grid_width_sigmas = j.at("grid_width_sigmas").get<double>();
  c.quadrature_nodes = j.at("quadrature_nodes").get<int>();
  c.convergence_tol = j.at("convergence_tol").get<double>();
  c.max_horizon = j.at("max_horizon").get<int>();
  c.threads = j.at("threads").get<int>();
  return c;
}

}  // namespace

void write_policy(std::ostream& out, const PolicyTable& pt, const std::string& problem) {
  const DpModel& m = pt.model;
  nlohmann::json meta;
  meta["format"] = "seqht-policy";
  meta["family"] = std::string(family_name(m.family.id));
  meta["dim"] = m.dim;
  meta["hypotheses"] = m.hypotheses;
  meta["modes"] = m.mode_count();
  meta["horizon"] = pt.horizon();
  meta["bayes_risk"] = pt.bayes_risk;
  meta["digest"] = pt.digest;
  meta["solver"] = config_json(pt.config);
  meta["sweep"] = pt.sweep;
  meta["problem"] = problem;
  const std::string meta_text = meta.dump();

  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.pod(kPolicyFormatVersion);
  w.u64(meta_text.size());
  w.bytes(meta_text.data(), meta_text.size());

  w.i32(static_cast<std::int32_t>(m.family.id));
  w.pod(m.family.fixed);
  w.i32(m.dim);
  w.i32(m.hypotheses);
  w.matrix(m.L);
  w.vector(m.drift);
  w.vector(m.log_prior);
  w.matrix(m.loss);
  w.f64(m.lattice_spacing);
  w.u64(m.modes.size());
  for (const DpMode& mode : m.modes) {
    w.matrix(mode.proj);
    w.vector(mode.shift);
    w.vector(mode.cost);
    w.u64(mode.naturals.size());
    for (const NaturalParam& nat : mode.naturals) {
      w.doubles(nat.alpha.data(), nat.alpha.size());
      w.doubles(nat.eta.data(), static_cast<std::size_t>(nat.eta.size()));
      w.f64(nat.log_normalizer);
    }
    for (int i = 0; i < m.hypotheses; ++i) {
      const auto& inc = mode.inc[static_cast<std::size_t>(i)];
      const auto& wt = mode.weight[static_cast<std::size_t>(i)];
      w.doubles(inc.data(), inc.size());
      w.doubles(wt.data(), wt.size());
      w.bytes(mode.mean[static_cast<std::size_t>(i)].data(), 2 * sizeof(double));
      w.bytes(mode.sd[static_cast<std::size_t>(i)].data(), 2 * sizeof(double));
    }
  }

  w.u64(pt.stages.size());
  for (const StageTable& s : pt.stages) {
    const StageGrid& g = s.grid;
    w.i32(g.k);
    w.i32(g.dim);
    w.bytes(g.lo.data(), sizeof g.lo);
    w.bytes(g.step.data(), sizeof g.step);
    w.bytes(g.n.data(), sizeof g.n);
    w.i32(g.lattice ? 1 : 0);
    w.doubles(s.value.data(), s.value.size());
    w.u64(s.action.size());
    w.bytes(s.action.data(), s.action.size() * sizeof(std::int32_t));
  }
  const std::string& data = w.data();
  const std::uint64_t sum = checksum(data.data(), data.size());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.write(reinterpret_cast<const char*>(&sum), sizeof sum);
  if (!out) format_error("failed to write policy data");
}

void write_policy(const std::string& path, const PolicyTable& pt, const std::string& problem) {
  std::ofstream out(path, std::ios::binary);
  if (!out) format_error("cannot open '" + path + "' for writing");
  write_policy(out, pt, problem);
}

PolicyFile read_policy(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string data = ss.str();
  if (data.size() < sizeof kMagic + sizeof(std::uint32_t) + 2 * sizeof(std::uint64_t)) {
    format_error("policy file is truncated");
  }
  if (std::memcmp(data.data(), kMagic, sizeof kMagic) != 0) format_error("not a policy file");
  std::uint64_t stored = 0;
  std::memcpy(&stored, data.data() + data.size() - sizeof stored, sizeof stored);
  data.resize(data.size() - sizeof stored);
  if (checksum(data.data(), data.size()) != stored) format_error("policy file checksum mismatch");

  Reader r(std::move(data));
  char magic[8];
  r.bytes(magic, sizeof magic);
  const auto version = r.pod<std::uint32_t>();
  if (version != kPolicyFormatVersion) {
    format_error("unsupported policy format version " + std::to_string(version));
  }
  const std::string meta_text = r.string(r.count(1));
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_text);
  } catch (const std::exception& e) {
    format_error(std::string("bad policy metadata: ") + e.what());
  }

  PolicyFile pf;
  PolicyTable& pt = pf.table;
  DpModel& m = pt.model;
  const auto id = r.i32();
  if (id < 0 || id >= static_cast<std::int32_t>(std::size(kAllFamilies))) {
    format_error("unknown family id in policy file");
  }
  const auto fixed = r.pod<FixedParams>();
  m.family = make_family(static_cast<FamilyId>(id), fixed);
  m.dim = r.i32();
  m.hypotheses = r.i32();
  m.L = r.matrix();
  m.drift = r.vector();
  m.log_prior = r.vector();
  m.loss = r.matrix();
  m.lattice_spacing = r.f64();
  const std::uint64_t mode_count = r.count(1);
  for (std::uint64_t a = 0; a < mode_count; ++a) {
    DpMode mode;
    mode.proj = r.matrix();
    mode.shift = r.vector();
    mode.cost = r.vector();
    const std::uint64_t nats = r.count(1);
    for (std::uint64_t i = 0; i < nats; ++i) {
      NaturalParam nat;
      nat.alpha = r.doubles();
      const auto eta = r.doubles();
      nat.eta = Eigen::Map<const Eigen::VectorXd>(eta.data(), static_cast<Eigen::Index>(eta.size()));
      nat.log_normalizer = r.f64();
      mode.naturals.push_back(std::move(nat));
    }
    for (int i = 0; i < m.hypotheses; ++i) {
      mode.inc.push_back(r.doubles());
      mode.weight.push_back(r.doubles());
      std::array<double, 2> mean{};
      std::array<double, 2> sd{};
      r.bytes(mean.data(), sizeof mean);
      r.bytes(sd.data(), sizeof sd);
      mode.mean.push_back(mean);
      mode.sd.push_back(sd);
    }
    m.modes.push_back(std::move(mode));
  }

  const std::uint64_t stage_count = r.count(1);
  for (std::uint64_t k = 0; k < stage_count; ++k) {
    StageTable s;
    s.grid.k = r.i32();
    s.grid.dim = r.i32();
    r.bytes(s.grid.lo.data(), sizeof s.grid.lo);
    r.bytes(s.grid.step.data(), sizeof s.grid.step);
    r.bytes(s.grid.n.data(), sizeof s.grid.n);
    s.grid.lattice = r.i32() != 0;
    s.value = r.doubles();
    s.action.resize(r.count(sizeof(std::int32_t)));
    r.bytes(s.action.data(), s.action.size() * sizeof(std::int32_t));
    if (static_cast<int>(s.value.size()) != s.grid.size() || s.action.size() != s.value.size()) {
      format_error("stage table size does not match its grid");
    }
    pt.stages.push_back(std::move(s));
  }
  if (r.position() != r.size()) format_error("trailing bytes in policy file");

  try {
    pt.bayes_risk = meta.at("bayes_risk").get<double>();
    pt.digest = meta.at("digest").get<std::uint64_t>();
    pt.config = config_from(meta.at("solver"));
    pt.sweep = meta.at("sweep").get<std::vector<std::pair<int, double>>>();
    pf.problem = meta.at("problem").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    format_error(std::string("bad policy metadata: ") + e.what());
  }
  if (pt.digest != model_digest(m)) format_error("policy digest does not match its model");
  if (pt.stages.empty()) format_error("policy file has no stages");
  pt.bayes_risk = pt.stages.front().value.front();
  return pf;
}

PolicyFile read_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) format_error("cannot open policy file '" + path + "'");
  return read_policy(in);
}

}  // namespace seqht
