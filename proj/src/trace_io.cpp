#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "porogen/error.hpp"
#include "porogen/mcmc.hpp"

namespace porogen {

using nlohmann::json;

namespace {

template <class T>
T get_or(json const& j, char const* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (json::exception const&) {
    throw ConfigError(std::string("field '") + key + "' has the wrong type");
  }
}

constexpr char kSnapMagic[16] = "POROGEN-WSNAP";
constexpr char kCheckMagic[16] = "POROGEN-CHKPT";

class Writer {
 public:
  explicit Writer(std::filesystem::path const& p) : os_(p, std::ios::binary) {
    if (!os_) throw IoError("cannot open '" + p.string() + "' for writing");
  }
  void bytes(void const* d, std::size_t n) { os_.write(static_cast<char const*>(d), std::streamsize(n)); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f64(double v) { bytes(&v, 8); }
  void vec(std::vector<double> const& v) {
    u64(v.size());
    bytes(v.data(), v.size() * sizeof(double));
  }
  void finish(std::filesystem::path const& p) {
    os_.flush();
    if (!os_) throw IoError("write failed for '" + p.string() + "'");
  }

 private:
  std::ofstream os_;
};

class Reader {
 public:
  explicit Reader(std::filesystem::path const& p) : is_(p, std::ios::binary), path_(p) {
    if (!is_) throw IoError("cannot open '" + p.string() + "'");
  }
  void bytes(void* d, std::size_t n) {
    is_.read(static_cast<char*>(d), std::streamsize(n));
    if (!is_) throw IoError("'" + path_.string() + "' is truncated");
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, 8);
    return v;
  }
  std::vector<double> vec() {
    std::uint64_t const n = u64();
    if (n > (std::uint64_t(1) << 34)) throw IoError("'" + path_.string() + "' has an implausible vector length");
    std::vector<double> v(n);
    bytes(v.data(), n * sizeof(double));
    return v;
  }

 private:
  std::ifstream is_;
  std::filesystem::path path_;
};

void write_params(Writer& w, OscParams const& p) {
  for (double v : {p.theta_s, p.kappa_s, p.theta_z, p.kappa_z, p.tau, p.u, p.sigma}) w.f64(v);
}

OscParams read_params(Reader& r) {
  OscParams p;
  p.theta_s = r.f64();
  p.kappa_s = r.f64();
  p.theta_z = r.f64();
  p.kappa_z = r.f64();
  p.tau = r.f64();
  p.u = r.f64();
  p.sigma = r.f64();
  return p;
}

void write_proposal(Writer& w, ProposalSpec const& p) {
  for (double v : {p.rw_step_u, p.rw_step_theta_s, p.rw_step_theta_z, p.lognormal_step_kappa_s,
                   p.lognormal_step_kappa_z, p.target_accept})
    w.f64(v);
  w.u64(p.adapt ? 1 : 0);
}

ProposalSpec read_proposal(Reader& r) {
  ProposalSpec p;
  p.rw_step_u = r.f64();
  p.rw_step_theta_s = r.f64();
  p.rw_step_theta_z = r.f64();
  p.lognormal_step_kappa_s = r.f64();
  p.lognormal_step_kappa_z = r.f64();
  p.target_accept = r.f64();
  p.adapt = r.u64() != 0;
  return p;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

json to_json(PriorSpec const& p) {
  return {{"kappa2_s_shape", p.kappa2_s_shape}, {"kappa2_s_rate", p.kappa2_s_rate},
          {"kappa2_z_shape", p.kappa2_z_shape}, {"kappa2_z_rate", p.kappa2_z_rate},
          {"tau2_shape", p.tau2_shape},         {"tau2_rate", p.tau2_rate}};
}

json to_json(ProposalSpec const& p) {
  return {{"rw_step_u", p.rw_step_u},
          {"rw_step_theta_s", p.rw_step_theta_s},
          {"rw_step_theta_z", p.rw_step_theta_z},
          {"lognormal_step_kappa_s", p.lognormal_step_kappa_s},
          {"lognormal_step_kappa_z", p.lognormal_step_kappa_z},
          {"adapt", p.adapt},
          {"target_accept", p.target_accept}};
}

json to_json(OscParams const& p) {
  return {{"theta_s", p.theta_s}, {"kappa_s", p.kappa_s}, {"theta_z", p.theta_z}, {"kappa_z", p.kappa_z},
          {"tau", p.tau},         {"u", p.u},             {"sigma", p.sigma}};
}

json to_json(PosteriorSummary const& s) {
  json j;
  j["n_used"] = s.n_used;
  j["n_discarded"] = s.n_discarded;
  for (auto const& p : s.params) j["params"][p.name] = {{"mean", p.mean}, {"sd", p.sd}};
  return j;
}

void from_json(json const& j, PriorSpec& p) {
  p.kappa2_s_shape = get_or(j, "kappa2_s_shape", p.kappa2_s_shape);
  p.kappa2_s_rate = get_or(j, "kappa2_s_rate", p.kappa2_s_rate);
  p.kappa2_z_shape = get_or(j, "kappa2_z_shape", p.kappa2_z_shape);
  p.kappa2_z_rate = get_or(j, "kappa2_z_rate", p.kappa2_z_rate);
  p.tau2_shape = get_or(j, "tau2_shape", p.tau2_shape);
  p.tau2_rate = get_or(j, "tau2_rate", p.tau2_rate);
}

void from_json(json const& j, ProposalSpec& p) {
  p.rw_step_u = get_or(j, "rw_step_u", p.rw_step_u);
  p.rw_step_theta_s = get_or(j, "rw_step_theta_s", p.rw_step_theta_s);
  p.rw_step_theta_z = get_or(j, "rw_step_theta_z", p.rw_step_theta_z);
  p.lognormal_step_kappa_s = get_or(j, "lognormal_step_kappa_s", p.lognormal_step_kappa_s);
  p.lognormal_step_kappa_z = get_or(j, "lognormal_step_kappa_z", p.lognormal_step_kappa_z);
  p.adapt = get_or(j, "adapt", p.adapt);
  p.target_accept = get_or(j, "target_accept", p.target_accept);
}

void from_json(json const& j, OscParams& p) {
  p.theta_s = get_or(j, "theta_s", p.theta_s);
  p.kappa_s = get_or(j, "kappa_s", p.kappa_s);
  p.theta_z = get_or(j, "theta_z", p.theta_z);
  p.kappa_z = get_or(j, "kappa_z", p.kappa_z);
  p.tau = get_or(j, "tau", p.tau);
  p.u = get_or(j, "u", p.u);
  p.sigma = get_or(j, "sigma", p.sigma);
}

void write_checkpoint(std::filesystem::path const& path, Checkpoint const& c) {
  Writer w(path);
  w.bytes(kCheckMagic, 16);
  w.u64(c.iteration);
  write_params(w, c.state.params);
  for (double v : {c.state.log_targets.log_lik_u, c.state.log_targets.quad, c.state.log_targets.logdet_s,
                   c.state.log_targets.logdet_z})
    w.f64(v);
  write_proposal(w, c.proposal);
  w.u64(c.counters.w);
  w.u64(c.counters.s);
  w.u64(c.counters.gamma);
  w.u64(c.accepted_u);
  w.u64(c.accepted_gamma);
  w.vec(c.state.w);
  w.vec(c.state.s);
  w.finish(path);
}

Checkpoint read_checkpoint(std::filesystem::path const& path) {
  Reader r(path);
  char magic[16];
  r.bytes(magic, 16);
  if (std::memcmp(magic, kCheckMagic, 16) != 0) throw IoError("'" + path.string() + "' is not a checkpoint");
  Checkpoint c;
  c.iteration = r.u64();
  c.state.params = read_params(r);
  c.state.log_targets.log_lik_u = r.f64();
  c.state.log_targets.quad = r.f64();
  c.state.log_targets.logdet_s = r.f64();
  c.state.log_targets.logdet_z = r.f64();
  c.proposal = read_proposal(r);
  c.counters.w = r.u64();
  c.counters.s = r.u64();
  c.counters.gamma = r.u64();
  c.accepted_u = r.u64();
  c.accepted_gamma = r.u64();
  c.state.w = r.vec();
  c.state.s = r.vec();
  return c;
}

void write_trace(std::filesystem::path const& dir, Trace const& t, json const& header) {
  std::filesystem::create_directories(dir);
  json h = header;
  h["seed"] = t.seed;
  h["n_rows"] = t.rows.size();
  h["accepted_u"] = t.accepted_u;
  h["accepted_gamma"] = t.accepted_gamma;
  h["acceptance_rate_u"] = t.acceptance_rate_u();
  h["acceptance_rate_gamma"] = t.acceptance_rate_gamma();
  h["pcg_retries"] = t.pcg_retries;
  h["final_proposal"] = to_json(t.final_proposal);
  {
    std::ofstream os(dir / "trace.json");
    if (!os) throw IoError("cannot write trace header in '" + dir.string() + "'");
    os << h.dump(2) << '\n';
  }
  {
    std::ofstream os(dir / "trace.csv");
    if (!os) throw IoError("cannot write trace.csv in '" + dir.string() + "'");
    os << "iteration,theta_s,kappa2_s,theta_z,kappa2_z,tau2,u,accept_u,accept_gamma,pcg_iters,pcg_residual\n";
    for (auto const& r : t.rows) {
      auto const& p = r.params;
      os << r.iteration << ',' << fmt(p.theta_s) << ',' << fmt(p.kappa_s * p.kappa_s) << ',' << fmt(p.theta_z) << ','
         << fmt(p.kappa_z * p.kappa_z) << ',' << fmt(p.tau * p.tau) << ',' << fmt(p.u) << ',' << int(r.accepted_u)
         << ',' << int(r.accepted_gamma) << ',' << r.pcg_iterations << ',' << fmt(r.pcg_residual) << '\n';
    }
  }
  {
    Writer w(dir / "w_snapshots.bin");
    w.bytes(kSnapMagic, 16);
    w.u64(t.w_snapshots.size());
    for (std::size_t i = 0; i < t.w_snapshots.size(); ++i) {
      w.u64(t.snapshot_iterations[i]);
      w.vec(t.w_snapshots[i]);
    }
    w.finish(dir / "w_snapshots.bin");
  }
  write_checkpoint(dir / "checkpoint.bin", t.checkpoint);
}

json read_trace_header(std::filesystem::path const& dir) {
  std::ifstream is(dir / "trace.json");
  if (!is) throw IoError("missing trace header in '" + dir.string() + "'");
  try {
    return json::parse(is);
  } catch (json::exception const& e) {
    throw IoError(std::string("malformed trace header: ") + e.what());
  }
}

Trace read_trace(std::filesystem::path const& dir) {
  auto const h = read_trace_header(dir);
  Trace t;
  t.seed = h.at("seed").get<std::uint64_t>();
  t.accepted_u = h.at("accepted_u").get<std::size_t>();
  t.accepted_gamma = h.at("accepted_gamma").get<std::size_t>();
  t.pcg_retries = h.value("pcg_retries", std::size_t{0});
  from_json(h.at("final_proposal"), t.final_proposal);

  std::ifstream is(dir / "trace.csv");
  if (!is) throw IoError("missing trace.csv in '" + dir.string() + "'");
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 11) throw IoError("trace.csv: malformed row '" + line + "'");
    TraceRow r;
    r.iteration = std::stoull(f[0]);
    r.params.theta_s = std::stod(f[1]);
    r.params.kappa_s = std::sqrt(std::stod(f[2]));
    r.params.theta_z = std::stod(f[3]);
    r.params.kappa_z = std::sqrt(std::stod(f[4]));
    r.params.tau = std::sqrt(std::stod(f[5]));
    r.params.u = std::stod(f[6]);
    r.accepted_u = f[7] == "1";
    r.accepted_gamma = f[8] == "1";
    r.pcg_iterations = std::stoull(f[9]);
    r.pcg_residual = std::stod(f[10]);
    t.rows.push_back(r);
  }
  Reader r(dir / "w_snapshots.bin");
  char magic[16];
  r.bytes(magic, 16);
  if (std::memcmp(magic, kSnapMagic, 16) != 0) throw IoError("w_snapshots.bin: bad magic");
  std::uint64_t const n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    t.snapshot_iterations.push_back(r.u64());
    t.w_snapshots.push_back(r.vec());
  }
  t.checkpoint = read_checkpoint(dir / "checkpoint.bin");
  return t;
}

void append_trace(Trace& t, Trace const& next) {
  t.rows.insert(t.rows.end(), next.rows.begin(), next.rows.end());
  t.snapshot_iterations.insert(t.snapshot_iterations.end(), next.snapshot_iterations.begin(),
                               next.snapshot_iterations.end());
  t.w_snapshots.insert(t.w_snapshots.end(), next.w_snapshots.begin(), next.w_snapshots.end());
  t.accepted_u = next.accepted_u;
  t.accepted_gamma = next.accepted_gamma;
  t.pcg_retries += next.pcg_retries;
  t.final_proposal = next.final_proposal;
  t.checkpoint = next.checkpoint;
}

}  // namespace porogen
