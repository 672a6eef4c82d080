#include "rdlab/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "rdlab/appendix.hpp"
#include "rdlab/chain.hpp"
#include "rdlab/couplings.hpp"
#include "rdlab/ergodics.hpp"
#include "rdlab/heat_kernel.hpp"
#include "rdlab/noise.hpp"
#include "rdlab/solver.hpp"
#include "rdlab/torus.hpp"

namespace rdlab {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config registry. Every tunable is a dotted key with a string value; unknown
// keys are rejected so a typo cannot silently fall back to a default.

const std::map<std::string, std::string>& default_config() {
  static const std::map<std::string, std::string> reg = {
      {"seed", "1"},
      {"replicas", "8"},
      {"grid.J", "256"},
      {"time.t_end", "1"},
      {"time.dt", "0"},  // 0 -> scheme default
      {"time.scheme", "semi_implicit"},
      {"model.lambda", "0.1"},
      {"potential.family", "kpp"},
      {"potential.nu", "1"},
      {"potential.truncation_N", "0"},  // 0 -> no truncation
      {"sigma.c", "1"},
      {"init.profile", "flat"},
      {"init.level", "1"},
      {"snapshots.count", "5"},
      {"observables.stride", "0"},  // 0 -> about 2000 rows
      {"kernel.t_min", "0.01"},
      {"kernel.t_max", "10"},
      {"kernel.t_count", "20"},
      {"kernel.pairs", "20"},
      {"kernel.ck_probes", "5"},
      {"kernel.mass_nodes", "512"},
      {"couple.kind", "pm"},
      {"couple.level", "0.5"},
      {"couple.delta", "0.01"},
      {"couple.merge_tol", "0"},  // 0 -> relative default
      {"chain.mode", "ideal"},
      {"chain.M", "-2"},
      {"chain.p", "0.66666666666666663"},
      {"chain.steps", "100000"},
      {"chain.stages", "50"},
      {"chain.stage_timeout", "1000"},
      {"measure.burn_in", "8"},
      {"measure.thinning", "2"},
      {"measure.total", "40"},
      {"measure.dt_coarse", "0"},
      {"measure.burst_t", "0"},
      {"measure.dt_fine", "0"},
      {"sweep.lambdas", "0.05,3"},
      {"sweep.eps", "0.01,0.001,0.0001"},
      {"appendix.cost_divisor", "1"},
  };
  return reg;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

struct Config {
  std::map<std::string, std::string> kv = default_config();

  void set(const std::string& key, const std::string& value) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second = value;
  }

  double get_double(const std::string& key) const {
    const std::string& v = kv.at(key);
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0' || !std::isfinite(x))
      throw ConfigError(key + ": not a finite number: '" + v + "'");
    return x;
  }

  long long get_int(const std::string& key) const {
    const std::string& v = kv.at(key);
    char* end = nullptr;
    const long long x = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
      throw ConfigError(key + ": not an integer: '" + v + "'");
    return x;
  }

  std::vector<double> get_list(const std::string& key) const {
    const std::string& v = kv.at(key);
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      char* end = nullptr;
      const double x = std::strtod(item.c_str(), &end);
      if (end == item.c_str() || *end != '\0' || !std::isfinite(x))
        throw ConfigError(key + ": bad list entry '" + item + "'");
      out.push_back(x);
    }
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
  }

  std::string get_enum(const std::string& key, const std::vector<std::string>& allowed) const {
    const std::string& v = kv.at(key);
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      std::string opts;
      for (const auto& a : allowed) opts += (opts.empty() ? "" : "|") + a;
      throw ConfigError(key + ": expected one of " + opts + ", got '" + v + "'");
    }
    return v;
  }
};

// The echo file holds exactly the bytes the digest is computed over, so a
// round trip through --config reproduces the digest.
std::string config_canonical(const Config& c) {
  std::string out;
  for (const auto& [k, v] : c.kv) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::string config_digest_hex(const Config& c) {
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char ch : config_canonical(c)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::pair<std::string, std::string>> parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    pairs.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Output helpers. All floating point goes through %.17g so a value survives
// a write/parse round trip bit-exactly and files byte-compare across runs.

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  f.flush();
  if (!f) throw IoError("short write to '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Flag plumbing.

struct Options {
  std::string subcommand;
  std::string config_path;
  std::string out_dir = "lab_out";
  std::vector<std::string> sets;
  std::optional<long long> seed;
  std::optional<long long> replicas;
  std::string chain_mode;  // chain subcommand only
  int threads = 1;
  bool check = false;
  bool resume = false;
};

Config build_config(const Options& opt) {
  Config cfg;
  if (!opt.config_path.empty())
    for (const auto& [k, v] : parse_config_file(opt.config_path)) cfg.set(k, v);
  for (const auto& s : opt.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
    cfg.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  if (opt.seed) cfg.set("seed", std::to_string(*opt.seed));
  if (opt.replicas) cfg.set("replicas", std::to_string(*opt.replicas));
  if (!opt.chain_mode.empty()) cfg.set("chain.mode", opt.chain_mode);
  if (opt.threads < 1 || opt.threads > 256) throw ConfigError("--threads must be in [1, 256]");
  return cfg;
}

// Runs body(i) for i in [0, n) on a small pool. Each slot owns its output, so
// the result is independent of the thread count and of scheduling order.
template <class F>
void parallel_slots(int n, int threads, F&& body) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex mu;
  std::exception_ptr first;
  auto work = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

// ---------------------------------------------------------------------------
// Shared model construction.

SolverConfig solver_from(const Config& c) {
  SolverConfig s;
  s.J = static_cast<int>(c.get_int("grid.J"));
  s.t_end = c.get_double("time.t_end");
  s.dt = c.get_double("time.dt");
  s.lambda = c.get_double("model.lambda");
  const std::string scheme = c.get_enum("time.scheme", {"semi_implicit", "explicit"});
  s.scheme = scheme == "explicit" ? Scheme::explicit_euler : Scheme::semi_implicit_laplacian;
  const std::string family = c.get_enum("potential.family", {"kpp", "cubic", "power", "off"});
  if (family == "kpp")
    s.potential = PotentialSpec::kpp();
  else if (family == "cubic")
    s.potential = PotentialSpec::cubic();
  else if (family == "power")
    s.potential = PotentialSpec::power(c.get_double("potential.nu"));
  else
    s.potential = PotentialSpec::drift_off();
  const double trunc = c.get_double("potential.truncation_N");
  if (trunc < 0.0) throw ConfigError("potential.truncation_N must be >= 0");
  if (trunc > 0.0) s.truncation_N = trunc;
  s.diffusion = DiffusionSpec::linear(c.get_double("sigma.c"));
  return s;
}

Field initial_field(const Config& c, int J) {
  const TorusGrid grid(J);
  const std::string profile = c.get_enum("init.profile", {"flat", "cosine", "bump"});
  const double level = c.get_double("init.level");
  if (profile == "flat") return Field::Constant(J, level);
  Field u(J);
  if (profile == "cosine") {
    for (int i = 0; i < J; ++i) u[i] = 0.3 + 0.2 * std::cos(M_PI * grid.coord(i));
    return u;
  }
  // bump: unit-mass cosine hill scaled by level
  for (int i = 0; i < J; ++i) u[i] = level * 0.5 * (1.0 + std::cos(M_PI * grid.coord(i)));
  return u;
}

// ---------------------------------------------------------------------------
// Subcommand bodies. Each returns the list of files it wrote (relative to the
// output directory) and appends machine-readable results to `summary`.

double wrap_torus(double v) {
  double w = std::fmod(v + 1.0, 2.0);
  if (w < 0.0) w += 2.0;
  return w - 1.0;
}

std::vector<std::string> do_kernel(const Config& c, const Options& opt, const fs::path& out,
                                   json& summary) {
  const double t_min = c.get_double("kernel.t_min");
  const double t_max = c.get_double("kernel.t_max");
  const int t_count = static_cast<int>(c.get_int("kernel.t_count"));
  const int pairs = static_cast<int>(c.get_int("kernel.pairs"));
  if (t_min <= 0.0 || t_max <= t_min) throw ConfigError("kernel: need 0 < t_min < t_max");
  if (t_count < 2 || pairs < 1) throw ConfigError("kernel: need t_count >= 2, pairs >= 1");

  std::string csv = "t,x,y,image,fourier,abs_diff\n";
  double max_diff = 0.0;
  for (int i = 0; i < t_count; ++i) {
    const double t = t_min * std::pow(t_max / t_min, double(i) / (t_count - 1));
    for (int j = 0; j < pairs; ++j) {
      const double x = -1.0 + 2.0 * j / pairs;
      const double y = wrap_torus(x + (-1.0 + 2.0 * (j + 0.5) / pairs));
      const double a = kernel_image_sum(t, x, y);
      const double b = kernel_fourier(t, x, y);
      const double d = std::abs(a - b);
      max_diff = std::max(max_diff, d);
      csv += fmt(t) + "," + fmt(x) + "," + fmt(y) + "," + fmt(a) + "," + fmt(b) + "," + fmt(d) + "\n";
    }
  }
  write_file(out / "kernel_error.csv", csv);
  summary["max_abs_diff"] = max_diff;

  const int probes = static_cast<int>(c.get_int("kernel.ck_probes"));
  const int mass_nodes = static_cast<int>(c.get_int("kernel.mass_nodes"));
  if (probes < 0 || probes > 8) throw ConfigError("kernel.ck_probes must be in [0, 8]");
  if (mass_nodes < 16) throw ConfigError("kernel.mass_nodes must be >= 16");
  if (opt.check) {
    const double ts[8][2] = {{0.05, 0.05}, {0.1, 0.4},  {0.5, 0.5},  {1.0, 2.0},
                             {0.02, 4.0},  {0.25, 0.1}, {2.0, 0.03}, {0.7, 0.7}};
    double worst_ck = 0.0;
    for (int i = 0; i < probes; ++i) {
      const double z = -1.0 + 2.0 * (i + 0.5) / std::max(probes, 1);
      worst_ck = std::max(worst_ck, chapman_kolmogorov_residual(ts[i][0], ts[i][1], z));
    }
    double worst_mass = 0.0;
    for (const double t : {t_min, std::sqrt(t_min * t_max), t_max}) {
      double m = 0.0;
      for (int k = 0; k < mass_nodes; ++k)
        m += kernel_value(t, 0.0, -1.0 + 2.0 * k / mass_nodes);
      m *= 2.0 / mass_nodes;
      worst_mass = std::max(worst_mass, std::abs(m - 1.0));
    }
    summary["ck_residual"] = worst_ck;
    summary["mass_defect"] = worst_mass;
    if (max_diff > 1e-10)
      throw CheckFailure("kernel representations disagree: max diff " + fmt(max_diff));
    if (worst_ck > 1e-8)
      throw CheckFailure("semigroup composition residual " + fmt(worst_ck) + " exceeds 1e-8");
    if (worst_mass > 1e-10)
      throw CheckFailure("kernel mass defect " + fmt(worst_mass) + " exceeds 1e-10");
  }
  return {"kernel_error.csv"};
}

std::vector<std::string> do_simulate(const Config& c, const Options& opt, const fs::path& out,
                                     json& summary) {
  SolverConfig cfg = solver_from(c);
  const long long n_snap = c.get_int("snapshots.count");
  if (n_snap < 0 || n_snap > 100000) throw ConfigError("snapshots.count must be in [0, 100000]");
  for (long long i = 1; i <= n_snap; ++i)
    cfg.snapshot_times.push_back(cfg.t_end * double(i) / double(n_snap));
  const auto seed = static_cast<std::uint64_t>(c.get_int("seed"));

  const Trajectory tr = simulate(initial_field(c, cfg.J), cfg, NoiseStream(seed, 0));

  long long stride = c.get_int("observables.stride");
  if (stride < 0) throw ConfigError("observables.stride must be >= 0");
  if (stride == 0) stride = std::max<long long>(1, static_cast<long long>(tr.times.size()) / 2000);

  std::string obs = "t,L,U,mean\n";
  const std::size_t n = tr.times.size();
  const auto emit = [&](std::size_t i) {
    obs += fmt(tr.times[i]) + "," + fmt(tr.min_series[i]) + "," + fmt(tr.max_series[i]) + "," +
           fmt(tr.mean_series[i]) + "\n";
  };
  std::size_t last = 0;
  for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(stride)) {
    emit(i);
    last = i;
  }
  if (n > 0 && last != n - 1) emit(n - 1);
  write_file(out / "observables.csv", obs);

  std::string snaps = "t";
  for (int j = 0; j < cfg.J; ++j) snaps += ",x" + std::to_string(j);
  snaps += "\n";
  for (const auto& [t, f] : tr.snapshots) {
    snaps += fmt(t);
    for (int j = 0; j < cfg.J; ++j) snaps += "," + fmt(f[j]);
    snaps += "\n";
  }
  write_file(out / "snapshots.csv", snaps);

  summary["steps"] = n;
  summary["dt"] = tr.dt;
  summary["final_min"] = tr.min_series.back();
  summary["final_max"] = tr.max_series.back();
  summary["snapshots"] = tr.snapshots.size();

  if (opt.check) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(tr.min_series[i]) || !std::isfinite(tr.max_series[i]) ||
          !std::isfinite(tr.mean_series[i]))
        throw CheckFailure("non-finite observable at t = " + fmt(tr.times[i]));
      if (cfg.clamp_nonnegative && tr.min_series[i] < 0.0)
        throw CheckFailure("negative minimum under comparison clamp at t = " + fmt(tr.times[i]));
    }
    if (tr.snapshots.size() != static_cast<std::size_t>(n_snap))
      throw CheckFailure("snapshot count mismatch");
  }
  return {"observables.csv", "snapshots.csv"};
}

std::vector<std::string> do_couple(const Config& c, const Options& opt, const fs::path& out,
                                   json& summary) {
  SolverConfig cfg = solver_from(c);
  const std::string kind_s = c.get_enum("couple.kind", {"natural", "independent", "pm", "am"});
  const CouplingKind kind = kind_s == "natural"       ? CouplingKind::natural
                            : kind_s == "independent" ? CouplingKind::independent
                            : kind_s == "pm"          ? CouplingKind::pm
                                                      : CouplingKind::am;
  const double level = c.get_double("couple.level");
  const double delta = c.get_double("couple.delta");
  if (level <= 0.0) throw ConfigError("couple.level must be > 0");
  if (delta < 0.0) throw ConfigError("couple.delta must be >= 0");
  const double merge_tol = c.get_double("couple.merge_tol");
  if (merge_tol < 0.0) throw ConfigError("couple.merge_tol must be >= 0");
  const int replicas = static_cast<int>(c.get_int("replicas"));
  if (replicas < 1 || replicas > 100000) throw ConfigError("replicas must be in [1, 100000]");
  const auto seed = static_cast<std::uint64_t>(c.get_int("seed"));

  const TorusGrid grid(cfg.J);
  Field lo = Field::Constant(cfg.J, level);
  Field hi(cfg.J);
  // the upper start adds a unit-mass hill of total size delta, keeping the
  // pair ordered so every coupling kind sees the same L1 separation
  for (int i = 0; i < cfg.J; ++i)
    hi[i] = level + delta * 0.5 * (1.0 + std::cos(M_PI * grid.coord(i)));

  std::vector<CouplingState> states(static_cast<std::size_t>(replicas));
  parallel_slots(replicas, opt.threads, [&](int r) {
    std::optional<double> tol;
    if (merge_tol > 0.0) tol = merge_tol;
    states[static_cast<std::size_t>(r)] =
        run_coupled(hi, lo, kind, cfg, seed, static_cast<std::uint32_t>(r), 1e-10, tol);
  });

  std::string csv = "replica,kind,delta,tau_or_timeout,merged\n";
  int merged_count = 0;
  for (int r = 0; r < replicas; ++r) {
    const auto& s = states[static_cast<std::size_t>(r)];
    merged_count += s.merged ? 1 : 0;
    csv += std::to_string(r) + "," + kind_s + "," + fmt(delta) + "," +
           fmt(s.tau.value_or(s.time)) + "," + (s.merged ? "1" : "0") + "\n";
  }
  write_file(out / "coupling.csv", csv);
  summary["merged"] = merged_count;
  summary["replicas"] = replicas;

  if (opt.check) {
    for (const auto& s : states) {
      if (!s.psi1.allFinite() || !s.psi2.allFinite())
        throw CheckFailure("non-finite coupled state");
      if (s.merged && !s.tau) throw CheckFailure("merged replica without a merge time");
    }
    if (kind == CouplingKind::pm) {
      // the theorem is about the discounted ensemble mean; pathwise mass can
      // dip below zero once the gap-weighted mixing injects fresh noise
      const MassAuditReport rep = mass_supermartingale_audit(states);
      summary["min_mass"] = rep.min_mass;
      summary["worst_violation_z"] = rep.worst_violation_z;
      if (!rep.monotone_within_2se)
        throw CheckFailure("discounted mass mean rose beyond 2 SE (z = " +
                           fmt(rep.worst_violation_z) + ")");
    }
  }
  return {"coupling.csv"};
}

std::vector<std::string> do_chain(const Config& c, const Options& opt, const fs::path& out,
                                  json& summary) {
  ChainConfig cc;
  cc.M = static_cast<int>(c.get_int("chain.M"));
  cc.p_up = c.get_double("chain.p");
  cc.stage = solver_from(c);
  cc.stage_timeout = c.get_double("chain.stage_timeout");
  const std::string mode = c.get_enum("chain.mode", {"ideal", "embedded"});
  const auto seed = static_cast<std::uint64_t>(c.get_int("seed"));

  ChainRecord rec;
  if (mode == "ideal") {
    const long long steps = c.get_int("chain.steps");
    NoiseStream stream(seed, 0);
    rec = run_ideal_chain(cc, steps, stream);
  } else {
    const int stages = static_cast<int>(c.get_int("chain.stages"));
    rec = run_embedded_chain(cc, stages, seed, 0);
  }

  std::string csv = "n,X_n,ell_n,outcome\n";
  csv += "0," + std::to_string(rec.X.front()) + ",0,start\n";
  for (std::size_t k = 0; k + 1 < rec.X.size(); ++k) {
    const double ell = mode == "ideal" ? 1.0 : rec.durations[k];
    csv += std::to_string(k + 1) + "," + std::to_string(rec.X[k + 1]) + "," + fmt(ell) + "," +
           stage_outcome_name(rec.outcomes[k]) + "\n";
  }
  write_file(out / "chain.csv", csv);

  summary["stages"] = rec.outcomes.size();
  summary["top_visits"] = rec.beta.size();
  if (!rec.beta.empty()) {
    double mean_beta = 0.0;
    for (const long long b : rec.beta) mean_beta += double(b);
    summary["mean_beta"] = mean_beta / double(rec.beta.size());
  }
  json occ = json::object();
  for (const auto& [level, count] : rec.occupation) occ[std::to_string(level)] = count;
  summary["occupation"] = occ;

  if (opt.check) {
    if (rec.X.front() != cc.M - 2) throw CheckFailure("chain does not start at M-2");
    for (const int x : rec.X)
      if (x > cc.M - 1) throw CheckFailure("chain exceeded its reflecting top level");
    if (rec.outcomes.size() + 1 != rec.X.size())
      throw CheckFailure("outcome count does not match the path length");
    if (mode == "embedded")
      for (const double d : rec.durations)
        if (!(d > 0.0)) throw CheckFailure("non-positive stage duration");
  }
  return {"chain.csv"};
}

std::vector<std::string> do_measure(const Config& c, const Options& opt, const fs::path& out,
                                    json& summary) {
  const SolverConfig cfg = solver_from(c);
  const double burn_in = c.get_double("measure.burn_in");
  const double thinning = c.get_double("measure.thinning");
  const int total = static_cast<int>(c.get_int("measure.total"));
  const auto seed = static_cast<std::uint64_t>(c.get_int("seed"));

  const double dtc = c.get_double("measure.dt_coarse");
  const double burst = c.get_double("measure.burst_t");
  const double dtf = c.get_double("measure.dt_fine");
  std::optional<MeasureSchedule> schedule;
  const int set_count = (dtc > 0.0) + (burst > 0.0) + (dtf > 0.0);
  if (set_count == 3)
    schedule = MeasureSchedule{dtc, burst, dtf};
  else if (set_count != 0)
    throw ConfigError("measure schedule needs dt_coarse, burst_t and dt_fine all positive");

  const EmpiricalMeasure m = kb_sample(cfg, burn_in, thinning, total, seed, 0, schedule);

  std::string csv = "name,mean,q25,q50,q75\n";
  if (!m.extinct && m.snapshots.size() >= 30) {
    for (const auto& row : measure_summary(m))
      csv += row.name + "," + fmt(row.mean) + "," + fmt(row.q25) + "," + fmt(row.q50) + "," +
             fmt(row.q75) + "\n";
  }
  write_file(out / "measure_summary.csv", csv);

  summary["snapshots"] = m.snapshots.size();
  summary["extinct"] = m.extinct;
  if (m.extinct) summary["extinction_time"] = m.extinction_time;

  if (opt.check) {
    if (m.extinct)
      throw CheckFailure("sample went extinct at t = " + fmt(m.extinction_time) +
                         "; no invariant statistics to report");
    if (m.snapshots.size() < 30) throw CheckFailure("too few snapshots for summary statistics");
  }
  return {"measure_summary.csv"};
}

std::string phase_row(const PhasePoint& p) {
  std::string row = fmt(p.lambda) + "," + fmt(p.slope) + "," + fmt(p.slope_ci_lo) + "," +
                    fmt(p.slope_ci_hi);
  for (const double occ : p.occupation) row += "," + fmt(occ);
  row += std::string(",") + phase_verdict_name(p.verdict) + "\n";
  return row;
}

std::vector<std::string> do_sweep(const Config& c, const Options& opt, const fs::path& out,
                                  json& summary) {
  const SolverConfig base = solver_from(c);
  const std::vector<double> lambdas = c.get_list("sweep.lambdas");
  for (std::size_t i = 1; i < lambdas.size(); ++i)
    if (!(lambdas[i] > lambdas[i - 1]))
      throw ConfigError("sweep.lambdas must be strictly increasing");
  const std::vector<double> eps = c.get_list("sweep.eps");
  const int replicas = static_cast<int>(c.get_int("replicas"));
  if (replicas < 2 || replicas > 100000) throw ConfigError("replicas must be in [2, 100000]");
  const auto seed = static_cast<std::uint64_t>(c.get_int("seed"));

  std::string header = "lambda,slope,slope_ci_lo,slope_ci_hi";
  for (const double e : eps) header += ",occupation@" + fmt_short(e);
  header += ",verdict\n";

  const int n = static_cast<int>(lambdas.size());
  std::vector<std::string> rows(static_cast<std::size_t>(n));
  std::vector<std::optional<PhasePoint>> points(static_cast<std::size_t>(n));

  // A resume only trusts rows whose run had the same config digest; rows are
  // matched positionally so each point keeps its replica stream block.
  int reused = 0;
  if (opt.resume) {
    const fs::path meta_path = out / "meta.json";
    const fs::path csv_path = out / "phase.csv";
    std::ifstream mf(meta_path);
    if (mf) {
      json meta;
      try {
        mf >> meta;
      } catch (...) {
        meta = json::object();
      }
      if (meta.value("subcommand", "") == "sweep" &&
          meta.value("config_digest", "") == config_digest_hex(c)) {
        std::ifstream cf(csv_path);
        if (cf) {
          std::string line;
          if (std::getline(cf, line) && line + "\n" == header) {
            int i = 0;
            const std::size_t cols = 5 + eps.size();
            while (i < n && std::getline(cf, line)) {
              if (line.empty()) break;
              const std::string want = fmt(lambdas[static_cast<std::size_t>(i)]) + ",";
              if (line.compare(0, want.size(), want) != 0) break;
              if (static_cast<std::size_t>(std::count(line.begin(), line.end(), ',') + 1) != cols)
                break;
              rows[static_cast<std::size_t>(i)] = line + "\n";
              ++i;
              ++reused;
            }
          }
        }
      }
    }
  }

  std::vector<int> todo;
  for (int i = 0; i < n; ++i)
    if (rows[static_cast<std::size_t>(i)].empty()) todo.push_back(i);
  parallel_slots(static_cast<int>(todo.size()), opt.threads, [&](int k) {
    const int i = todo[static_cast<std::size_t>(k)];
    const PhasePoint p = phase_point(lambdas[static_cast<std::size_t>(i)], base, replicas, eps,
                                     seed, static_cast<std::uint32_t>(i * replicas));
    points[static_cast<std::size_t>(i)] = p;
    rows[static_cast<std::size_t>(i)] = phase_row(p);
  });

  std::string csv = header;
  for (const auto& row : rows) csv += row;
  write_file(out / "phase.csv", csv);
  summary["points"] = n;
  summary["reused_points"] = reused;

  if (opt.check) {
    for (int i = 0; i < n; ++i) {
      const auto& p = points[static_cast<std::size_t>(i)];
      if (!p) continue;  // reused rows were checked by the run that produced them
      const char* v = phase_verdict_name(p->verdict);
      int zero_hits = 0;
      for (const auto& r : p->replicas) zero_hits += r.hit_zero ? 1 : 0;
      const bool extinct_stat =
          p->slope_ci_hi < kExtinctSlopeCeiling || 2 * zero_hits > replicas;
      if ((std::string(v) == "extinct") != extinct_stat)
        throw CheckFailure("verdict inconsistent with decay statistics at lambda = " +
                           fmt(p->lambda));
    }
  }
  return {"phase.csv"};
}

std::vector<std::string> do_appendix(const Config& c, const Options& opt, const fs::path& out,
                                     json& summary) {
  const auto seed = static_cast<std::uint64_t>(c.get_int("seed"));
  const int divisor = static_cast<int>(c.get_int("appendix.cost_divisor"));
  const std::vector<LemmaCheck> checks = appendix_battery(seed, divisor);

  json rep;
  rep["seed"] = seed;
  rep["cost_divisor"] = divisor;
  rep["results"] = json::array();
  bool all_pass = true;
  for (const auto& ch : checks) {
    rep["results"].push_back({{"name", ch.name},
                              {"pass", ch.pass},
                              {"observed", ch.observed},
                              {"reference", ch.reference},
                              {"detail", ch.detail}});
    all_pass = all_pass && ch.pass;
  }
  rep["all_pass"] = all_pass;
  write_file(out / "appendix_report.json", rep.dump(2) + "\n");
  summary["all_pass"] = all_pass;

  if (opt.check && !all_pass) {
    std::string failing;
    for (const auto& ch : checks)
      if (!ch.pass) failing += (failing.empty() ? "" : ", ") + ch.name;
    throw CheckFailure("estimator checks failed: " + failing);
  }
  return {"appendix_report.json"};
}

// ---------------------------------------------------------------------------

int dispatch(const Options& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const Config cfg = build_config(opt);
  const fs::path out(opt.out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory '" + out.string() + "': " + ec.message());

  json summary = json::object();
  std::vector<std::string> files;
  std::optional<std::string> check_error;
  try {
    if (opt.subcommand == "kernel")
      files = do_kernel(cfg, opt, out, summary);
    else if (opt.subcommand == "simulate")
      files = do_simulate(cfg, opt, out, summary);
    else if (opt.subcommand == "couple")
      files = do_couple(cfg, opt, out, summary);
    else if (opt.subcommand == "chain")
      files = do_chain(cfg, opt, out, summary);
    else if (opt.subcommand == "measure")
      files = do_measure(cfg, opt, out, summary);
    else if (opt.subcommand == "sweep")
      files = do_sweep(cfg, opt, out, summary);
    else if (opt.subcommand == "appendix")
      files = do_appendix(cfg, opt, out, summary);
    else
      throw ConfigError("unknown subcommand '" + opt.subcommand + "'");
  } catch (const CheckFailure& e) {
    check_error = e.what();
  }

  write_file(out / "config.echo", config_canonical(cfg));
  files.push_back("config.echo");
  files.push_back("meta.json");

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json meta;
  meta["subcommand"] = opt.subcommand;
  meta["config_digest"] = config_digest_hex(cfg);
  meta["seed"] = cfg.get_int("seed");
  meta["replicas"] = cfg.get_int("replicas");
  meta["threads"] = opt.threads;
  meta["rng"] = rng_identity();
  meta["wall_seconds"] = wall;
  meta["outputs"] = files;
  meta["summary"] = summary;
  if (opt.check) {
    meta["check"] = json{{"pass", !check_error.has_value()}};
    if (check_error) meta["check"]["reason"] = *check_error;
  }
  write_file(out / "meta.json", meta.dump(2) + "\n");

  if (check_error) {
    std::cerr << "check failed: " << *check_error << "\n";
    return 4;
  }
  return 0;
}

}  // namespace

int cli_run(const std::vector<std::string>& args) {
  CLI::App app{"reaction-diffusion phase laboratory"};
  app.require_subcommand(1);

  Options opt;
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"kernel", "compare periodic heat kernel representations"},
      {"simulate", "run one field trajectory and record observables"},
      {"sweep", "classify persistence across a lambda grid"},
      {"couple", "run two-point couplings over replicas"},
      {"chain", "run the level walk (ideal or field-embedded)"},
      {"measure", "sample the long-run field distribution"},
      {"appendix", "run the estimator validation battery"},
  };
  for (const auto& [name, desc] : subs) {
    CLI::App* s = app.add_subcommand(name, desc);
    s->add_option("--config", opt.config_path, "key=value config file");
    s->add_option("--out", opt.out_dir, "output directory (default lab_out)");
    s->add_option("--set", opt.sets, "override one config key (key=value, repeatable)");
    s->add_option_function<long long>(
        "--seed", [&opt](const long long& v) { opt.seed = v; }, "RNG seed (overrides config)");
    s->add_option_function<long long>(
        "--replicas", [&opt](const long long& v) { opt.replicas = v; },
        "replica count (overrides config)");
    s->add_option("--threads", opt.threads, "worker threads for replica/grid fan-out");
    s->add_flag("--check", opt.check, "verify invariants after the run (exit 4 on failure)");
    s->add_flag("--resume", opt.resume, "reuse completed sweep points when the digest matches");
    if (name == "chain") s->add_option("--mode", opt.chain_mode, "ideal or embedded");
    s->callback([&opt, n = name] { opt.subcommand = n; });
  }

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    return dispatch(opt);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const BlowUpError& e) {
    std::cerr << "blow-up: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace rdlab
