#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "engine.hpp"

#ifndef SPBP_VERSION
#define SPBP_VERSION "0.1.0"
#endif

namespace spbp {

// ---- configuration --------------------------------------------------------

struct TrafficConfig {
  int streaming_flows = 0;
  int bursty_flows = 0;
  // When positive, flow counts scale with network size: round(x * n).
  double streaming_per_node = 0.0;
  double bursty_per_node = 0.0;
  Slot burst_len = kDefaultBurstLen;

  TrafficMix mix_for(int n_nodes) const {
    TrafficMix m;
    m.streaming = streaming_per_node > 0.0 ? static_cast<int>(std::lround(streaming_per_node * n_nodes))
                                           : streaming_flows;
    m.bursty = bursty_per_node > 0.0 ? static_cast<int>(std::lround(bursty_per_node * n_nodes))
                                     : bursty_flows;
    m.burst_len = burst_len;
    return m;
  }
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::vector<int> n_nodes{20};
  double mean_degree = 6.0;
  // connect_radius <= 0 in netgen means "derive from mean_degree per size".
  NetGenParams netgen{.connect_radius = 0.0};
  RateKind rate_kind = RateKind::Static;
  double jitter = 0.0;
  std::vector<PolicyConfig> policies{PolicyConfig{}};
  TrafficConfig traffic{.streaming_flows = 8};
  std::vector<RateSpec> lambdas{RateSpec::fixed(1.0)};
  Slot horizon = 1000;
  int seeds = 1;
  std::uint64_t master_seed = 1;
  int jobs = 0;  // 0: hardware concurrency
  bool audit = false;

  NetGenParams netgen_for(int n) const {
    NetGenParams p = netgen;
    if (!(p.connect_radius > 0.0)) p.connect_radius = radius_for_mean_degree(n, mean_degree);
    return p;
  }
};

namespace detail {

inline std::string field_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

template <class T>
T get_field(const nlohmann::json& j, const std::string& key, const std::string& path) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("field '" + field_path(path, key) + "': " + e.what());
  }
}

template <class T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback, const std::string& path = "") {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return get_field<T>(j, key, path);
}

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                       const std::string& path) {
  if (!j.is_object()) throw ConfigError("field '" + (path.empty() ? "<root>" : path) + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError("field '" + field_path(path, it.key()) + "': unknown key");
  }
}

}  // namespace detail

inline RateSpec parse_lambda(const nlohmann::json& j, const std::string& path) {
  if (j.is_number()) {
    double v = j.get<double>();
    if (v < 0.0) throw ConfigError("field '" + path + "': lambda must be >= 0");
    return RateSpec::fixed(v);
  }
  if (j.is_object() && j.contains("uniform")) {
    const auto& u = j.at("uniform");
    if (!u.is_array() || u.size() != 2 || !u[0].is_number() || !u[1].is_number())
      throw ConfigError("field '" + path + ".uniform': expected [lo, hi]");
    double lo = u[0].get<double>(), hi = u[1].get<double>();
    if (lo < 0.0 || hi < lo) throw ConfigError("field '" + path + ".uniform': need 0 <= lo <= hi");
    return RateSpec::uniform_between(lo, hi);
  }
  throw ConfigError("field '" + path + "': expected a number or {\"uniform\": [lo, hi]}");
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using namespace detail;
  check_keys(j, {"name", "n_nodes", "mean_degree", "netgen", "rates", "policies", "traffic", "lambda",
                 "horizon", "seeds", "master_seed", "jobs", "audit"},
             "");
  ExperimentConfig c;
  c.name = get_or<std::string>(j, "name", c.name);
  if (j.contains("n_nodes")) {
    const auto& n = j.at("n_nodes");
    c.n_nodes = n.is_array() ? get_field<std::vector<int>>(j, "n_nodes", "") : std::vector<int>{get_field<int>(j, "n_nodes", "")};
  }
  if (c.n_nodes.empty()) throw ConfigError("field 'n_nodes': must not be empty");
  for (int n : c.n_nodes)
    if (n < 2) throw ConfigError("field 'n_nodes': every size must be >= 2");
  c.mean_degree = get_or(j, "mean_degree", c.mean_degree);
  if (!(c.mean_degree > 0.0)) throw ConfigError("field 'mean_degree': must be positive");

  if (j.contains("netgen")) {
    const auto& g = j.at("netgen");
    check_keys(g, {"connect_radius", "interference_radius", "r_min", "r_max", "rate_exponent", "max_retries"},
               "netgen");
    c.netgen.connect_radius = get_or(g, "connect_radius", c.netgen.connect_radius, "netgen");
    c.netgen.interference_radius = get_or(g, "interference_radius", c.netgen.interference_radius, "netgen");
    c.netgen.r_min = get_or(g, "r_min", c.netgen.r_min, "netgen");
    c.netgen.r_max = get_or(g, "r_max", c.netgen.r_max, "netgen");
    c.netgen.rate_exponent = get_or(g, "rate_exponent", c.netgen.rate_exponent, "netgen");
    c.netgen.max_retries = get_or(g, "max_retries", c.netgen.max_retries, "netgen");
    if (!(c.netgen.r_min > 0.0) || c.netgen.r_max < c.netgen.r_min)
      throw ConfigError("field 'netgen.r_min'/'netgen.r_max': need 0 < r_min <= r_max");
    if (c.netgen.max_retries < 1) throw ConfigError("field 'netgen.max_retries': must be >= 1");
  }

  if (j.contains("rates")) {
    const auto& r = j.at("rates");
    check_keys(r, {"kind", "jitter"}, "rates");
    auto kind = get_or<std::string>(r, "kind", "static", "rates");
    if (kind == "static")
      c.rate_kind = RateKind::Static;
    else if (kind == "uniform_jitter")
      c.rate_kind = RateKind::UniformJitter;
    else
      throw ConfigError("field 'rates.kind': unknown rate process '" + kind + "'");
    c.jitter = get_or(r, "jitter", 0.0, "rates");
    if (c.jitter < 0.0 || c.jitter >= 1.0) throw ConfigError("field 'rates.jitter': must lie in [0, 1)");
  }

  if (j.contains("policies")) {
    const auto& ps = j.at("policies");
    if (!ps.is_array() || ps.empty()) throw ConfigError("field 'policies': expected a non-empty array");
    c.policies.clear();
    for (std::size_t k = 0; k < ps.size(); ++k) {
      const std::string path = "policies[" + std::to_string(k) + "]";
      check_keys(ps[k], {"routing", "bias", "scheduler"}, path);
      PolicyConfig p;
      try {
        p.routing = parse_routing(get_field<std::string>(ps[k], "routing", path));
      } catch (const ConfigError& e) {
        throw ConfigError("field '" + path + ".routing': " + e.what());
      }
      try {
        p.bias = parse_bias_kind(get_or<std::string>(ps[k], "bias", "sp_rbar_rmax_over_r", path));
      } catch (const ConfigError& e) {
        throw ConfigError("field '" + path + ".bias': " + e.what());
      }
      try {
        p.scheduler = parse_scheduler(get_or<std::string>(ps[k], "scheduler", "lgs", path));
      } catch (const ConfigError& e) {
        throw ConfigError("field '" + path + ".scheduler': " + e.what());
      }
      if (p.routing == Routing::SPR && p.bias == BiasKind::Zero)
        throw ConfigError("field '" + path + ".bias': spr routing needs a non-zero bias scheme");
      c.policies.push_back(p);
    }
  }

  if (j.contains("traffic")) {
    const auto& t = j.at("traffic");
    check_keys(t, {"streaming_flows", "bursty_flows", "streaming_per_node", "bursty_per_node", "burst_len"},
               "traffic");
    c.traffic = TrafficConfig{};
    c.traffic.streaming_flows = get_or(t, "streaming_flows", 0, "traffic");
    c.traffic.bursty_flows = get_or(t, "bursty_flows", 0, "traffic");
    c.traffic.streaming_per_node = get_or(t, "streaming_per_node", 0.0, "traffic");
    c.traffic.bursty_per_node = get_or(t, "bursty_per_node", 0.0, "traffic");
    c.traffic.burst_len = get_or<Slot>(t, "burst_len", kDefaultBurstLen, "traffic");
    if (c.traffic.streaming_flows < 0 || c.traffic.bursty_flows < 0 || c.traffic.streaming_per_node < 0.0 ||
        c.traffic.bursty_per_node < 0.0)
      throw ConfigError("field 'traffic': flow counts must be non-negative");
    if (c.traffic.burst_len < 1) throw ConfigError("field 'traffic.burst_len': must be >= 1");
  }

  if (j.contains("lambda")) {
    const auto& l = j.at("lambda");
    c.lambdas.clear();
    if (l.is_array()) {
      for (std::size_t k = 0; k < l.size(); ++k) c.lambdas.push_back(parse_lambda(l[k], "lambda[" + std::to_string(k) + "]"));
    } else {
      c.lambdas.push_back(parse_lambda(l, "lambda"));
    }
    if (c.lambdas.empty()) throw ConfigError("field 'lambda': must not be empty");
  }

  c.horizon = get_or<Slot>(j, "horizon", c.horizon);
  if (c.horizon < 0) throw ConfigError("field 'horizon': must be >= 0");
  c.seeds = get_or(j, "seeds", c.seeds);
  if (c.seeds < 1) throw ConfigError("field 'seeds': must be >= 1");
  c.master_seed = get_or<std::uint64_t>(j, "master_seed", c.master_seed);
  c.jobs = get_or(j, "jobs", c.jobs);
  if (c.jobs < 0) throw ConfigError("field 'jobs': must be >= 0");
  c.audit = get_or(j, "audit", c.audit);

  for (int n : c.n_nodes) {
    TrafficMix m = c.traffic.mix_for(n);
    if (m.streaming + m.bursty == 0) throw ConfigError("field 'traffic': no flows configured");
    if (static_cast<std::int64_t>(m.streaming + m.bursty) > static_cast<std::int64_t>(n) * (n - 1))
      throw ConfigError("field 'traffic': more flows than source-destination pairs for n_nodes=" +
                        std::to_string(n));
    if (m.bursty > 0 && c.horizon <= 100)
      throw ConfigError("field 'horizon': bursty traffic needs horizon > 100");
  }
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  json policies = json::array();
  for (const auto& p : c.policies)
    policies.push_back({{"routing", to_string(p.routing)}, {"bias", to_string(p.bias)}, {"scheduler", to_string(p.scheduler)}});
  json lambdas = json::array();
  for (const auto& l : c.lambdas) {
    if (l.uniform)
      lambdas.push_back({{"uniform", {l.lo, l.hi}}});
    else
      lambdas.push_back(l.value);
  }
  return {{"name", c.name},
          {"n_nodes", c.n_nodes},
          {"mean_degree", c.mean_degree},
          {"netgen", c.netgen},
          {"rates", {{"kind", to_string(c.rate_kind)}, {"jitter", c.jitter}}},
          {"policies", policies},
          {"traffic",
           {{"streaming_flows", c.traffic.streaming_flows},
            {"bursty_flows", c.traffic.bursty_flows},
            {"streaming_per_node", c.traffic.streaming_per_node},
            {"bursty_per_node", c.traffic.bursty_per_node},
            {"burst_len", c.traffic.burst_len}}},
          {"lambda", lambdas},
          {"horizon", c.horizon},
          {"seeds", c.seeds},
          {"master_seed", c.master_seed},
          {"jobs", c.jobs},
          {"audit", c.audit}};
}

// ---- presets --------------------------------------------------------------

inline std::vector<PolicyConfig> sp_bp_variants() {
  std::vector<PolicyConfig> v;
  for (BiasKind b : {BiasKind::SpRbar, BiasKind::SpRbarRmaxOverR})
    for (Routing r : {Routing::ExclSPBP, Routing::MaxUSPBP}) v.push_back({r, b, SchedulerKind::LGS});
  return v;
}

inline std::vector<RateSpec> fixed_rates(std::initializer_list<double> values) {
  std::vector<RateSpec> v;
  for (double x : values) v.push_back(RateSpec::fixed(x));
  return v;
}

inline std::vector<std::pair<std::string, ExperimentConfig>> presets() {
  std::vector<std::pair<std::string, ExperimentConfig>> out;

  // Streaming-only throughput sweep, identical lambda for every flow.
  ExperimentConfig a;
  a.name = "fig3a-desk";
  a.n_nodes = {20};
  a.policies = sp_bp_variants();
  a.traffic = TrafficConfig{.streaming_flows = 8};
  a.lambdas = fixed_rates({0.5, 1, 2, 4, 8});
  a.seeds = 10;
  out.emplace_back(a.name, a);

  // Mixed streaming + bursty latency sweep: SPR against Excl and MaxU.
  ExperimentConfig b;
  b.name = "fig3b-desk";
  b.n_nodes = {20};
  b.policies = {{Routing::SPR, BiasKind::SpRbarRmaxOverR, SchedulerKind::LGS},
                {Routing::ExclSPBP, BiasKind::SpRbarRmaxOverR, SchedulerKind::LGS},
                {Routing::MaxUSPBP, BiasKind::SpRbarRmaxOverR, SchedulerKind::LGS}};
  b.traffic = TrafficConfig{.streaming_flows = 4, .bursty_flows = 4};
  b.lambdas = fixed_rates({0.3, 0.9, 1.8, 3.0, 6.0});
  b.seeds = 10;
  out.emplace_back(b.name, b);

  // Mixed traffic at light random load across network sizes.
  ExperimentConfig c;
  c.name = "fig3c-desk";
  c.n_nodes = {20, 40, 60};
  c.policies = sp_bp_variants();
  c.traffic = TrafficConfig{.streaming_per_node = 0.2, .bursty_per_node = 0.2};
  c.lambdas = {RateSpec::uniform_between(0.1, 1.0)};
  c.seeds = 10;
  out.emplace_back(c.name, c);

  ExperimentConfig af = a;
  af.name = "fig3a-full";
  af.n_nodes = {100};
  af.traffic = TrafficConfig{.streaming_flows = 40};
  af.lambdas = fixed_rates({0.1, 0.5, 1, 2, 4, 6, 8, 10, 12});
  af.seeds = 100;
  out.emplace_back(af.name, af);

  ExperimentConfig bf = b;
  bf.name = "fig3b-full";
  bf.n_nodes = {100};
  bf.traffic = TrafficConfig{.streaming_flows = 20, .bursty_flows = 20};
  bf.lambdas = fixed_rates({0.3, 0.6, 0.9, 1.2, 1.5, 1.8, 2.4, 3.0, 4.5, 6.0});
  bf.seeds = 100;
  out.emplace_back(bf.name, bf);

  ExperimentConfig cf = c;
  cf.name = "fig3c-full";
  cf.n_nodes = {20, 40, 60, 80, 100};
  cf.seeds = 100;
  out.emplace_back(cf.name, cf);

  return out;
}

inline std::optional<ExperimentConfig> find_preset(const std::string& name) {
  for (auto& [n, c] : presets())
    if (n == name) return c;
  return std::nullopt;
}

// ---- sweep ----------------------------------------------------------------

struct RunKey {
  int size_index = 0;
  int lambda_index = 0;
  int policy_index = 0;
  int seed_index = 0;
};

struct RunSeeds {
  std::uint64_t instance = 0;
  std::uint64_t traffic = 0;
  std::uint64_t simulation = 0;
};

/// Seeds depend on (size, seed index) for the network and flow pairs and
/// additionally on lambda for arrivals; never on the policy, so every
/// policy faces the same network and traffic.
inline RunSeeds run_seeds(const ExperimentConfig& c, const RunKey& k) {
  const auto n = static_cast<std::uint64_t>(c.n_nodes[k.size_index]);
  const auto s = static_cast<std::uint64_t>(k.seed_index);
  return {mix_seed({c.master_seed, 0x696e7374ULL, n, s}), mix_seed({c.master_seed, 0x74726166ULL, n, s}),
          mix_seed({c.master_seed, 0x73696dULL, n, s, static_cast<std::uint64_t>(k.lambda_index)})};
}

inline std::vector<RunKey> enumerate_runs(const ExperimentConfig& c) {
  std::vector<RunKey> keys;
  for (int si = 0; si < static_cast<int>(c.n_nodes.size()); ++si)
    for (int li = 0; li < static_cast<int>(c.lambdas.size()); ++li)
      for (int pi = 0; pi < static_cast<int>(c.policies.size()); ++pi)
        for (int s = 0; s < c.seeds; ++s) keys.push_back({si, li, pi, s});
  return keys;
}

inline std::string policy_column(const PolicyConfig& p) {
  std::string s(to_string(p.routing));
  if (p.scheduler != SchedulerKind::LGS) s += "/" + std::string(to_string(p.scheduler));
  return s;
}

inline std::string run_name(const ExperimentConfig& c, const RunKey& k) {
  const PolicyConfig& p = c.policies[k.policy_index];
  char buf[160];
  std::snprintf(buf, sizeof buf, "n%d_l%d_%s_%s_s%03d", c.n_nodes[k.size_index], k.lambda_index,
                policy_column(p).c_str(), std::string(to_string(p.bias)).c_str(), k.seed_index);
  std::string s = buf;
  std::replace(s.begin(), s.end(), '/', '-');
  return s;
}

struct RunResult {
  RunKey key;
  RunSeeds seeds;
  MetricsRecord metrics;
};

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline constexpr const char* kResultsHeader =
    "policy,bias_scheme,n_nodes,lambda,traffic_kind,seed,throughput,delivery_ratio,mean_latency,"
    "composite_latency";

inline void write_results_csv(std::ostream& os, const ExperimentConfig& c, std::span<const RunResult> results) {
  os << kResultsHeader << '\n';
  for (const auto& r : results) {
    const PolicyConfig& p = c.policies[r.key.policy_index];
    for (const auto& k : r.metrics.by_kind) {
      os << policy_column(p) << ',' << to_string(p.bias) << ',' << c.n_nodes[r.key.size_index] << ','
         << c.lambdas[r.key.lambda_index].label() << ',' << to_string(k.kind) << ',' << r.key.seed_index << ','
         << format_number(k.throughput) << ',' << format_number(k.delivery_ratio) << ','
         << format_number(k.mean_latency) << ',' << format_number(k.composite_latency) << '\n';
    }
  }
}

inline constexpr int kMetricColumns = 4;
inline constexpr const char* kMetricNames[kMetricColumns] = {"throughput", "delivery_ratio", "mean_latency",
                                                             "composite_latency"};

/// One sample per (run, traffic kind), keyed by the non-seed columns.
inline std::vector<SampleRow> sample_rows(const ExperimentConfig& c, std::span<const RunResult> results) {
  std::vector<SampleRow> rows;
  for (const auto& r : results) {
    const PolicyConfig& p = c.policies[r.key.policy_index];
    for (const auto& k : r.metrics.by_kind) {
      rows.push_back({{policy_column(p), std::string(to_string(p.bias)), std::to_string(c.n_nodes[r.key.size_index]),
                       c.lambdas[r.key.lambda_index].label(), std::string(to_string(k.kind))},
                      {k.throughput, k.delivery_ratio, k.mean_latency, k.composite_latency}});
    }
  }
  return rows;
}

inline void write_summary_csv(std::ostream& os, std::span<const GroupSummary> groups) {
  os << "policy,bias_scheme,n_nodes,lambda,traffic_kind,n";
  for (const char* m : kMetricNames) os << ',' << m << "_mean," << m << "_ci95";
  os << '\n';
  for (const auto& g : groups) {
    for (const auto& k : g.key) os << k << ',';
    os << g.n;
    for (int m = 0; m < kMetricColumns; ++m) os << ',' << format_number(g.mean[m]) << ',' << format_number(g.ci95[m]);
    os << '\n';
  }
}

struct ExperimentOptions {
  std::filesystem::path out_dir;  // empty: keep results in memory only
  bool trace = false;
  bool debug_queues = false;
  int jobs = -1;  // overrides config when >= 0
};

struct ExperimentOutput {
  std::vector<RunResult> runs;
  std::string results_csv;
  std::string summary_csv;  // empty when some group has fewer than 2 samples
};

/// Networks are generated once per (size, seed) and shared read-only by
/// every run on them.
inline ExperimentOutput run_experiment(const ExperimentConfig& c, const ExperimentOptions& opt = {}) {
  namespace fs = std::filesystem;
  const auto keys = enumerate_runs(c);

  std::vector<std::vector<NetworkInstance>> nets(c.n_nodes.size());
  for (std::size_t si = 0; si < c.n_nodes.size(); ++si)
    for (int s = 0; s < c.seeds; ++s)
      nets[si].push_back(generate_network(c.n_nodes[si], c.netgen_for(c.n_nodes[si]),
                                          run_seeds(c, {static_cast<int>(si), 0, 0, s}).instance));

  const bool to_disk = !opt.out_dir.empty();
  if (to_disk) {
    fs::create_directories(opt.out_dir / "runs");
    if (opt.trace) fs::create_directories(opt.out_dir / "traces");
    if (opt.debug_queues) fs::create_directories(opt.out_dir / "queues");
    std::ofstream(opt.out_dir / "config.json") << config_to_json(c).dump(2) << '\n';
  }

  std::vector<std::optional<RunResult>> slots(keys.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;

  auto worker = [&]() {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= keys.size()) return;
      {
        std::lock_guard lock(err_mu);
        if (first_error) return;
      }
      try {
        const RunKey& k = keys[idx];
        const RunSeeds seeds = run_seeds(c, k);
        const NetworkInstance& net = nets[k.size_index][k.seed_index];
        const int n = c.n_nodes[k.size_index];
        auto flows = draw_flows(n, c.traffic.mix_for(n), c.lambdas[k.lambda_index], c.horizon, seeds.traffic);

        RunOptions ro;
        ro.rate_kind = c.rate_kind;
        ro.jitter = c.jitter;
        ro.audit = c.audit;
        const std::string name = run_name(c, k);
        std::ofstream trace_out, queue_out;
        if (to_disk && opt.trace) {
          trace_out.open(opt.out_dir / "traces" / (name + ".ndjson"));
          ro.on_trace = [&trace_out](const SlotTrace& tr) { trace_out << trace_to_json(tr).dump() << '\n'; };
        }
        if (to_disk && opt.debug_queues) {
          queue_out.open(opt.out_dir / "queues" / (name + ".csv"));
          queue_out << "t,node,commodity,length\n";
          ro.on_queues = [&queue_out, n](Slot t, std::span<const Count> q) {
            for (std::size_t x = 0; x < q.size(); ++x)
              if (q[x] > 0) queue_out << t << ',' << x / n << ',' << x % n << ',' << q[x] << '\n';
          };
        }

        RunResult res{k, seeds, run(net, c.policies[k.policy_index], flows, c.horizon, seeds.simulation, ro)};
        if (to_disk) {
          const PolicyConfig& p = c.policies[k.policy_index];
          nlohmann::json rec = {{"run", name},
                                {"n_nodes", n},
                                {"lambda", c.lambdas[k.lambda_index].label()},
                                {"policy", {{"routing", to_string(p.routing)}, {"bias", to_string(p.bias)}, {"scheduler", to_string(p.scheduler)}}},
                                {"seed_index", k.seed_index},
                                {"seeds", {{"instance", seeds.instance}, {"traffic", seeds.traffic}, {"simulation", seeds.simulation}}},
                                {"metrics", metrics_to_json(res.metrics)}};
          std::ofstream(opt.out_dir / "runs" / (name + ".json")) << rec.dump(2) << '\n';
        }
        slots[idx] = std::move(res);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  int jobs = opt.jobs >= 0 ? opt.jobs : c.jobs;
  if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  jobs = std::min<int>(jobs, static_cast<int>(std::max<std::size_t>(keys.size(), 1)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  ExperimentOutput out;
  for (auto& s : slots) out.runs.push_back(std::move(*s));

  std::ostringstream results;
  write_results_csv(results, c, out.runs);
  out.results_csv = results.str();
  auto rows = sample_rows(c, out.runs);
  try {
    auto groups = aggregate(rows);
    std::ostringstream summary;
    write_summary_csv(summary, groups);
    out.summary_csv = summary.str();
  } catch (const InsufficientSamples&) {
    out.summary_csv.clear();
  }

  if (to_disk) {
    std::ofstream(opt.out_dir / "results.csv") << out.results_csv;
    if (!out.summary_csv.empty()) std::ofstream(opt.out_dir / "summary.csv") << out.summary_csv;
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : out.runs)
      runs.push_back({{"run", run_name(c, r.key)},
                      {"instance_seed", r.seeds.instance},
                      {"traffic_seed", r.seeds.traffic},
                      {"simulation_seed", r.seeds.simulation}});
    nlohmann::json manifest = {{"name", c.name},
                               {"code_version", SPBP_VERSION},
                               {"master_seed", c.master_seed},
                               {"seed_scheme", "splitmix64(master_seed, stream tag, n_nodes, seed_index[, lambda_index])"},
                               {"arrival_law", "poisson"},
                               {"run_count", out.runs.size()},
                               {"runs", runs}};
    std::ofstream(opt.out_dir / "manifest.json") << manifest.dump(2) << '\n';
  }
  return out;
}

}  // namespace spbp
