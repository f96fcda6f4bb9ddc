#pragma once

// Run configuration: a flat key registry layered as
// defaults < config file < CRSIM_* environment < command-line flags.

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "crsim/errors.hpp"
#include "crsim/schemes.hpp"
#include "crsim/simharness.hpp"

extern char** environ;

namespace crsim {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr std::string_view kEnvPrefix = "CRSIM_";

enum class OutputFormat { Csv, Json };

struct RunConfig {
  Scenario scenario;
  SolverConfig solver;  // seed is taken per trial from the scenario streams
  std::vector<SchemeId> schemes{kAllSchemes.begin(), kAllSchemes.end()};
  SweepAxis axis = SweepAxis::InterferenceLimit;
  std::string grid;  // "lo:hi:points" or comma list; empty: axis default
  std::size_t trial = 0;
  OutputFormat format = OutputFormat::Csv;
  unsigned parallel = 1;
  std::string out;           // empty: stdout
  std::string dump_factors;  // empty: off
  int verbosity = 0;
};

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s, std::string_view key) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end || s.empty())
    throw ValidationError(std::string(key) + ": expected a number, got '" + std::string(s) + "'");
  return v;
}

template <class Int>
Int parse_int(std::string_view s, std::string_view key) {
  Int v{};
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end || s.empty())
    throw ValidationError(std::string(key) + ": expected an integer, got '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    parts.emplace_back(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

inline std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

inline std::vector<SchemeId> parse_scheme_list(std::string_view s) {
  if (trim(s) == "all") return {kAllSchemes.begin(), kAllSchemes.end()};
  std::vector<SchemeId> out;
  for (const auto& part : split(s, ',')) {
    const auto id = parse_scheme(trim(part));
    if (!id) throw ValidationError("scheme: unknown scheme '" + part + "'");
    if (std::find(out.begin(), out.end(), *id) == out.end()) out.push_back(*id);
  }
  // canonical order keeps the output independent of how the list was written
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string scheme_list_text(const std::vector<SchemeId>& ids) {
  std::string s;
  for (auto id : ids) s += (s.empty() ? "" : ",") + std::string(scheme_name(id));
  return s;
}

/// "lo:hi:points" (inclusive, evenly spaced) or an increasing comma-separated list.
inline std::vector<double> parse_grid(std::string_view text) {
  const auto t = trim(text);
  if (t.find(':') != std::string::npos) {
    const auto p = split(t, ':');
    if (p.size() != 3) throw ValidationError("grid: expected lo:hi:points");
    return linear_grid(parse_double(trim(p[0]), "grid"), parse_double(trim(p[1]), "grid"),
                       parse_int<std::size_t>(trim(p[2]), "grid"));
  }
  std::vector<double> g;
  for (const auto& part : split(t, ',')) g.push_back(parse_double(trim(part), "grid"));
  return g;
}

inline std::string default_grid(SweepAxis axis) {
  return axis == SweepAxis::InterferenceLimit ? "0.0001:0.001:10" : "0.05:0.3061:10";
}

inline std::vector<double> resolved_grid(const RunConfig& c) {
  auto g = parse_grid(c.grid.empty() ? default_grid(c.axis) : c.grid);
  if (g.empty()) throw ValidationError("grid: empty");
  for (std::size_t i = 1; i < g.size(); ++i)
    if (!(g[i] > g[i - 1])) throw ValidationError("grid: values must be strictly increasing");
  return g;
}

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

inline const std::vector<ConfigKey>& config_keys() {
  using C = RunConfig;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    auto real = [&k](std::string name, std::string help, double Scenario::*field) {
      k.push_back({name, std::move(help),
                   [field](const C& c) { return format_double(c.scenario.*field); },
                   [field, name](C& c, const std::string& v) { c.scenario.*field = parse_double(v, name); }});
    };
    auto size = [&k](std::string name, std::string help, std::size_t Scenario::*field) {
      k.push_back({name, std::move(help),
                   [field](const C& c) { return std::to_string(c.scenario.*field); },
                   [field, name](C& c, const std::string& v) {
                     c.scenario.*field = parse_int<std::size_t>(v, name);
                   }});
    };
    size("n", "CR subcarriers", &Scenario::n);
    size("l_total", "PU subchannel slots", &Scenario::l_total);
    k.push_back({"samples", "energy detector samples M",
                 [](const C& c) { return std::to_string(c.scenario.samples); },
                 [](C& c, const std::string& v) { c.scenario.samples = parse_int<int>(v, "samples"); }});
    k.push_back({"pu_blocks", "PU block sizes, comma separated",
                 [](const C& c) {
                   std::string s;
                   for (auto b : c.scenario.pu_block_sizes) s += (s.empty() ? "" : ",") + std::to_string(b);
                   return s;
                 },
                 [](C& c, const std::string& v) {
                   c.scenario.pu_block_sizes.clear();
                   for (const auto& p : split(v, ','))
                     c.scenario.pu_block_sizes.push_back(parse_int<std::size_t>(trim(p), "pu_blocks"));
                 }});
    real("avg_sr", "mean gamma of SU TX -> relay", &Scenario::avg_sr);
    real("avg_ss", "mean gamma of SU TX -> SU RX", &Scenario::avg_ss);
    real("avg_rs", "mean gamma of relay -> SU RX", &Scenario::avg_rs);
    real("other_ratio", "mean gain-to-noise ratio of links to and from the PUs", &Scenario::other_ratio);
    real("sensing_gain_mean", "mean PU -> relay gain on the sensing path", &Scenario::sensing_gain_mean);
    real("noise_var", "noise variance, W", &Scenario::noise_var);
    real("pu_power", "PU transmit power, W", &Scenario::pu_power);
    real("delta_f", "subcarrier spacing, Hz", &Scenario::delta_f);
    real("symbol_duration", "OFDM symbol duration, s", &Scenario::symbol_duration);
    size("fft_size", "periodogram size, 0 = one bin per slot", &Scenario::fft_size);
    real("alpha", "miss-detection cap", &Scenario::alpha);
    real("beta", "false-alarm cap", &Scenario::beta);
    real("interference_limit", "interference cap at the PUs, W", &Scenario::interference_limit);
    k.push_back({"weights", "rate weights: uniform or linear",
                 [](const C& c) { return std::string(c.scenario.weights == WeightProfile::Linear ? "linear" : "uniform"); },
                 [](C& c, const std::string& v) {
                   if (v == "uniform") c.scenario.weights = WeightProfile::Uniform;
                   else if (v == "linear") c.scenario.weights = WeightProfile::Linear;
                   else throw ValidationError("weights: expected uniform or linear");
                 }});
    size("trials", "Monte Carlo trials per grid point", &Scenario::trials);
    k.push_back({"seed", "root seed",
                 [](const C& c) { return std::to_string(c.scenario.seed); },
                 [](C& c, const std::string& v) { c.scenario.seed = parse_int<std::uint64_t>(v, "seed"); }});
    k.push_back({"epsilon", "solver convergence tolerance",
                 [](const C& c) { return format_double(c.solver.epsilon); },
                 [](C& c, const std::string& v) { c.solver.epsilon = parse_double(v, "epsilon"); }});
    k.push_back({"max_iters", "solver iteration cap",
                 [](const C& c) { return std::to_string(c.solver.max_iters); },
                 [](C& c, const std::string& v) { c.solver.max_iters = parse_int<int>(v, "max_iters"); }});
    k.push_back({"max_candidates", "pairings re-solved exactly after the multiplier loop",
                 [](const C& c) { return std::to_string(c.solver.max_candidates); },
                 [](C& c, const std::string& v) {
                   c.solver.max_candidates = parse_int<std::size_t>(v, "max_candidates");
                 }});
    k.push_back({"scheme", "all or a comma list of Proposed,Alternate,FixedSCP,ISS,WCR",
                 [](const C& c) { return scheme_list_text(c.schemes); },
                 [](C& c, const std::string& v) { c.schemes = parse_scheme_list(v); }});
    k.push_back({"axis", "sweep axis: interference_limit or beta",
                 [](const C& c) { return std::string(axis_name(c.axis)); },
                 [](C& c, const std::string& v) {
                   const auto a = parse_axis(v);
                   if (!a) throw ValidationError("axis: expected interference_limit or beta");
                   c.axis = *a;
                 }});
    k.push_back({"grid", "sweep grid: lo:hi:points or a comma list",
                 [](const C& c) { return c.grid.empty() ? default_grid(c.axis) : c.grid; },
                 [](C& c, const std::string& v) {
                   parse_grid(v);
                   c.grid = v;
                 }});
    k.push_back({"trial", "trial index of the instance used by solve",
                 [](const C& c) { return std::to_string(c.trial); },
                 [](C& c, const std::string& v) { c.trial = parse_int<std::size_t>(v, "trial"); }});
    k.push_back({"format", "csv or json",
                 [](const C& c) { return std::string(c.format == OutputFormat::Json ? "json" : "csv"); },
                 [](C& c, const std::string& v) {
                   if (v == "csv") c.format = OutputFormat::Csv;
                   else if (v == "json") c.format = OutputFormat::Json;
                   else throw ValidationError("format: expected csv or json");
                 }});
    k.push_back({"parallel", "worker threads",
                 [](const C& c) { return std::to_string(c.parallel); },
                 [](C& c, const std::string& v) {
                   c.parallel = parse_int<unsigned>(v, "parallel");
                   if (c.parallel == 0) throw ValidationError("parallel: must be >= 1");
                 }});
    k.push_back({"out", "output file, empty for stdout",
                 [](const C& c) { return c.out; }, [](C& c, const std::string& v) { c.out = v; }});
    k.push_back({"dump_factors", "write interference factors of the solve instance to this file",
                 [](const C& c) { return c.dump_factors; },
                 [](C& c, const std::string& v) { c.dump_factors = v; }});
    k.push_back({"verbosity", "0 quiet, 1 progress on stderr",
                 [](const C& c) { return std::to_string(c.verbosity); },
                 [](C& c, const std::string& v) { c.verbosity = parse_int<int>(v, "verbosity"); }});
    return k;
  }();
  return keys;
}

/// Keys that describe the experiment (recorded in result banners); output plumbing excluded.
inline bool is_experiment_key(std::string_view k) {
  return k != "out" && k != "dump_factors" && k != "verbosity" && k != "parallel" && k != "format";
}

inline const ConfigKey* find_key(std::string_view name) {
  for (const auto& k : config_keys())
    if (k.name == name) return &k;
  return nullptr;
}

inline void set_key(RunConfig& c, std::string_view name, const std::string& value, std::string_view origin) {
  const auto* k = find_key(name);
  if (!k) throw ValidationError(std::string(origin) + ": unknown key '" + std::string(name) + "'");
  k->set(c, trim(value));
}

/// Flat "key = value" text ('#' or ';' comments). Unknown keys and sections are rejected.
inline std::vector<std::pair<std::string, std::string>> read_config_text(std::istream& is,
                                                                         std::string_view origin) {
  CLI::ConfigTOML parser;
  std::vector<std::pair<std::string, std::string>> out;
  std::vector<CLI::ConfigItem> items;
  try {
    items = parser.from_config(is);
  } catch (const CLI::Error& e) {
    throw ValidationError(std::string(origin) + ": " + e.what());
  }
  for (const auto& item : items) {
    if (!item.parents.empty())
      throw ValidationError(std::string(origin) + ": sections are not supported ('" + item.fullname() + "')");
    if (item.name == "++" || item.name == "--") continue;  // section markers
    std::string v;
    for (const auto& in : item.inputs) v += (v.empty() ? "" : ",") + in;
    out.emplace_back(item.name, v);
  }
  return out;
}

inline void apply_config_file(RunConfig& c, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("config: cannot open '" + path + "'");
  for (const auto& [k, v] : read_config_text(f, "config " + path)) set_key(c, k, v, "config " + path);
}

inline std::string env_name(std::string_view key) {
  std::string s(kEnvPrefix);
  for (char ch : key) s.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  return s;
}

/// CRSIM_<KEY> variables. CRSIM_CONFIG names a config file and is handled by the caller.
inline void apply_environment(RunConfig& c) {
  for (char** e = environ; e && *e; ++e) {
    const std::string_view entry(*e);
    if (entry.substr(0, kEnvPrefix.size()) != kEnvPrefix) continue;
    const auto eq = entry.find('=');
    const auto name = entry.substr(0, eq);
    if (name == "CRSIM_CONFIG") continue;
    const ConfigKey* key = nullptr;
    for (const auto& k : config_keys())
      if (env_name(k.name) == name) key = &k;
    if (!key) throw ValidationError("environment: unknown variable " + std::string(name));
    key->set(c, trim(eq == entry.npos ? std::string_view{} : entry.substr(eq + 1)));
  }
}

/// Resolved configuration as sorted key/value pairs.
inline std::map<std::string, std::string> config_entries(const RunConfig& c, bool experiment_only = true) {
  std::map<std::string, std::string> m;
  for (const auto& k : config_keys())
    if (!experiment_only || is_experiment_key(k.name)) m[k.name] = k.get(c);
  return m;
}

inline void validate_config(const RunConfig& c) {
  c.scenario.validate();
  c.solver.validate();
  if (c.schemes.empty()) throw ValidationError("scheme: none selected");
  resolved_grid(c);
}

}  // namespace crsim
