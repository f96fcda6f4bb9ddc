#pragma once

// Command-line front end: solve, sweep, oracle and validate.
//
// Exit status: 0 success, 1 oracle gap above 2%, 2 usage or configuration error,
// 3 infeasible instance, 4 result file fails validation, 5 internal error.
// Failures print one JSON object on stderr: {"error": kind, "message": text}.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "crsim/allocator.hpp"
#include "crsim/config.hpp"
#include "crsim/errors.hpp"
#include "crsim/problem.hpp"
#include "crsim/schemes.hpp"
#include "crsim/simharness.hpp"

namespace crsim {

enum ExitCode : int {
  kExitOk = 0,
  kExitOracleGap = 1,
  kExitUsage = 2,
  kExitInfeasible = 3,
  kExitInvalid = 4,
  kExitInternal = 5,
};

inline constexpr double kOracleGapLimit = 0.02;

/// Column order of the sweep CSV (long format, one metric per row).
inline constexpr std::array<std::string_view, 7> kSweepColumns{
    "scheme", "sweep_axis", "sweep_value", "metric", "mean", "stderr", "n"};
inline constexpr std::array<std::string_view, 4> kSweepMetrics{"throughput", "sum_rate", "relay_power",
                                                               "feasibility"};

// ---------------------------------------------------------------------------------------
// Writers
// ---------------------------------------------------------------------------------------

inline void write_banner(std::ostream& os, std::string_view kind, const RunConfig& c) {
  os << "# crsim version=" << kVersion << "\n";
  os << "# kind=" << kind << "\n";
  for (const auto& [k, v] : config_entries(c)) os << "# " << k << "=" << v << "\n";
}

inline nlohmann::ordered_json banner_json(std::string_view kind, const RunConfig& c) {
  nlohmann::ordered_json j;
  j["version"] = kVersion;
  j["kind"] = kind;
  for (const auto& [k, v] : config_entries(c)) j["config"][k] = v;
  return j;
}

struct SweepRecord {
  std::string scheme;
  std::string axis;
  double sweep_value = 0.0;
  std::string metric;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

inline std::vector<SweepRecord> sweep_records(const SweepResult& r) {
  std::vector<SweepRecord> recs;
  const std::string axis(axis_name(r.axis));
  for (const auto& row : r.rows) {
    const std::string s(scheme_name(row.scheme));
    auto add = [&](std::string_view metric, const MetricSummary& m) {
      recs.push_back({s, axis, row.sweep_value, std::string(metric), m.mean, m.stderr_, m.n});
    };
    add("throughput", row.throughput);
    add("sum_rate", row.sum_rate);
    add("relay_power", row.relay_power);
    recs.push_back({s, axis, row.sweep_value, "feasibility", row.feasibility, 0.0, row.trials});
  }
  return recs;
}

inline void write_sweep_csv(std::ostream& os, const RunConfig& c, const SweepResult& r) {
  write_banner(os, "sweep", c);
  for (std::size_t i = 0; i < kSweepColumns.size(); ++i) os << (i ? "," : "") << kSweepColumns[i];
  os << "\n";
  for (const auto& rec : sweep_records(r))
    os << rec.scheme << "," << rec.axis << "," << format_double(rec.sweep_value) << "," << rec.metric << ","
       << format_double(rec.mean) << "," << format_double(rec.stderr_) << "," << rec.n << "\n";
}

inline void write_sweep_json(std::ostream& os, const RunConfig& c, const SweepResult& r) {
  auto j = banner_json("sweep", c);
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& rec : sweep_records(r))
    j["rows"].push_back({{"scheme", rec.scheme},
                         {"sweep_axis", rec.axis},
                         {"sweep_value", rec.sweep_value},
                         {"metric", rec.metric},
                         {"mean", rec.mean},
                         {"stderr", rec.stderr_},
                         {"n", rec.n}});
  os << j.dump(2) << "\n";
}

/// Allocation as long-format records: q (every entry), power (nonzero entries), lambda (per i).
inline void write_allocation_csv(std::ostream& os, const RunConfig& c, SchemeId id, const SolveResult& r) {
  RunConfig one = c;
  one.schemes = {id};
  write_banner(os, "allocation", one);
  os << "# direct_only=" << (r.allocation.direct_only ? 1 : 0) << "\n";
  os << "# floor_enforced=" << (r.allocation.floor_enforced ? 1 : 0) << "\n";
  os << "record,i,j,value\n";
  const auto& a = r.allocation;
  const std::size_t n = a.n();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) os << "q," << i << "," << j << "," << int(a.pairs(i, j)) << "\n";
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (a.power(i, j) != 0.0) os << "power," << i << "," << j << "," << format_double(a.power(i, j)) << "\n";
  for (std::size_t i = 0; i < n; ++i) os << "lambda," << i << ",," << format_double(a.thresholds.lambda[i]) << "\n";
}

inline nlohmann::ordered_json allocation_json(const RunConfig& c, SchemeId id, const SolveResult& r) {
  RunConfig one = c;
  one.schemes = {id};
  auto j = banner_json("allocation", one);
  const auto& a = r.allocation;
  const std::size_t n = a.n();
  j["direct_only"] = a.direct_only;
  j["floor_enforced"] = a.floor_enforced;
  std::vector<int> perm(n, -1);
  std::vector<std::vector<double>> power(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t jj = 0; jj < n; ++jj) {
      if (a.pairs(i, jj)) perm[i] = static_cast<int>(jj);
      power[i][jj] = a.power(i, jj);
    }
  j["pairs"] = perm;
  j["power"] = power;
  j["lambda"] = a.thresholds.lambda;
  j["metrics"] = {{"throughput", r.metrics.throughput},
                  {"sum_rate", r.metrics.sum_rate},
                  {"relay_power", r.metrics.relay_power}};
  const auto& d = r.diagnostics;
  j["diagnostics"] = {{"iterations", d.iterations}, {"converged", d.converged}, {"fallback", d.fallback},
                      {"eta", d.eta},               {"kappa", d.kappa},         {"slack_s", d.slack_s},
                      {"slack_r", d.slack_r},       {"kkt_s", d.kkt_s},         {"kkt_r", d.kkt_r}};
  return j;
}

inline void write_factors_csv(std::ostream& os, const RunConfig& c, const ProblemInstance& inst) {
  write_banner(os, "factors", c);
  os << "record,i,l,value\n";
  const auto& f = inst.factors;
  for (std::size_t i = 0; i < inst.n; ++i) os << "j_ps," << i << ",," << format_double(f.j_ps[i]) << "\n";
  for (std::size_t i = 0; i < inst.n; ++i) os << "j_pr," << i << ",," << format_double(f.j_pr[i]) << "\n";
  auto mat = [&](std::string_view name, const Matrix<double>& m) {
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t l = 0; l < m.cols(); ++l)
        os << name << "," << i << "," << l << "," << format_double(m(i, l)) << "\n";
  };
  mat("phi_s", f.phi_s);
  mat("phi_r", f.phi_r);
  mat("eff_s", f.eff_s);
  mat("eff_r", f.eff_r);
}

// ---------------------------------------------------------------------------------------
// Reading results back
// ---------------------------------------------------------------------------------------

struct ResultFile {
  std::string kind;
  std::map<std::string, std::string> meta;  // banner entries except version/kind
  std::string version;
  std::vector<std::vector<std::string>> rows;  // CSV body, header first
  std::optional<nlohmann::json> json;
};

inline ResultFile read_result(std::istream& is) {
  std::stringstream buf;
  buf << is.rdbuf();
  const std::string text = buf.str();
  ResultFile rf;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("format: invalid JSON: ") + e.what());
    }
    if (!j.contains("kind") || !j["kind"].is_string()) throw ValidationError("format: missing kind");
    rf.kind = j["kind"].get<std::string>();
    rf.version = j.value("version", "");
    if (j.contains("config") && j["config"].is_object())
      for (const auto& [k, v] : j["config"].items()) rf.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
    rf.json = std::move(j);
    return rf;
  }
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto body = trim(std::string_view(line).substr(1));
      if (body.rfind("crsim ", 0) == 0) body = trim(std::string_view(body).substr(6));
      const auto eq = body.find('=');
      if (eq == std::string::npos) continue;
      const auto k = body.substr(0, eq), v = body.substr(eq + 1);
      if (k == "kind") rf.kind = v;
      else if (k == "version") rf.version = v;
      else rf.meta[k] = v;
      continue;
    }
    rf.rows.push_back(split(line, ','));
  }
  return rf;
}

/// Rebuilds the configuration recorded in a banner.
inline RunConfig config_from_meta(const std::map<std::string, std::string>& meta,
                                  std::vector<std::string>& problems) {
  RunConfig c;
  for (const auto& [k, v] : meta) {
    if (k == "direct_only" || k == "floor_enforced") continue;
    try {
      set_key(c, k, v, "banner");
    } catch (const ValidationError& e) {
      problems.push_back(std::string("banner: ") + e.what());
    }
  }
  return c;
}

/// Checks a sweep result. Returns the violated invariants (empty when valid).
inline std::vector<std::string> validate_sweep(const ResultFile& rf) {
  std::vector<std::string> bad;
  std::vector<SweepRecord> recs;
  if (rf.json) {
    const auto& j = *rf.json;
    if (!j.contains("rows") || !j["rows"].is_array()) return {"schema: rows array missing"};
    std::size_t idx = 0;
    for (const auto& row : j["rows"]) {
      ++idx;
      try {
        recs.push_back({row.at("scheme").get<std::string>(), row.at("sweep_axis").get<std::string>(),
                        row.at("sweep_value").get<double>(), row.at("metric").get<std::string>(),
                        row.at("mean").get<double>(), row.at("stderr").get<double>(),
                        row.at("n").get<std::size_t>()});
      } catch (const nlohmann::json::exception&) {
        bad.push_back("schema: row " + std::to_string(idx) + " has missing or mistyped fields");
      }
    }
  } else {
    if (rf.rows.empty()) return {"schema: no header"};
    std::vector<std::string> header(kSweepColumns.begin(), kSweepColumns.end());
    if (rf.rows[0] != header) return {"schema: header must be scheme,sweep_axis,sweep_value,metric,mean,stderr,n"};
    for (std::size_t r = 1; r < rf.rows.size(); ++r) {
      const auto& f = rf.rows[r];
      const std::string where = "row " + std::to_string(r);
      if (f.size() != kSweepColumns.size()) {
        bad.push_back("schema: " + where + " has " + std::to_string(f.size()) + " fields");
        continue;
      }
      try {
        recs.push_back({f[0], f[1], parse_double(f[2], "sweep_value"), f[3], parse_double(f[4], "mean"),
                        parse_double(f[5], "stderr"), parse_int<std::size_t>(f[6], "n")});
      } catch (const ValidationError& e) {
        bad.push_back("schema: " + where + ": " + e.what());
      }
    }
  }
  std::vector<std::string> problems;
  const RunConfig c = config_from_meta(rf.meta, problems);
  bad.insert(bad.end(), problems.begin(), problems.end());
  std::vector<double> grid;
  try {
    grid = resolved_grid(c);
  } catch (const ValidationError& e) {
    bad.push_back(std::string("banner: ") + e.what());
  }

  std::map<std::pair<std::string, double>, std::map<std::string, SweepRecord>> groups;
  for (std::size_t r = 0; r < recs.size(); ++r) {
    const auto& x = recs[r];
    const std::string where = "row " + std::to_string(r + 1);
    const auto id = parse_scheme(x.scheme);
    if (!id) bad.push_back("scheme: " + where + " unknown scheme '" + x.scheme + "'");
    else if (std::find(c.schemes.begin(), c.schemes.end(), *id) == c.schemes.end())
      bad.push_back("scheme: " + where + " scheme not selected in the banner");
    if (x.axis != axis_name(c.axis)) bad.push_back("axis: " + where + " does not match the banner axis");
    if (std::find(grid.begin(), grid.end(), x.sweep_value) == grid.end())
      bad.push_back("grid: " + where + " sweep_value not on the banner grid");
    if (std::find(kSweepMetrics.begin(), kSweepMetrics.end(), x.metric) == kSweepMetrics.end())
      bad.push_back("metric: " + where + " unknown metric '" + x.metric + "'");
    if (!std::isfinite(x.mean) || !std::isfinite(x.stderr_)) bad.push_back("value: " + where + " non-finite");
    if (x.stderr_ < 0.0) bad.push_back("value: " + where + " negative stderr");
    if (x.n > c.scenario.trials) bad.push_back("count: " + where + " n exceeds the trial count");
    if (x.metric == "feasibility" && (x.mean < 0.0 || x.mean > 1.0))
      bad.push_back("value: " + where + " feasibility outside [0, 1]");
    if ((x.metric == "throughput" || x.metric == "sum_rate" || x.metric == "relay_power") && x.mean < 0.0)
      bad.push_back("value: " + where + " negative " + x.metric);
    auto& g = groups[{x.scheme, x.sweep_value}];
    if (g.count(x.metric)) bad.push_back("duplicate: " + where + " repeats " + x.metric);
    g[x.metric] = x;
  }
  for (const auto& [key, g] : groups) {
    const std::string where = key.first + " at " + format_double(key.second);
    for (auto m : kSweepMetrics)
      if (!g.count(std::string(m))) bad.push_back("missing: " + where + " lacks " + std::string(m));
    if (g.count("throughput") && g.count("sum_rate") &&
        g.at("throughput").mean > g.at("sum_rate").mean * (1.0 + 1e-12) + 1e-12)
      bad.push_back("value: " + where + " throughput exceeds sum rate");
  }
  if (!grid.empty() && bad.empty())
    if (groups.size() != grid.size() * c.schemes.size())
      bad.push_back("missing: expected every selected scheme at every grid point");
  return bad;
}

/// Checks an allocation against the instance its banner describes.
inline std::vector<std::string> validate_allocation(const ResultFile& rf) {
  std::vector<std::string> bad;
  const RunConfig c = config_from_meta(rf.meta, bad);
  if (!bad.empty()) return bad;
  if (c.schemes.size() != 1) return {"banner: allocation must name exactly one scheme"};
  const SchemeId id = c.schemes.front();
  TrialInstance t;
  try {
    t = TrialFactory(c.scenario).make(c.trial, c.scenario.interference_limit, c.scenario.beta);
  } catch (const ValidationError& e) {
    return {std::string("banner: ") + e.what()};
  }
  const std::size_t n = t.instance.n;
  Allocation a;
  a.pairs = PairingMatrix(n, n, 0);
  a.power = Matrix<double>(n, n, 0.0);
  a.thresholds.lambda.assign(n, std::numeric_limits<double>::quiet_NaN());
  auto index = [&](const std::string& s, const std::string& where) -> std::optional<std::size_t> {
    try {
      const auto v = parse_int<std::size_t>(s, "index");
      if (v < n) return v;
    } catch (const ValidationError&) {
    }
    bad.push_back("schema: " + where + " index out of range");
    return std::nullopt;
  };

  if (rf.json) {
    const auto& j = *rf.json;
    a.direct_only = j.value("direct_only", false);
    a.floor_enforced = j.value("floor_enforced", true);
    try {
      const auto perm = j.at("pairs").get<std::vector<int>>();
      const auto power = j.at("power").get<std::vector<std::vector<double>>>();
      const auto lambda = j.at("lambda").get<std::vector<double>>();
      if (perm.size() != n || power.size() != n || lambda.size() != n) return {"shape: allocation size does not match n"};
      for (std::size_t i = 0; i < n; ++i) {
        if (perm[i] >= 0 && static_cast<std::size_t>(perm[i]) < n) a.pairs(i, static_cast<std::size_t>(perm[i])) = 1;
        if (power[i].size() != n) return {"shape: power row size does not match n"};
        for (std::size_t k = 0; k < n; ++k) a.power(i, k) = power[i][k];
        a.thresholds.lambda[i] = lambda[i];
      }
    } catch (const nlohmann::json::exception&) {
      return {"schema: pairs, power and lambda are required"};
    }
  } else {
    a.direct_only = rf.meta.count("direct_only") && rf.meta.at("direct_only") == "1";
    a.floor_enforced = !rf.meta.count("floor_enforced") || rf.meta.at("floor_enforced") == "1";
    if (rf.rows.empty() || rf.rows[0] != std::vector<std::string>{"record", "i", "j", "value"})
      return {"schema: header must be record,i,j,value"};
    for (std::size_t r = 1; r < rf.rows.size(); ++r) {
      const auto& f = rf.rows[r];
      const std::string where = "row " + std::to_string(r);
      if (f.size() != 4) {
        bad.push_back("schema: " + where + " needs 4 fields");
        continue;
      }
      double v = 0.0;
      try {
        v = parse_double(f[3], "value");
      } catch (const ValidationError& e) {
        bad.push_back("schema: " + where + ": " + e.what());
        continue;
      }
      const auto i = index(f[1], where);
      if (!i) continue;
      if (f[0] == "lambda") {
        a.thresholds.lambda[*i] = v;
        continue;
      }
      const auto jj = index(f[2], where);
      if (!jj) continue;
      if (f[0] == "q") {
        if (v != 0.0 && v != 1.0) bad.push_back("pairing: " + where + " q entry is not 0 or 1");
        a.pairs(*i, *jj) = v != 0.0;
      } else if (f[0] == "power") {
        a.power(*i, *jj) = v;
      } else {
        bad.push_back("schema: " + where + " unknown record '" + f[0] + "'");
      }
    }
  }
  for (double l : a.thresholds.lambda)
    if (std::isnan(l)) {
      bad.push_back("schema: a threshold is missing");
      break;
    }
  if (!bad.empty()) return bad;
  auto rep = check_feasibility(a, t.instance);
  if (!scheme_optimizes_sensing(id))
    std::erase_if(rep.violations, [](const std::string& v) { return v.rfind("sensing", 0) == 0; });
  return rep.violations;
}

// ---------------------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------------------

struct CliError {
  int code;
  std::string kind;
  std::string message;
};

class OutputSink {
 public:
  OutputSink(const std::string& path, std::ostream& fallback) {
    if (path.empty() || path == "-") {
      os_ = &fallback;
    } else {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw CliError{kExitUsage, "io", "cannot open output file '" + path + "'"};
      os_ = file_.get();
    }
  }
  std::ostream& stream() { return *os_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_ = nullptr;
};

inline void print_solution_summary(std::ostream& os, SchemeId id, const SolveResult& r,
                                   const ProblemInstance& inst) {
  const auto& a = r.allocation;
  const auto& d = r.diagnostics;
  const auto pf = false_alarm_probs(a.thresholds, inst.sensing);
  const auto pd = detection_probs(a.thresholds, inst.sensing, inst.pu_rx_power);
  os << "scheme " << scheme_name(id) << "\n";
  os << "throughput " << format_double(r.metrics.throughput) << "\n";
  os << "sum_rate " << format_double(r.metrics.sum_rate) << "\n";
  os << "relay_power " << format_double(r.metrics.relay_power) << "\n";
  os << "iterations " << d.iterations << (d.converged ? " converged" : " not-converged") << "\n";
  os << "interference_su " << format_double(d.usage.s) << " of " << format_double(inst.interference_limit)
     << " (slack " << format_double(d.slack_s) << ")\n";
  os << "interference_relay " << format_double(d.usage.r) << " of " << format_double(inst.interference_limit)
     << " (slack " << format_double(d.slack_r) << ")\n";
  os << "multipliers eta=" << format_double(d.eta) << " kappa=" << format_double(d.kappa) << "\n";
  os << "kkt_residual su=" << format_double(d.kkt_s) << " relay=" << format_double(d.kkt_r) << "\n";
  os << "i,j,mode,power,gamma_power,lambda,p_f,p_d\n";
  for (std::size_t i = 0; i < a.n(); ++i) {
    std::size_t j = 0;
    while (j < a.n() && !a.pairs(i, j)) ++j;
    if (j == a.n()) continue;
    const auto link = pair_link(a, inst, i, j);
    os << i << "," << j << "," << (link.mode == LinkMode::Relay ? "relay" : "direct") << ","
       << format_double(a.power(i, j)) << "," << format_double(link.gamma * a.power(i, j)) << ","
       << format_double(a.thresholds.lambda[i]) << "," << format_double(pf[i]) << "," << format_double(pd[i])
       << "\n";
  }
}

inline int cmd_solve(const RunConfig& c, std::ostream& out) {
  if (c.schemes.size() != 1) throw CliError{kExitUsage, "usage", "solve needs exactly one --scheme"};
  const SchemeId id = c.schemes.front();
  const TrialFactory factory(c.scenario);
  const auto t = factory.make(c.trial, c.scenario.interference_limit, c.scenario.beta);
  if (!c.dump_factors.empty()) {
    OutputSink f(c.dump_factors, out);
    write_factors_csv(f.stream(), c, t.instance);
  }
  SolverConfig cfg = c.solver;
  cfg.seed = t.solver_seed;
  SolveResult r;
  try {
    r = solve_scheme(id, t.instance, cfg);
  } catch (const InfeasibleInstanceError& e) {
    throw CliError{kExitInfeasible, "infeasible", e.what()};
  }
  if (c.out.empty()) {
    if (c.format == OutputFormat::Json) out << allocation_json(c, id, r).dump(2) << "\n";
    else print_solution_summary(out, id, r, t.instance);
    return kExitOk;
  }
  OutputSink sink(c.out, out);
  if (c.format == OutputFormat::Json) sink.stream() << allocation_json(c, id, r).dump(2) << "\n";
  else write_allocation_csv(sink.stream(), c, id, r);
  print_solution_summary(out, id, r, t.instance);
  return kExitOk;
}

inline int cmd_sweep(const RunConfig& c, std::ostream& out, std::ostream& err) {
  SweepOptions opt;
  opt.axis = c.axis;
  opt.grid = resolved_grid(c);
  opt.schemes = c.schemes;
  opt.solver = c.solver;
  opt.parallel = c.parallel;
  if (c.verbosity > 0)
    err << "sweep: " << opt.grid.size() << " points x " << c.scenario.trials << " trials\n";
  const auto r = sweep(c.scenario, opt);
  OutputSink sink(c.out, out);
  if (c.format == OutputFormat::Json) write_sweep_json(sink.stream(), c, r);
  else write_sweep_csv(sink.stream(), c, r);
  return kExitOk;
}

/// Joint solver against exhaustive search on scenario instances with n <= 4. Reports the
/// gap to the optimum at the false-alarm-floor thresholds (the solver chooses its own
/// thresholds) and the gap when the solver is held to the same thresholds.
inline int cmd_oracle(const RunConfig& c, std::ostream& out) {
  if (c.scenario.n > 4) throw CliError{kExitUsage, "usage", "oracle needs --n <= 4"};
  const TrialFactory factory(c.scenario);
  double worst = 0.0, worst_held = 0.0;
  std::size_t used = 0, skipped = 0;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < c.scenario.trials; ++t) {
    const auto ti = factory.make(t, c.scenario.interference_limit, c.scenario.beta);
    const auto& inst = ti.instance;
    SolverConfig cfg = c.solver;
    cfg.seed = ti.solver_seed;
    try {
      const auto floor = floor_thresholds(inst);
      const auto best = exhaustive_search(inst, floor);
      const auto free = solve_joint(inst, cfg);
      SolverConfig held_cfg = cfg;
      held_cfg.update_thresholds = false;
      held_cfg.thresholds = floor;
      const auto held = solve_joint(inst, held_cfg);
      const double opt = best.metrics.throughput;
      const double gap = opt > 0.0 ? std::max(0.0, 1.0 - free.metrics.throughput / opt) : 0.0;
      const double gap_held = opt > 0.0 ? std::max(0.0, 1.0 - held.metrics.throughput / opt) : 0.0;
      worst = std::max(worst, gap);
      worst_held = std::max(worst_held, gap_held);
      ++used;
      rows.push_back({{"trial", t},
                      {"optimum", opt},
                      {"solver", free.metrics.throughput},
                      {"solver_floor_thresholds", held.metrics.throughput},
                      {"gap", gap},
                      {"gap_floor_thresholds", gap_held}});
    } catch (const InfeasibleInstanceError&) {
      ++skipped;
    }
  }
  nlohmann::ordered_json j = banner_json("oracle", c);
  j["instances"] = used;
  j["skipped_infeasible"] = skipped;
  j["max_gap"] = worst;
  j["max_gap_floor_thresholds"] = worst_held;
  j["limit"] = kOracleGapLimit;
  j["pass"] = worst <= kOracleGapLimit;
  j["trials"] = rows;
  OutputSink sink(c.out, out);
  if (c.format == OutputFormat::Json) {
    sink.stream() << j.dump(2) << "\n";
  } else {
    sink.stream() << "trial,optimum,solver,solver_floor_thresholds,gap,gap_floor_thresholds\n";
    for (const auto& r : rows)
      sink.stream() << r["trial"].get<std::size_t>() << "," << format_double(r["optimum"].get<double>()) << ","
                    << format_double(r["solver"].get<double>()) << ","
                    << format_double(r["solver_floor_thresholds"].get<double>()) << ","
                    << format_double(r["gap"].get<double>()) << ","
                    << format_double(r["gap_floor_thresholds"].get<double>()) << "\n";
  }
  if (!c.out.empty() || c.format == OutputFormat::Csv)
    out << "oracle n=" << c.scenario.n << " instances=" << used << " skipped=" << skipped
        << " max_gap=" << format_double(worst) << " max_gap_floor_thresholds=" << format_double(worst_held)
        << (worst <= kOracleGapLimit ? " PASS" : " FAIL") << "\n";
  if (used == 0) throw CliError{kExitInfeasible, "infeasible", "oracle: every instance was infeasible"};
  return worst <= kOracleGapLimit ? kExitOk : kExitOracleGap;
}

inline int cmd_validate(const std::string& path, std::ostream& out) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CliError{kExitUsage, "io", "cannot open '" + path + "'"};
  ResultFile rf;
  try {
    rf = read_result(f);
  } catch (const ValidationError& e) {
    throw CliError{kExitInvalid, "invalid", e.what()};
  }
  std::vector<std::string> bad;
  if (rf.kind == "sweep") bad = validate_sweep(rf);
  else if (rf.kind == "allocation") bad = validate_allocation(rf);
  else bad = {"format: unknown result kind '" + rf.kind + "'"};
  if (!bad.empty()) {
    std::string msg;
    for (const auto& b : bad) msg += (msg.empty() ? "" : "; ") + b;
    throw CliError{kExitInvalid, "invalid", msg};
  }
  out << "valid " << rf.kind << " " << path << "\n";
  return kExitOk;
}

inline void print_error(std::ostream& err, const std::string& kind, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  err << j.dump() << "\n";
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Cognitive-relay OFDM resource allocation simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "flat key = value configuration file")->envname("CRSIM_CONFIG");
  struct FlagSpec {
    const char* flag;
    const char* key;
  };
  static constexpr FlagSpec specs[] = {
      {"--seed", "seed"},     {"--scheme", "scheme"},     {"--axis", "axis"},
      {"--grid", "grid"},     {"--trials", "trials"},     {"--out", "out"},
      {"--format", "format"}, {"--parallel", "parallel"}, {"--dump-factors", "dump_factors"},
      {"--n", "n"},           {"--trial", "trial"},       {"--interference-limit", "interference_limit"},
      {"--beta", "beta"},     {"--verbosity", "verbosity"}};
  std::map<std::string, std::string> flag_values;
  for (const auto& s : specs) {
    const auto* k = find_key(s.key);
    app.add_option_function<std::string>(
        s.flag, [&flag_values, key = std::string(s.key)](const std::string& v) { flag_values[key] = v; },
        k ? k->help : "");
  }
  app.add_option("--set", sets, "override any configuration key: key=value (repeatable)");

  auto* solve = app.add_subcommand("solve", "solve one instance and print the allocation");
  auto* sweep_cmd = app.add_subcommand("sweep", "paired Monte Carlo sweep over one axis");
  auto* oracle = app.add_subcommand("oracle", "compare the joint solver with exhaustive search (n <= 4)");
  auto* validate = app.add_subcommand("validate", "re-check a result file written by solve or sweep");
  std::string validate_path;
  validate->add_option("file", validate_path, "result file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return kExitUsage;
  }

  try {
    if (validate->parsed()) return cmd_validate(validate_path, out);

    RunConfig c;
    if (oracle->parsed()) {  // oracle defaults: small instances, 50 of them
      c.scenario.n = 3;
      c.scenario.trials = 50;
    }
    if (solve->parsed()) c.schemes = {SchemeId::Proposed};
    if (!config_path.empty()) apply_config_file(c, config_path);
    apply_environment(c);
    for (const auto& [k, v] : flag_values) set_key(c, k, v, "flag");
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ValidationError("--set: expected key=value, got '" + s + "'");
      set_key(c, trim(std::string_view(s).substr(0, eq)), s.substr(eq + 1), "--set");
    }
    validate_config(c);

    if (solve->parsed()) return cmd_solve(c, out);
    if (sweep_cmd->parsed()) return cmd_sweep(c, out, err);
    if (oracle->parsed()) return cmd_oracle(c, out);
    print_error(err, "usage", "no command");
    return kExitUsage;
  } catch (const CliError& e) {
    print_error(err, e.kind, e.message);
    return e.code;
  } catch (const InfeasibleInstanceError& e) {
    print_error(err, "infeasible", e.what());
    return kExitInfeasible;
  } catch (const ValidationError& e) {
    print_error(err, "usage", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    print_error(err, "internal", e.what());
    return kExitInternal;
  }
}

}  // namespace crsim
