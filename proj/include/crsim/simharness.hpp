#pragma once

// Monte Carlo engine: random PU block placement, Rayleigh link draws, all schemes per trial,
// paired (common random number) sweeps and their aggregation.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "crsim/allocator.hpp"
#include "crsim/channel.hpp"
#include "crsim/errors.hpp"
#include "crsim/interference.hpp"
#include "crsim/problem.hpp"
#include "crsim/schemes.hpp"

namespace crsim {

enum class WeightProfile { Uniform, Linear };
enum class SweepAxis { InterferenceLimit, Beta };

inline std::string_view axis_name(SweepAxis a) {
  return a == SweepAxis::InterferenceLimit ? "interference_limit" : "beta";
}

inline std::optional<SweepAxis> parse_axis(std::string_view s) {
  if (s == "interference_limit" || s == "pi" || s == "interference") return SweepAxis::InterferenceLimit;
  if (s == "beta" || s == "false_alarm_bound") return SweepAxis::Beta;
  return std::nullopt;
}

struct Scenario {
  std::size_t n = 16;
  std::size_t l_total = 48;
  int samples = 32;
  std::vector<std::size_t> pu_block_sizes{20, 12, 16};
  double avg_sr = 8.0;  // mean gain-to-noise-plus-interference ratios of the SU links
  double avg_ss = 3.0;
  double avg_rs = 8.0;
  double other_ratio = 3.0;        // same ratio for the links between CR nodes and PUs
  double sensing_gain_mean = 1.0;  // E|h^(pr)|^2 on the relay's sensing path
  double noise_var = 1e-5;
  double pu_power = 5e-3;
  double delta_f = 0.15625e6;
  double symbol_duration = 7e-6;
  std::size_t fft_size = 0;  // 0: one bin per slot over the whole band (n + l_total)
  double alpha = 0.2;
  double beta = 0.3061;
  double interference_limit = 1e-3;
  WeightProfile weights = WeightProfile::Uniform;
  std::size_t trials = 200;
  std::uint64_t seed = 1;

  std::size_t pu_subchannels() const {
    return std::accumulate(pu_block_sizes.begin(), pu_block_sizes.end(), std::size_t{0});
  }
  std::size_t slots() const { return n + l_total; }
  std::size_t fft() const { return fft_size ? fft_size : slots(); }

  SensingParams sensing() const { return SensingParams{samples, noise_var, alpha, beta}; }

  void validate() const {
    auto bad = [](const std::string& w) { throw ValidationError("scenario: " + w); };
    if (n < 1) bad("n must be >= 1");
    if (pu_subchannels() > l_total) bad("PU blocks exceed l_total");
    for (auto b : pu_block_sizes)
      if (b == 0) bad("empty PU block");
    for (double v : {avg_sr, avg_ss, avg_rs, other_ratio, sensing_gain_mean, noise_var, delta_f,
                     symbol_duration, interference_limit})
      if (!(v > 0.0) || !std::isfinite(v)) bad("parameters must be positive");
    if (!(pu_power >= 0.0)) bad("PU power must be >= 0");
    if (trials < 1) bad("trials must be >= 1");
    sensing().validate();
  }
};

// random stream purposes within a trial
inline constexpr std::uint64_t kLayoutStream = 1;
inline constexpr std::uint64_t kSuGainStream = 2;
inline constexpr std::uint64_t kPuGainStream = 3;
inline constexpr std::uint64_t kSensingStream = 4;
inline constexpr std::uint64_t kSolverSeedStream = 5;

struct TrialInstance {
  ProblemInstance instance;
  std::vector<long> cr_slots;
  std::vector<long> pu_slots;
  double relay_fraction = 0.0;  // share of diagonal pairs in relay mode
  std::uint64_t solver_seed = 0;
};

/// Builds per-trial instances. Everything random depends only on (seed, trial), so every
/// sweep point and every scheme sees the same channel draws.
class TrialFactory {
 public:
  explicit TrialFactory(Scenario sc)
      : sc_((sc.validate(), std::move(sc))),
        table_(sc_.delta_f, sc_.symbol_duration, sc_.fft(), sc_.pu_power) {}

  const Scenario& scenario() const noexcept { return sc_; }
  const SlotLeakageTable& leakage() const noexcept { return table_; }

  TrialInstance make(std::uint64_t trial, double interference_limit, double beta) const {
    const auto& sc = sc_;
    TrialInstance t;
    layout(trial, t.cr_slots, t.pu_slots);
    const std::size_t n = sc.n;
    const std::size_t L = t.pu_slots.size();

    RandomStream pu_rng(sc.seed, trial, kPuGainStream);
    std::vector<double> h_ps(L, 0.0), h_pr(L, 0.0), h_sp(L), h_rp(L);
    const double sig2 = sc.noise_var;
    if (sc.pu_power > 0.0) {
      // PU signal arrives at the CR receivers with mean SNR other_ratio
      h_ps = sample_rayleigh(sc.other_ratio * sig2 / sc.pu_power, L, pu_rng);
      h_pr = sample_rayleigh(sc.other_ratio * sig2 / sc.pu_power, L, pu_rng);
    }
    h_sp = sample_rayleigh(sc.other_ratio * sig2, L, pu_rng);
    h_rp = sample_rayleigh(sc.other_ratio * sig2, L, pu_rng);

    InstanceInputs in;
    in.j_ps.assign(n, 0.0);
    in.j_pr.assign(n, 0.0);
    in.phi_s = Matrix<double>(n, L, 0.0);
    in.phi_r = Matrix<double>(n, L, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < L; ++l) {
        const long d = t.cr_slots[i] - t.pu_slots[l];
        const double j_unit = table_.pu_to_cr(d);
        const double phi_unit = table_.cr_to_pu(d);
        in.j_ps[i] += h_ps[l] * j_unit;
        in.j_pr[i] += h_pr[l] * j_unit;
        in.phi_s(i, l) = h_sp[l] * phi_unit;
        in.phi_r(i, l) = h_rp[l] * phi_unit;
      }

    // SU links: the ratio itself is Rayleigh with the scenario mean
    RandomStream su_rng(sc.seed, trial, kSuGainStream);
    const auto g_ss = sample_rayleigh(sc.avg_ss, n, su_rng);
    const auto g_sr = sample_rayleigh(sc.avg_sr, n, su_rng);
    const auto g_rs = sample_rayleigh(sc.avg_rs, n, su_rng);
    LinkGains gains{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
      gains.ss[i] = g_ss[i] * (sig2 + in.j_ps[i]);
      gains.sr[i] = g_sr[i] * (sig2 + in.j_pr[i]);
      gains.rs[i] = g_rs[i] * (sig2 + in.j_ps[i]);
    }
    in.ratios = compute_ratios(gains, sig2, in.j_ps, in.j_pr);

    RandomStream sense_rng(sc.seed, trial, kSensingStream);
    const auto h_sense = sample_rayleigh(sc.sensing_gain_mean, n, sense_rng);
    in.pu_rx_power.resize(n);
    for (std::size_t i = 0; i < n; ++i) in.pu_rx_power[i] = sc.pu_power * h_sense[i];

    in.rho = sc.weights == WeightProfile::Linear ? linear_weights(n) : uniform_weights(n);
    in.interference_limit = interference_limit;
    in.sensing = sc.sensing();
    in.sensing.false_alarm_bound = beta;
    t.instance = build_instance(std::move(in));

    std::size_t relay = 0;
    for (std::size_t i = 0; i < n; ++i) relay += t.instance.links(i, i).mode == LinkMode::Relay;
    t.relay_fraction = static_cast<double>(relay) / static_cast<double>(n);
    RandomStream seed_rng(sc.seed, trial, kSolverSeedStream);
    t.solver_seed = static_cast<std::uint64_t>(seed_rng.uniform() * 0x1.0p53);
    return t;
  }

  /// Random arrangement of n CR slots, the PU blocks (contiguous) and idle slots.
  void layout(std::uint64_t trial, std::vector<long>& cr, std::vector<long>& pu) const {
    const auto& sc = sc_;
    const std::size_t blocks = sc.pu_block_sizes.size();
    const std::size_t idle = sc.l_total - sc.pu_subchannels();
    // token >= 0: PU block index; -1: CR subcarrier; -2: idle slot
    std::vector<long> tokens;
    tokens.insert(tokens.end(), sc.n, -1);
    for (std::size_t b = 0; b < blocks; ++b) tokens.push_back(static_cast<long>(b));
    tokens.insert(tokens.end(), idle, -2);
    RandomStream rng(sc.seed, trial, kLayoutStream);
    for (std::size_t i = tokens.size(); i > 1; --i) std::swap(tokens[i - 1], tokens[rng.index(i)]);
    cr.clear();
    std::vector<std::vector<long>> block_slots(blocks);
    long slot = 0;
    for (long tok : tokens) {
      if (tok == -1) {
        cr.push_back(slot++);
      } else if (tok == -2) {
        ++slot;
      } else {
        for (std::size_t k = 0; k < sc.pu_block_sizes[static_cast<std::size_t>(tok)]; ++k)
          block_slots[static_cast<std::size_t>(tok)].push_back(slot++);
      }
    }
    pu.clear();
    for (const auto& b : block_slots) pu.insert(pu.end(), b.begin(), b.end());
  }

 private:
  Scenario sc_;
  SlotLeakageTable table_;
};

struct TrialOutcome {
  bool feasible = true;
  std::string reason;  // why the trial was excluded
  std::array<std::optional<Metrics>, kAllSchemes.size()> metrics;
  std::array<int, kAllSchemes.size()> iterations{};
  std::array<bool, kAllSchemes.size()> converged{};
  double relay_fraction = 0.0;
};

inline std::size_t scheme_index(SchemeId id) { return static_cast<std::size_t>(id); }

/// Runs the selected schemes on one trial instance. A trial is excluded (for every scheme)
/// when any scheme reports the instance infeasible or returns an allocation that breaks a
/// constraint it is responsible for.
inline TrialOutcome run_trial(const TrialInstance& t, std::span<const SchemeId> schemes,
                              SolverConfig cfg = {}) {
  TrialOutcome out;
  out.relay_fraction = t.relay_fraction;
  cfg.seed = t.solver_seed;
  for (auto id : schemes) {
    try {
      const auto r = solve_scheme(id, t.instance, cfg);
      auto rep = check_feasibility(r.allocation, t.instance);
      if (!scheme_optimizes_sensing(id)) {
        // fixed-threshold baselines are not held to the sensing caps
        std::erase_if(rep.violations, [](const std::string& v) { return v.rfind("sensing", 0) == 0; });
      }
      if (!rep.ok()) {
        out.feasible = false;
        out.reason = std::string(scheme_name(id)) + ": " + rep.violations.front();
        break;
      }
      out.metrics[scheme_index(id)] = r.metrics;
      out.iterations[scheme_index(id)] = r.diagnostics.iterations;
      out.converged[scheme_index(id)] = r.diagnostics.converged;
    } catch (const InfeasibleInstanceError& e) {
      out.feasible = false;
      out.reason = std::string(scheme_name(id)) + ": " + e.what();
      break;
    }
  }
  if (!out.feasible)
    for (auto& m : out.metrics) m.reset();
  return out;
}

struct MetricSummary {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

inline MetricSummary summarize(std::span<const double> xs) {
  MetricSummary s;
  s.n = xs.size();
  if (s.n == 0) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(s.n);
  if (s.n >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stderr_ = std::sqrt(ss / static_cast<double>(s.n - 1) / static_cast<double>(s.n));
  }
  return s;
}

struct AggregateRow {
  SchemeId scheme = SchemeId::Proposed;
  double sweep_value = 0.0;
  MetricSummary throughput;
  MetricSummary sum_rate;
  MetricSummary relay_power;
  double feasibility = 0.0;  // fraction of trials kept
  std::size_t trials = 0;    // trials attempted
};

struct SweepResult {
  SweepAxis axis = SweepAxis::InterferenceLimit;
  std::vector<double> grid;
  std::vector<SchemeId> schemes;
  std::vector<std::vector<TrialOutcome>> outcomes;  // [grid point][trial]
  std::vector<AggregateRow> rows;                   // grid-major, then scheme order

  /// Per-trial metric of one scheme at one grid point (feasible trials only, trial order).
  std::vector<double> values(std::size_t point, SchemeId id, double Metrics::*field) const {
    std::vector<double> v;
    for (const auto& o : outcomes.at(point))
      if (o.feasible && o.metrics[scheme_index(id)]) v.push_back((*o.metrics[scheme_index(id)]).*field);
    return v;
  }

  const AggregateRow& row(std::size_t point, SchemeId id) const {
    for (const auto& r : rows)
      if (r.scheme == id && r.sweep_value == grid.at(point)) return r;
    throw ValidationError("sweep result: no such row");
  }
};

struct SweepOptions {
  SweepAxis axis = SweepAxis::InterferenceLimit;
  std::vector<double> grid;
  std::vector<SchemeId> schemes{kAllSchemes.begin(), kAllSchemes.end()};
  SolverConfig solver;
  unsigned parallel = 1;
};

inline std::vector<AggregateRow> aggregate(const SweepResult& r) {
  std::vector<AggregateRow> rows;
  for (std::size_t p = 0; p < r.grid.size(); ++p) {
    std::size_t kept = 0;
    for (const auto& o : r.outcomes[p]) kept += o.feasible;
    for (auto id : r.schemes) {
      AggregateRow row;
      row.scheme = id;
      row.sweep_value = r.grid[p];
      row.trials = r.outcomes[p].size();
      row.feasibility = row.trials ? static_cast<double>(kept) / static_cast<double>(row.trials) : 0.0;
      row.throughput = summarize(r.values(p, id, &Metrics::throughput));
      row.sum_rate = summarize(r.values(p, id, &Metrics::sum_rate));
      row.relay_power = summarize(r.values(p, id, &Metrics::relay_power));
      rows.push_back(row);
    }
  }
  return rows;
}

/// Paired sweep: trial t uses the same draws at every grid point and for every scheme.
/// Trials may run on several threads; results are stored by index, so the output does not
/// depend on scheduling.
inline SweepResult sweep(const Scenario& sc, const SweepOptions& opt) {
  if (opt.grid.empty()) throw ValidationError("sweep: grid must be nonempty");
  for (std::size_t i = 1; i < opt.grid.size(); ++i)
    if (!(opt.grid[i] > opt.grid[i - 1])) throw ValidationError("sweep: grid must be increasing");
  if (opt.schemes.empty()) throw ValidationError("sweep: no schemes selected");
  const TrialFactory factory(sc);
  SweepResult r;
  r.axis = opt.axis;
  r.grid = opt.grid;
  r.schemes = opt.schemes;
  r.outcomes.assign(opt.grid.size(), std::vector<TrialOutcome>(sc.trials));

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= sc.trials) return;
      try {
        for (std::size_t p = 0; p < opt.grid.size(); ++p) {
          const double pi = opt.axis == SweepAxis::InterferenceLimit ? opt.grid[p] : sc.interference_limit;
          const double beta = opt.axis == SweepAxis::Beta ? opt.grid[p] : sc.beta;
          const auto inst = factory.make(t, pi, beta);
          r.outcomes[p][t] = run_trial(inst, opt.schemes, opt.solver);
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = sc.trials;
        return;
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(opt.parallel, static_cast<unsigned>(sc.trials)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  r.rows = aggregate(r);
  return r;
}

/// Evenly spaced grid, inclusive of both ends.
inline std::vector<double> linear_grid(double lo, double hi, std::size_t points) {
  if (points == 0) throw ValidationError("grid: need at least one point");
  if (points == 1) return {lo};
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i)
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  g.back() = hi;
  return g;
}

}  // namespace crsim
