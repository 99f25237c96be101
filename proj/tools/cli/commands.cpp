#include "cli/commands.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <thread>
#include <tuple>

#include "dbctl/datamat.hpp"
#include "dbctl/errors.hpp"
#include "dbctl/io.hpp"
#include "dbctl/lqr.hpp"
#include "dbctl/stability.hpp"

namespace dbctl::cli {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

ExperimentConfig prepare(const Invocation& inv) {
  auto cfg = load_config(inv.config);
  if (inv.seed) cfg.seed = *inv.seed;
  if (inv.out) cfg.output = *inv.out;
  if (!cfg.noise_seed_given) cfg.noise.seed = cfg.seed + 1;
  fs::create_directories(cfg.output);
  return cfg;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write '" + path.string() + "'");
  os << j.dump(2) << '\n';
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Sorted by real part, then imaginary part, for stable reports.
CVec sorted_spectrum(const Mat& m) {
  CVec ev = linalg::eigenvalues(m);
  std::sort(ev.data(), ev.data() + ev.size(), [](const Complex& a, const Complex& b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return ev;
}

PcpeInput make_input(const LtiSystem& sys, Index N, double T, std::uint64_t seed) {
  if (N >= min_pcpe_length(sys.m(), sys.n())) return generate_pcpe(sys.m(), sys.n(), N, T, seed);
  // Too short for order n + 1; simulate anyway so the PE check can report.
  if (!(T > 0.0)) throw ValidationError("T must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> level(-5.0, 5.0);
  PcpeInput input{T, Mat(sys.m(), N), 0};
  for (Index i = 0; i < N; ++i)
    for (Index k = 0; k < sys.m(); ++k) input.mu(k, i) = level(rng);
  return input;
}

Vec uniform_state(std::mt19937_64& rng, Index n) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Vec x(n);
  for (Index k = 0; k < n; ++k) x(k) = d(rng);
  return x;
}

Vec initial_state(const ExperimentConfig& cfg, Index n) {
  if (cfg.x0) {
    if (cfg.x0->size() != n) throw DimensionError("experiment.x0 length does not match n");
    return Eigen::Map<const Vec>(cfg.x0->data(), n);
  }
  std::mt19937_64 rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
  return uniform_state(rng, n);
}

struct Dataset {
  TrajectoryData data;
  HankelTriple h;
  std::optional<SystemEntry> system;
  int input_order = 0;
};

Dataset simulate_dataset(const LtiSystem& sys, Index N, double T, Index q, std::uint64_t seed,
                         const Vec& x0, const NoiseModel& noise) {
  Dataset d;
  const auto input = make_input(sys, N, T, seed);
  d.input_order = input.order;
  d.data = simulate(sys, input, x0, default_grid(T, q), noise);
  d.h = build_hankel(d.data);
  return d;
}

Dataset acquire(const ExperimentConfig& cfg) {
  if (cfg.data) {
    Dataset d;
    d.data = io::load_trajectory_csv(*cfg.data);
    d.h = build_hankel(d.data);
    if (cfg.has_system()) {
      d.system = cfg.system();
      if (d.system->sys.n() != d.data.n() || d.system->sys.m() != d.data.m()) {
        throw DimensionError("data file and system have different dimensions");
      }
    }
    return d;
  }
  const auto& entry = cfg.system();
  Dataset d = simulate_dataset(entry.sys, cfg.N, cfg.T, cfg.q, cfg.seed,
                               initial_state(cfg, entry.sys.n()), cfg.noise);
  d.system = entry;
  return d;
}

Index grid_index(const ExperimentConfig& cfg, const HankelTriple& h) {
  const Index j = cfg.grid_index ? *cfg.grid_index : h.default_index();
  h.require_index(j);
  return j;
}

double noise_bound(const ExperimentConfig& cfg, const TrajectoryData& data) {
  if (data.noise) return data.noise->active() ? data.noise->bound : 0.0;
  return cfg.data ? 0.0 : (cfg.noise.active() ? cfg.noise.bound : 0.0);
}

bool use_projection(const ExperimentConfig& cfg, const TrajectoryData& data) {
  if (cfg.project_data) return *cfg.project_data;
  return data.noise && data.noise->active();
}

json noise_json(const NoiseModel& n) {
  const char* kind = n.kind == NoiseKind::kNone          ? "none"
                     : n.kind == NoiseKind::kMeasurement ? "measurement"
                                                         : "process";
  return {{"kind", kind}, {"bound", n.bound}, {"seed", n.seed},
          {"corrupt_derivative", n.corrupt_derivative}};
}

json pe_json(const PeReport& r) {
  return {{"pass", r.pass},
          {"min_singular_value", r.min_singular_value},
          {"singular_values", r.singular_values},
          {"ranks", r.ranks},
          {"diagnostic", r.diagnostic}};
}

json system_json(const Dataset& d) {
  if (!d.system) return nullptr;
  return d.system->sys.label;
}

PoleSpec pole_spec_for(const ExperimentConfig& cfg, const SystemEntry* entry) {
  if (cfg.poles.spec && (!entry || cfg.poles.spec->n() == entry->sys.n())) return *cfg.poles.spec;
  if (entry && entry->poles) return *entry->poles;
  throw ValidationError("no pole spec: set procedure.poles or give one in the manifest");
}

ReferenceSet references_for(const ExperimentConfig& cfg, Index n) {
  const auto& p = cfg.trajref;
  if (p.references) {
    if (p.references->n() != n) throw DimensionError("references do not match the state dimension");
    return *p.references;
  }
  const Mat F = p.F->resolve(n, n, "procedure.generator.F");
  if (!p.X0->value) throw ValidationError("procedure.generator.X0 must be a matrix");
  const Mat X0 = p.X0->resolve(n, p.X0->value->cols(), "procedure.generator.X0");
  return references_from_generator(F, X0, p.times);
}

/// Mean relative residual of Xid = (A - B K) Xi over the reference samples.
double tracking_error(const LtiSystem& sys, const Mat& K, const ReferenceSet& refs) {
  const Mat Acl = sys.A - sys.B * K;
  double total = 0.0;
  for (Index s = 0; s < refs.count(); ++s) {
    const auto i = static_cast<std::size_t>(s);
    const double scale = std::max(refs.Xid[i].norm(), 1e-300);
    total += (refs.Xid[i] - Acl * refs.Xi[i]).norm() / scale;
  }
  return total / static_cast<double>(std::max<Index>(refs.count(), 1));
}

void emit(std::ostream& out, bool as_json, const json& report, const std::string& text) {
  if (as_json) {
    out << report.dump(2) << '\n';
  } else {
    out << text;
  }
}

// ---------------------------------------------------------------- synth

struct SynthOutput {
  json report;
  std::map<std::string, Mat> files;
  std::string text;
};

SynthOutput synth_lqr(const ExperimentConfig& cfg, const Dataset& d, Index j) {
  const Index n = d.h.n();
  const Index m = d.h.m();
  WeightPair w{cfg.lqr.Q.resolve(n, n, "procedure.Q"), cfg.lqr.R.resolve(m, m, "procedure.R")};
  w.validate(n, m);
  LqrOptions opt;
  opt.solver = cfg.solver;
  const bool project = use_projection(cfg, d.data);
  const auto r = solve_lqr_data(project ? project_consistent(d.h, j) : d.h, j, w, opt);
  SynthOutput o;
  o.files = {{"K", r.K}, {"P", r.Pstar}, {"Gamma", r.Gamma}};
  o.report = {{"K", matrix_json(r.K)},
              {"P", matrix_json(r.Pstar)},
              {"objective", r.objective},
              {"gamma_residual", r.gamma_residual},
              {"data_projection", project},
              {"solver_message", r.solver_message}};
  o.text = "objective tr(P) = " + num(r.objective) + ", Gamma residual = " + num(r.gamma_residual) + "\n";
  if (d.system) {
    const auto v = verify_lqr(d.system->sys, r, w);
    o.report["model_are_residual"] = v.are_residual;
    o.report["model_gain_residual"] = v.gain_residual;
    o.text += "model ARE residual = " + num(v.are_residual) + "\n";
  }
  return o;
}

SynthOutput synth_trajref(const ExperimentConfig& cfg, const Dataset& d, Index j) {
  const Index n = d.h.n();
  const auto refs = references_for(cfg, n);
  const auto& p = cfg.trajref;
  const Mat Wbar = p.wbar ? p.wbar->resolve(n, n, "procedure.wbar")
                          : default_wbar(d.h, noise_bound(cfg, d.data));
  ProjectionOptions popt;
  popt.scale_fraction = p.scale_fraction;
  popt.solver = cfg.solver;
  CandidateOptions copt;
  copt.cost_form = p.cost_form;
  copt.tracking_weight = p.tracking_weight;
  copt.solver = cfg.solver;
  const auto r = trajref_pipeline(d.h, refs, Wbar, j, popt, copt);
  SynthOutput o;
  o.files = {{"K", r.gain.K}, {"Kbar", r.candidate.Kbar}};
  if (r.gain.P) o.files["P"] = *r.gain.P;
  o.report = {{"K", matrix_json(r.gain.K)},
              {"Kbar", matrix_json(r.candidate.Kbar)},
              {"candidate_cost", r.candidate.cost},
              {"candidate_norm_cost", r.candidate.norm_cost},
              {"projection_method", r.gain.method},
              {"projection_objective", r.gain.objective},
              {"stabilizing_from_data", is_stabilizing(d.h, j, r.gain.K)},
              {"solver_message", r.gain.solver_message}};
  if (r.gain.beta) o.report["beta"] = *r.gain.beta;
  o.text = "candidate cost = " + num(r.candidate.cost) + ", projected with " + r.gain.method + "\n";
  if (d.system) {
    const double err = tracking_error(d.system->sys, r.gain.K, refs);
    o.report["tracking_error"] = err;
    o.text += "tracking error = " + num(err) + "\n";
  }
  return o;
}

SynthOutput synth_invoc(const ExperimentConfig& cfg, const Dataset& d, Index j) {
  const Index n = d.h.n();
  const Index m = d.h.m();
  const auto& p = cfg.invoc;
  const Mat K = p.K.resolve(m, n, "procedure.K");
  ReferenceBundle bundle;
  if (p.bundle) {
    bundle = *p.bundle;
  } else {
    if (!d.system) throw ValidationError("invoc needs a system or a 'bundle' file");
    Mat X0;
    if (p.x0) {
      if (!p.x0->value) throw ValidationError("procedure.x0 must be a matrix");
      X0 = p.x0->resolve(n, p.x0->value->cols(), "procedure.x0");
    } else {
      X0 = initial_state(cfg, n);
    }
    bundle = collect_closedloop(d.system->sys, K, X0, p.sampling);
  }
  InverseOcOptions opt;
  opt.gauge = p.gauge;
  opt.solver = cfg.solver;
  const bool project = use_projection(cfg, d.data);
  const HankelTriple h = project ? project_consistent(d.h, j) : d.h;
  const auto r = solve_inverse_oc(h, j, bundle, opt);
  LqrOptions lopt;
  lopt.solver = cfg.solver;
  const auto rt = round_trip(h, j, r, K, lopt);
  const double max_dev = (rt.lqr.K - K).cwiseAbs().maxCoeff();
  SynthOutput o;
  o.files = {{"K", rt.lqr.K}, {"Q", r.Q}, {"R", r.R}, {"P", r.P}, {"P1", r.P1}};
  o.report = {{"K", matrix_json(rt.lqr.K)},
              {"K_input", matrix_json(K)},
              {"Q", matrix_json(r.Q)},
              {"R", matrix_json(r.R)},
              {"residual", r.residual},
              {"lyapunov_residual", r.lyapunov_residual},
              {"round_trip_deviation", rt.deviation},
              {"round_trip_max_entry_deviation", max_dev},
              {"bundle_samples", bundle.samples()},
              {"data_projection", project},
              {"solver_message", r.solver_message}};
  o.text = "objective residual = " + num(r.residual) + ", round-trip deviation = " +
           num(rt.deviation) + " (max entry " + num(max_dev) + ")\n";
  return o;
}

SynthOutput synth_poles(const ExperimentConfig& cfg, const Dataset& d, Index j) {
  const PoleSpec spec = pole_spec_for(cfg, d.system ? &*d.system : nullptr);
  spec.validate(d.h.n(), d.h.m());
  const auto& p = cfg.poles;
  const auto r = p.method == PoleMethod::kRobust
                     ? place_poles_robust(d.h, j, spec, p.options)
                     : place_poles_baseline(d.h, j, spec, p.options.seed, p.options.rank_tol);
  SynthOutput o;
  o.files = {{"K", r.K}, {"V", r.V}, {"W", r.W}};
  o.report = {{"K", matrix_json(r.K)},
              {"placement_method", r.method},
              {"target", spectrum_json(spec.values())},
              {"objective", r.objective},
              {"initial_objective", r.initial_objective},
              {"restarts_completed", r.restarts_completed}};
  o.text = "condition objective ||V|| + ||V^-1|| = " + num(r.objective) + "\n";
  if (d.system) {
    const double eps = placement_error(r.K, d.system->sys, spec);
    o.report["epsilon"] = eps;
    o.report["closed_loop_eigenvalues"] =
        spectrum_json(sorted_spectrum(d.system->sys.A - d.system->sys.B * r.K));
    o.text += "placement error = " + num(eps) + "\n";
  }
  return o;
}

// ---------------------------------------------------------------- bench

struct SeriesValue {
  std::string series;
  double value = 0.0;
  std::string error;
};

struct TrialSeeds {
  std::uint64_t data = 0;
  std::uint64_t noise = 0;
  std::uint64_t other = 0;
};

TrialSeeds trial_seeds(std::uint64_t seed, std::size_t system, std::size_t level, int trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(system), static_cast<std::uint32_t>(level),
                    static_cast<std::uint32_t>(trial)};
  std::array<std::uint32_t, 6> w{};
  seq.generate(w.begin(), w.end());
  auto join = [&](int k) { return (std::uint64_t{w[k]} << 32) | w[k + 1]; };
  return {join(0), join(2), join(4)};
}

template <class F>
void attempt(std::vector<SeriesValue>& out, const std::vector<std::string>& series, F&& body) {
  try {
    const std::vector<double> values = body();
    for (std::size_t k = 0; k < series.size(); ++k) out.push_back({series[k], values[k], ""});
  } catch (const std::exception& e) {
    for (const auto& s : series) out.push_back({s, std::nan(""), e.what()});
  }
}

std::vector<SeriesValue> run_trial(const ExperimentConfig& cfg, const SystemEntry& entry,
                                   double level, const TrialSeeds& seeds) {
  std::vector<SeriesValue> out;
  const auto& sys = entry.sys;
  NoiseModel noise = cfg.noise;
  noise.bound = level;
  noise.seed = seeds.noise;
  if (noise.kind == NoiseKind::kNone && level > 0.0) noise.kind = NoiseKind::kMeasurement;
  std::mt19937_64 rng(seeds.other);
  const Vec x0 = uniform_state(rng, sys.n());

  Dataset d;
  Index j = 0;
  try {
    d = simulate_dataset(sys, cfg.N, cfg.T, cfg.q, seeds.data, x0, noise);
    j = cfg.grid_index ? *cfg.grid_index : d.h.default_index();
    d.h.require_index(j);
    require_pe(d.h, j);
  } catch (const std::exception& e) {
    std::vector<std::string> names;
    switch (cfg.procedure) {
      case Procedure::kPoles:
        names = {"robust", "baseline"};
        break;
      case Procedure::kInvoc:
        names = {"deviation", "max_entry_deviation"};
        break;
      case Procedure::kTrajref:
        names = {"tracking_error", "stabilizing"};
        break;
      default:
        names = {"are_residual"};
    }
    for (const auto& s : names) out.push_back({s, std::nan(""), e.what()});
    return out;
  }

  switch (cfg.procedure) {
    case Procedure::kPoles: {
      const PoleSpec spec = pole_spec_for(cfg, &entry);
      auto opts = cfg.poles.options;
      opts.seed = seeds.other;
      attempt(out, {"robust"}, [&] {
        return std::vector<double>{placement_error(place_poles_robust(d.h, j, spec, opts).K, sys, spec)};
      });
      attempt(out, {"baseline"}, [&] {
        return std::vector<double>{placement_error(
            place_poles_baseline(d.h, j, spec, seeds.other, opts.rank_tol).K, sys, spec)};
      });
      break;
    }
    case Procedure::kInvoc:
      attempt(out, {"deviation", "max_entry_deviation"}, [&] {
        const Mat K = cfg.invoc.K.resolve(sys.m(), sys.n(), "procedure.K");
        const Mat X0 = uniform_state(rng, sys.n());
        const auto bundle = collect_closedloop(sys, K, X0, cfg.invoc.sampling);
        InverseOcOptions opt;
        opt.gauge = cfg.invoc.gauge;
        opt.solver = cfg.solver;
        const HankelTriple h = use_projection(cfg, d.data) ? project_consistent(d.h, j) : d.h;
        const auto r = solve_inverse_oc(h, j, bundle, opt);
        LqrOptions lopt;
        lopt.solver = cfg.solver;
        const auto rt = round_trip(h, j, r, K, lopt);
        return std::vector<double>{rt.deviation, (rt.lqr.K - K).cwiseAbs().maxCoeff()};
      });
      break;
    case Procedure::kTrajref:
      attempt(out, {"tracking_error", "stabilizing"}, [&] {
        const auto refs = references_for(cfg, sys.n());
        const Mat Wbar = cfg.trajref.wbar ? cfg.trajref.wbar->resolve(sys.n(), sys.n(), "procedure.wbar")
                                          : default_wbar(d.h, level);
        ProjectionOptions popt;
        popt.scale_fraction = cfg.trajref.scale_fraction;
        popt.solver = cfg.solver;
        CandidateOptions copt;
        copt.cost_form = cfg.trajref.cost_form;
        copt.tracking_weight = cfg.trajref.tracking_weight;
        copt.solver = cfg.solver;
        const auto r = trajref_pipeline(d.h, refs, Wbar, j, popt, copt);
        return std::vector<double>{tracking_error(sys, r.gain.K, refs),
                                   linalg::is_hurwitz(sys.A - sys.B * r.gain.K) ? 1.0 : 0.0};
      });
      break;
    case Procedure::kLqr:
      attempt(out, {"are_residual"}, [&] {
        WeightPair w{cfg.lqr.Q.resolve(sys.n(), sys.n(), "procedure.Q"),
                     cfg.lqr.R.resolve(sys.m(), sys.m(), "procedure.R")};
        LqrOptions opt;
        opt.solver = cfg.solver;
        const HankelTriple h = use_projection(cfg, d.data) ? project_consistent(d.h, j) : d.h;
        return std::vector<double>{verify_lqr(sys, solve_lqr_data(h, j, w, opt), w).are_residual};
      });
      break;
    case Procedure::kNone:
      break;
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c == '\n' ? ' ' : c;
  }
  return q + "\"";
}

struct Summary {
  std::string system;
  double level = 0.0;
  std::string series;
  int trials = 0;
  int failures = 0;
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
  std::string first_error;
};

}  // namespace

json matrix_json(const Mat& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json spectrum_json(const CVec& v) {
  json out = json::array();
  for (Index k = 0; k < v.size(); ++k) out.push_back({{"re", v(k).real()}, {"im", v(k).imag()}});
  return out;
}

int cmd_simulate(const Invocation& inv, std::ostream& out, std::ostream& err) {
  const auto cfg = prepare(inv);
  if (cfg.data) throw ValidationError("simulate generates data; remove 'data' from the config");
  const auto d = acquire(cfg);
  const auto csv = cfg.output / "trajectory.csv";
  io::save_trajectory_csv(csv, d.data);
  const auto pe = check_pe(d.h);
  json report = {{"command", "simulate"},
                 {"system", system_json(d)},
                 {"N", d.data.N},
                 {"T", d.data.T},
                 {"q", d.data.q()},
                 {"seed", cfg.seed},
                 {"input_order", d.input_order},
                 {"noise", noise_json(cfg.noise)},
                 {"pe", pe_json(pe)},
                 {"trajectory", csv.filename().string()}};
  write_json(cfg.output / "pe_report.json", report);
  std::string text = "wrote " + csv.string() + " (" + std::to_string(d.data.x.cols()) + " rows)\n" +
                     "PE check: " + (pe.pass ? "pass" : "FAIL") + ", minimum singular value " +
                     num(pe.min_singular_value) + "\n";
  emit(out, inv.json_output, report, text);
  if (!pe.pass) {
    err << "error: data are not persistently exciting: " << pe.diagnostic
        << "; minimum singular value " << num(pe.min_singular_value) << "\n";
    return static_cast<int>(ExitCode::kDataQuality);
  }
  return 0;
}

int cmd_synth(const Invocation& inv, std::ostream& out, std::ostream& /*err*/) {
  const auto cfg = prepare(inv);
  if (cfg.procedure == Procedure::kNone) throw ValidationError("synth needs a 'procedure'");
  const auto start = Clock::now();
  const auto d = acquire(cfg);
  const Index j = grid_index(cfg, d.h);
  require_pe(d.h, j);
  SynthOutput o;
  switch (cfg.procedure) {
    case Procedure::kLqr:
      o = synth_lqr(cfg, d, j);
      break;
    case Procedure::kTrajref:
      o = synth_trajref(cfg, d, j);
      break;
    case Procedure::kInvoc:
      o = synth_invoc(cfg, d, j);
      break;
    case Procedure::kPoles:
      o = synth_poles(cfg, d, j);
      break;
    case Procedure::kNone:
      break;
  }
  json files = json::object();
  for (const auto& [name, m] : o.files) {
    const auto path = cfg.output / (name + ".txt");
    io::save_matrix(path, m);
    files[name] = path.filename().string();
  }
  json report = o.report;
  report["command"] = "synth";
  report["method"] = to_string(cfg.procedure);
  report["system"] = system_json(d);
  report["grid_index"] = j;
  report["grid_time"] = d.h.grid(j);
  report["files"] = files;
  report["timing_ms"] = elapsed_ms(start);
  write_json(cfg.output / "report.json", report);
  std::string text = "synth " + to_string(cfg.procedure) + " at t_j = " + num(d.h.grid(j)) + "\n" +
                     o.text + "wrote K to " + (cfg.output / "K.txt").string() + "\n";
  emit(out, inv.json_output, report, text);
  return 0;
}

int cmd_verify(const Invocation& inv, std::ostream& out, std::ostream& /*err*/) {
  const auto cfg = prepare(inv);
  const std::string& mode = inv.mode;
  if (mode != "all" && mode != "data" && mode != "model" && mode != "poles") {
    throw ValidationError("--mode must be data, model, poles or all");
  }
  const fs::path gain_path = inv.gain ? *inv.gain : cfg.output / "K.txt";
  const Mat K = io::load_matrix(gain_path);
  const auto d = acquire(cfg);
  if (K.rows() != d.h.m() || K.cols() != d.h.n()) throw DimensionError("gain has the wrong shape");
  const bool all = mode == "all";
  json report = {{"command", "verify"}, {"gain", gain_path.filename().string()}, {"system", system_json(d)}};
  std::string text;

  if (all || mode == "data") {
    const Index j = grid_index(cfg, d.h);
    require_pe(d.h, j);
    const Mat Acl = closed_loop_from_data(d.h, j, K);
    const bool stable = is_stabilizing(d.h, j, K);
    report["data"] = {{"grid_index", j},
                      {"stabilizing", stable},
                      {"spectral_abscissa", linalg::spectral_abscissa(Acl)},
                      {"eigenvalues", spectrum_json(sorted_spectrum(Acl))}};
    text += std::string("data: ") + (stable ? "stabilizing" : "not stabilizing") +
            ", spectral abscissa " + num(linalg::spectral_abscissa(Acl)) + "\n";
  }
  if (all || mode == "model") {
    if (!d.system) {
      if (!all) throw ValidationError("model mode needs a system");
    } else {
      const Mat Acl = d.system->sys.A - d.system->sys.B * K;
      const bool stable = linalg::is_hurwitz(Acl);
      report["model"] = {{"hurwitz", stable},
                         {"spectral_abscissa", linalg::spectral_abscissa(Acl)},
                         {"eigenvalues", spectrum_json(sorted_spectrum(Acl))}};
      text += std::string("model: ") + (stable ? "Hurwitz" : "not Hurwitz") + ", spectral abscissa " +
              num(linalg::spectral_abscissa(Acl)) + "\n";
    }
  }
  if (all || mode == "poles") {
    const bool have_spec = cfg.poles.spec || (d.system && d.system->poles);
    if (!d.system || !have_spec) {
      if (!all) throw ValidationError("pole mode needs a system and a pole spec");
    } else {
      const PoleSpec spec = pole_spec_for(cfg, &*d.system);
      const double eps = placement_error(K, d.system->sys, spec);
      report["poles"] = {{"epsilon", eps}, {"target", spectrum_json(spec.values())}};
      text += "poles: placement error " + num(eps) + "\n";
    }
  }
  write_json(cfg.output / "verify.json", report);
  emit(out, inv.json_output, report, text);
  return 0;
}

int cmd_bench(const Invocation& inv, std::ostream& out, std::ostream& /*err*/) {
  auto cfg = prepare(inv);
  if (cfg.procedure == Procedure::kNone) throw ValidationError("bench needs a 'procedure'");
  if (cfg.data) throw ValidationError("bench simulates its own data; remove 'data' from the config");
  if (!cfg.has_system()) throw ValidationError("bench needs a 'system'");
  if (inv.trials) {
    if (*inv.trials < 1) throw ValidationError("--trials must be positive");
    cfg.bench.trials = *inv.trials;
  }
  if (inv.threads) cfg.bench.threads = *inv.threads;
  if (cfg.procedure == Procedure::kPoles) {
    for (const auto& e : cfg.systems) pole_spec_for(cfg, &e).validate(e.sys.n(), e.sys.m());
  }

  struct Task {
    std::size_t system;
    std::size_t level;
    int trial;
  };
  std::vector<Task> tasks;
  for (std::size_t s = 0; s < cfg.systems.size(); ++s)
    for (std::size_t l = 0; l < cfg.bench.noise_levels.size(); ++l)
      for (int t = 0; t < cfg.bench.trials; ++t) tasks.push_back({s, l, t});

  const auto start = Clock::now();
  std::vector<std::vector<SeriesValue>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < tasks.size(); k = next++) {
      const auto& t = tasks[k];
      results[k] = run_trial(cfg, cfg.systems[t.system], cfg.bench.noise_levels[t.level],
                             trial_seeds(cfg.seed, t.system, t.level, t.trial));
    }
  };
  unsigned threads = cfg.bench.threads ? cfg.bench.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(tasks.size())));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  const double total_ms = elapsed_ms(start);

  std::ofstream trials_csv(cfg.output / "bench_trials.csv");
  trials_csv << "system,noise,trial,series,value,error\n";
  std::vector<Summary> summary;
  std::map<std::tuple<std::size_t, std::size_t, std::string>, std::size_t> slot;
  std::map<std::size_t, std::vector<double>> samples;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const auto& t = tasks[k];
    const auto& label = cfg.systems[t.system].sys.label;
    const double level = cfg.bench.noise_levels[t.level];
    for (const auto& v : results[k]) {
      trials_csv << csv_field(label) << ',' << io::format_double(level) << ',' << t.trial << ','
                 << v.series << ',' << (v.error.empty() ? io::format_double(v.value) : "") << ','
                 << csv_field(v.error) << '\n';
      const auto key = std::make_tuple(t.system, t.level, v.series);
      auto it = slot.find(key);
      if (it == slot.end()) {
        it = slot.emplace(key, summary.size()).first;
        summary.push_back({label, level, v.series});
      }
      auto& s = summary[it->second];
      ++s.trials;
      if (!v.error.empty()) {
        ++s.failures;
        if (s.first_error.empty()) s.first_error = v.error;
      } else {
        samples[it->second].push_back(v.value);
      }
    }
  }
  for (std::size_t k = 0; k < summary.size(); ++k) {
    auto& s = summary[k];
    auto& v = samples[k];
    if (v.empty()) {
      s.mean = s.median = s.max = std::nan("");
      continue;
    }
    double total = 0.0;
    for (double x : v) total += x;
    s.mean = total / static_cast<double>(v.size());
    std::sort(v.begin(), v.end());
    s.median = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    s.max = v.back();
  }

  std::ofstream csv(cfg.output / "bench.csv");
  csv << "system,noise,series,trials,failures,mean,median,max\n";
  json rows = json::array();
  std::string text = "bench " + to_string(cfg.procedure) + ": " + std::to_string(cfg.bench.trials) +
                     " trials per noise level\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %-10s %-20s %7s %8s %12s %12s %12s\n", "system", "noise",
                "series", "trials", "failed", "mean", "median", "max");
  text += line;
  for (const auto& s : summary) {
    csv << csv_field(s.system) << ',' << io::format_double(s.level) << ',' << s.series << ','
        << s.trials << ',' << s.failures << ',' << io::format_double(s.mean) << ','
        << io::format_double(s.median) << ',' << io::format_double(s.max) << '\n';
    std::snprintf(line, sizeof line, "%-12s %-10.3g %-20s %7d %8d %12.4e %12.4e %12.4e\n",
                  s.system.c_str(), s.level, s.series.c_str(), s.trials, s.failures, s.mean,
                  s.median, s.max);
    text += line;
    json row = {{"system", s.system}, {"noise", s.level},       {"series", s.series},
                {"trials", s.trials}, {"failures", s.failures}};
    row["mean"] = std::isnan(s.mean) ? json(nullptr) : json(s.mean);
    row["median"] = std::isnan(s.median) ? json(nullptr) : json(s.median);
    row["max"] = std::isnan(s.max) ? json(nullptr) : json(s.max);
    if (!s.first_error.empty()) row["first_error"] = s.first_error;
    rows.push_back(std::move(row));
  }
  int failures = 0;
  for (const auto& s : summary) failures += s.failures;
  if (failures > 0) text += std::to_string(failures) + " trial runs failed (see bench_trials.csv)\n";
  json report = {{"command", "bench"},
                 {"procedure", to_string(cfg.procedure)},
                 {"trials", cfg.bench.trials},
                 {"seed", cfg.seed},
                 {"noise_levels", cfg.bench.noise_levels},
                 {"rows", rows},
                 {"failures", failures},
                 {"threads", threads},
                 {"timing_ms", total_ms}};
  write_json(cfg.output / "bench.json", report);
  emit(out, inv.json_output, report, text);
  return 0;
}

}  // namespace dbctl::cli
