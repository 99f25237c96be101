#include "cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "dbctl/errors.hpp"
#include "dbctl/io.hpp"

namespace dbctl::cli {

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.count(key)) throw ValidationError("unknown key '" + key + "' in " + where);
  }
}

double get_number(const json& j, const std::string& what) {
  if (!j.is_number()) throw ValidationError(what + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(what + " must be finite");
  return v;
}

double get_positive(const json& j, const std::string& what) {
  const double v = get_number(j, what);
  if (!(v > 0.0)) throw ValidationError(what + " must be positive");
  return v;
}

std::int64_t get_integer(const json& j, const std::string& what, std::int64_t lo) {
  if (!j.is_number_integer()) throw ValidationError(what + " must be an integer");
  const auto v = j.get<std::int64_t>();
  if (v < lo) throw ValidationError(what + " must be at least " + std::to_string(lo));
  return v;
}

std::uint64_t get_seed(const json& j, const std::string& what) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    throw ValidationError(what + " must be a nonnegative integer");
  }
  return j.get<std::uint64_t>();
}

std::string get_string(const json& j, const std::string& what) {
  if (!j.is_string()) throw ValidationError(what + " must be a string");
  return j.get<std::string>();
}

fs::path resolve_path(const json& j, const fs::path& base, const std::string& what) {
  fs::path p = get_string(j, what);
  if (p.is_relative()) p = base / p;
  if (!fs::exists(p)) throw ValidationError(what + ": no such file '" + p.string() + "'");
  return p;
}

Mat matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw ValidationError(what + " must be an array of rows");
  const Index rows = static_cast<Index>(j.size());
  if (rows == 0) return Mat(0, 0);
  // A flat list is a column vector.
  if (!j.front().is_array()) {
    Mat m(rows, 1);
    for (Index r = 0; r < rows; ++r) m(r, 0) = get_number(j[r], what);
    return m;
  }
  const Index cols = static_cast<Index>(j.front().size());
  Mat m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw ValidationError(what + " has ragged rows");
    }
    for (Index c = 0; c < cols; ++c) m(r, c) = get_number(row[c], what);
  }
  return m;
}

MatrixSpec parse_matrix_spec(const json& j, const fs::path& base, const std::string& what) {
  MatrixSpec s;
  if (j.is_number()) {
    s.scale = get_number(j, what);
  } else if (j.is_string()) {
    s.value = io::load_matrix(resolve_path(j, base, what));
  } else if (j.is_array()) {
    s.value = matrix_from_json(j, what);
  } else if (j.is_object()) {
    check_keys(j, {"identity"}, what);
    if (!j.contains("identity")) throw ValidationError(what + " object needs 'identity'");
    s.scale = get_number(j["identity"], what + ".identity");
  } else {
    throw ValidationError(what + " must be a number, a path, a nested array or {identity}");
  }
  return s;
}

Vec parse_times(const json& j, const std::string& what) {
  if (j.is_array()) {
    Vec t(static_cast<Index>(j.size()));
    for (Index k = 0; k < t.size(); ++k) t(k) = get_number(j[k], what);
    return t;
  }
  check_keys(j, {"start", "stop", "count"}, what);
  const double start = j.contains("start") ? get_number(j["start"], what + ".start") : 0.0;
  if (!j.contains("stop") || !j.contains("count")) {
    throw ValidationError(what + " needs 'stop' and 'count'");
  }
  const double stop = get_number(j["stop"], what + ".stop");
  const auto count = get_integer(j["count"], what + ".count", 1);
  if (count == 1) return Vec::Constant(1, start);
  return Vec::LinSpaced(static_cast<Index>(count), start, stop);
}

SystemEntry builtin_system(const std::string& name) {
  if (name == "aircraft") return {builtin_aircraft(), std::nullopt};
  if (name == "scalar") {
    return {LtiSystem{Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 1.0), "scalar"}, std::nullopt};
  }
  throw ValidationError("unknown builtin system '" + name + "' (known: aircraft, scalar)");
}

std::vector<SystemEntry> parse_systems(const json& j, const fs::path& base) {
  if (j.is_string()) return {builtin_system(j.get<std::string>())};
  check_keys(j, {"builtin", "A", "B", "label", "manifest", "name", "poles"}, "system");
  if (j.contains("builtin")) {
    if (j.contains("A") || j.contains("manifest")) {
      throw ValidationError("system: give exactly one of builtin, A/B or manifest");
    }
    return {builtin_system(get_string(j["builtin"], "system.builtin"))};
  }
  if (j.contains("manifest")) {
    if (j.contains("A")) throw ValidationError("system: give exactly one of builtin, A/B or manifest");
    auto all = load_manifest(resolve_path(j["manifest"], base, "system.manifest"));
    if (!j.contains("name")) return all;
    const std::string name = get_string(j["name"], "system.name");
    for (auto& e : all) {
      if (e.sys.label == name) return {e};
    }
    throw ValidationError("system '" + name + "' is not in the manifest");
  }
  if (!j.contains("A") || !j.contains("B")) {
    throw ValidationError("system needs 'builtin', 'manifest' or both 'A' and 'B'");
  }
  SystemEntry e;
  e.sys = io::load_system(resolve_path(j["A"], base, "system.A"),
                          resolve_path(j["B"], base, "system.B"),
                          j.contains("label") ? get_string(j["label"], "system.label") : "file");
  if (j.contains("poles")) e.poles = load_pole_spec(resolve_path(j["poles"], base, "system.poles"));
  return {e};
}

NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "none") return NoiseKind::kNone;
  if (s == "measurement") return NoiseKind::kMeasurement;
  if (s == "process") return NoiseKind::kProcess;
  throw ValidationError("noise.kind must be none, measurement or process");
}

void parse_procedure(const json& j, const fs::path& base, ExperimentConfig& c) {
  if (!j.is_object() || !j.contains("name")) throw ValidationError("procedure needs a 'name'");
  const std::string name = get_string(j["name"], "procedure.name");
  if (name == "lqr") {
    c.procedure = Procedure::kLqr;
    check_keys(j, {"name", "Q", "R", "project_data"}, "procedure");
    if (j.contains("Q")) c.lqr.Q = parse_matrix_spec(j["Q"], base, "procedure.Q");
    if (j.contains("R")) c.lqr.R = parse_matrix_spec(j["R"], base, "procedure.R");
  } else if (name == "trajref") {
    c.procedure = Procedure::kTrajref;
    check_keys(j, {"name", "references", "generator", "wbar", "cost_form", "tracking_weight",
                   "scale_fraction"},
               "procedure");
    auto& p = c.trajref;
    if (j.contains("references") == j.contains("generator")) {
      throw ValidationError("trajref needs exactly one of 'references' and 'generator'");
    }
    if (j.contains("references")) {
      p.references = io::load_reference_csv(resolve_path(j["references"], base, "procedure.references"));
    } else {
      const auto& g = j["generator"];
      check_keys(g, {"F", "X0", "times"}, "procedure.generator");
      if (!g.contains("F") || !g.contains("X0") || !g.contains("times")) {
        throw ValidationError("procedure.generator needs F, X0 and times");
      }
      p.F = parse_matrix_spec(g["F"], base, "procedure.generator.F");
      p.X0 = parse_matrix_spec(g["X0"], base, "procedure.generator.X0");
      p.times = parse_times(g["times"], "procedure.generator.times");
    }
    if (j.contains("wbar")) p.wbar = parse_matrix_spec(j["wbar"], base, "procedure.wbar");
    if (j.contains("cost_form")) {
      const auto f = get_string(j["cost_form"], "procedure.cost_form");
      if (f == "squared") {
        p.cost_form = CostForm::kSquared;
      } else if (f == "norm") {
        p.cost_form = CostForm::kNorm;
      } else {
        throw ValidationError("procedure.cost_form must be squared or norm");
      }
    }
    if (j.contains("tracking_weight")) {
      p.tracking_weight = get_positive(j["tracking_weight"], "procedure.tracking_weight");
    }
    if (j.contains("scale_fraction")) {
      p.scale_fraction = get_positive(j["scale_fraction"], "procedure.scale_fraction");
      if (p.scale_fraction >= 1.0) throw ValidationError("procedure.scale_fraction must be < 1");
    }
  } else if (name == "invoc") {
    c.procedure = Procedure::kInvoc;
    check_keys(j, {"name", "K", "x0", "bundle", "gauge", "spacing", "extra_samples", "project_data"},
               "procedure");
    auto& p = c.invoc;
    if (!j.contains("K")) throw ValidationError("invoc needs the gain 'K'");
    p.K = parse_matrix_spec(j["K"], base, "procedure.K");
    if (!p.K.value) throw ValidationError("procedure.K must be a matrix");
    if (j.contains("x0") && j.contains("bundle")) {
      throw ValidationError("invoc takes either 'x0' or 'bundle'");
    }
    if (j.contains("x0")) p.x0 = parse_matrix_spec(j["x0"], base, "procedure.x0");
    if (j.contains("bundle")) {
      p.bundle = io::load_bundle_csv(resolve_path(j["bundle"], base, "procedure.bundle"));
    }
    if (j.contains("gauge")) {
      const auto g = get_string(j["gauge"], "procedure.gauge");
      if (g == "unit_floor") {
        p.gauge = RGauge::kUnitFloor;
      } else if (g == "trace") {
        p.gauge = RGauge::kTrace;
      } else {
        throw ValidationError("procedure.gauge must be unit_floor or trace");
      }
    }
    if (j.contains("spacing")) p.sampling.spacing = get_positive(j["spacing"], "procedure.spacing");
    if (j.contains("extra_samples")) {
      p.sampling.extra_samples = get_integer(j["extra_samples"], "procedure.extra_samples", 0);
    }
  } else if (name == "poles") {
    c.procedure = Procedure::kPoles;
    check_keys(j, {"name", "poles", "method", "restarts", "max_iterations", "seed"}, "procedure");
    auto& p = c.poles;
    if (j.contains("poles")) {
      p.spec = j["poles"].is_string() ? load_pole_spec(resolve_path(j["poles"], base, "procedure.poles"))
                                      : parse_pole_spec(j["poles"]);
    }
    if (j.contains("method")) {
      const auto m = get_string(j["method"], "procedure.method");
      if (m == "robust") {
        p.method = PoleMethod::kRobust;
      } else if (m == "baseline") {
        p.method = PoleMethod::kBaseline;
      } else {
        throw ValidationError("procedure.method must be robust or baseline");
      }
    }
    if (j.contains("restarts")) {
      p.options.restarts = static_cast<int>(get_integer(j["restarts"], "procedure.restarts", 1));
    }
    if (j.contains("max_iterations")) {
      p.options.max_iterations =
          static_cast<int>(get_integer(j["max_iterations"], "procedure.max_iterations", 1));
    }
    if (j.contains("seed")) p.options.seed = get_seed(j["seed"], "procedure.seed");
  } else {
    throw ValidationError("procedure.name must be trajref, lqr, invoc or poles");
  }
  if (j.contains("project_data")) {
    if (!j["project_data"].is_boolean()) throw ValidationError("procedure.project_data must be a boolean");
    c.project_data = j["project_data"].get<bool>();
  }
}

}  // namespace

Mat MatrixSpec::resolve(Index rows, Index cols, const std::string& what) const {
  if (!value) {
    if (rows != cols) throw DimensionError(what + ": a scalar only stands for a square matrix");
    return scale * Mat::Identity(rows, cols);
  }
  if (value->rows() != rows || value->cols() != cols) {
    throw DimensionError(what + " is " + std::to_string(value->rows()) + "x" +
                         std::to_string(value->cols()) + ", expected " + std::to_string(rows) +
                         "x" + std::to_string(cols));
  }
  return *value;
}

std::string to_string(Procedure p) {
  switch (p) {
    case Procedure::kTrajref:
      return "trajref";
    case Procedure::kLqr:
      return "lqr";
    case Procedure::kInvoc:
      return "invoc";
    case Procedure::kPoles:
      return "poles";
    case Procedure::kNone:
      break;
  }
  return "none";
}

const SystemEntry& ExperimentConfig::system() const {
  if (systems.empty()) throw ValidationError("this command needs a 'system' in the config");
  if (systems.size() > 1) {
    throw ValidationError("the manifest holds several systems; select one with system.name");
  }
  return systems.front();
}

PoleSpec parse_pole_spec(const json& j) {
  const json& list = j.is_object() ? j.value("poles", json()) : j;
  if (j.is_object()) check_keys(j, {"poles"}, "pole spec");
  if (!list.is_array()) throw ValidationError("pole spec must be a list of {re, im, multiplicity}");
  std::vector<PoleEntry> entries;
  for (const auto& e : list) {
    check_keys(e, {"re", "im", "multiplicity"}, "pole spec entry");
    if (!e.contains("re")) throw ValidationError("pole spec entry needs 're'");
    const double re = get_number(e["re"], "pole re");
    const double im = e.contains("im") ? get_number(e["im"], "pole im") : 0.0;
    const auto mult = e.contains("multiplicity") ? get_integer(e["multiplicity"], "multiplicity", 1) : 1;
    entries.push_back({Complex(re, im), static_cast<Index>(mult)});
  }
  return PoleSpec::from_entries(std::move(entries));
}

PoleSpec load_pole_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open pole spec '" + path.string() + "'");
  try {
    return parse_pole_spec(json::parse(in));
  } catch (const json::exception& e) {
    throw ValidationError("pole spec '" + path.string() + "': " + e.what());
  }
}

std::vector<SystemEntry> load_manifest(const fs::path& dir) {
  const fs::path file = fs::is_directory(dir) ? dir / "manifest.json" : dir;
  const fs::path root = file.parent_path();
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open manifest '" + file.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("manifest '" + file.string() + "': " + e.what());
  }
  check_keys(j, {"systems"}, "manifest");
  if (!j.contains("systems") || !j["systems"].is_array() || j["systems"].empty()) {
    throw ValidationError("manifest needs a nonempty 'systems' list");
  }
  std::vector<SystemEntry> out;
  for (const auto& s : j["systems"]) {
    check_keys(s, {"name", "A", "B", "poles"}, "manifest entry");
    if (!s.contains("name") || !s.contains("A") || !s.contains("B")) {
      throw ValidationError("manifest entries need name, A and B");
    }
    SystemEntry e;
    e.sys = io::load_system(resolve_path(s["A"], root, "manifest A"),
                            resolve_path(s["B"], root, "manifest B"),
                            get_string(s["name"], "manifest name"));
    if (s.contains("poles")) e.poles = load_pole_spec(resolve_path(s["poles"], root, "manifest poles"));
    out.push_back(std::move(e));
  }
  return out;
}

ExperimentConfig parse_config(const json& j, const fs::path& base_dir) {
  check_keys(j, {"system", "experiment", "noise", "data", "grid_index", "procedure", "solver",
                 "output", "bench"},
             "config");
  ExperimentConfig c;
  if (j.contains("system")) c.systems = parse_systems(j["system"], base_dir);
  if (j.contains("experiment")) {
    const auto& e = j["experiment"];
    check_keys(e, {"N", "T", "seed", "q", "x0"}, "experiment");
    if (e.contains("N")) c.N = get_integer(e["N"], "experiment.N", 1);
    if (e.contains("T")) c.T = get_positive(e["T"], "experiment.T");
    if (e.contains("seed")) c.seed = get_seed(e["seed"], "experiment.seed");
    if (e.contains("q")) c.q = get_integer(e["q"], "experiment.q", 1);
    if (e.contains("x0")) c.x0 = matrix_from_json(e["x0"], "experiment.x0");
  }
  if (j.contains("noise")) {
    const auto& n = j["noise"];
    check_keys(n, {"kind", "bound", "seed", "corrupt_derivative"}, "noise");
    if (n.contains("kind")) c.noise.kind = parse_noise_kind(get_string(n["kind"], "noise.kind"));
    if (n.contains("bound")) {
      c.noise.bound = get_number(n["bound"], "noise.bound");
      if (c.noise.bound < 0.0) throw ValidationError("noise.bound must be nonnegative");
    }
    if (n.contains("seed")) {
      c.noise.seed = get_seed(n["seed"], "noise.seed");
      c.noise_seed_given = true;
    }
    if (n.contains("corrupt_derivative")) {
      if (!n["corrupt_derivative"].is_boolean()) {
        throw ValidationError("noise.corrupt_derivative must be a boolean");
      }
      c.noise.corrupt_derivative = n["corrupt_derivative"].get<bool>();
    }
  }
  if (j.contains("data")) c.data = resolve_path(j["data"], base_dir, "data");
  if (j.contains("grid_index")) c.grid_index = get_integer(j["grid_index"], "grid_index", 0);
  if (j.contains("procedure")) parse_procedure(j["procedure"], base_dir, c);
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    check_keys(s, {"tol", "feas_tol", "gap_tol", "max_iterations"}, "solver");
    if (s.contains("tol")) {
      c.solver.feas_tol = c.solver.gap_tol = get_positive(s["tol"], "solver.tol");
    }
    if (s.contains("feas_tol")) c.solver.feas_tol = get_positive(s["feas_tol"], "solver.feas_tol");
    if (s.contains("gap_tol")) c.solver.gap_tol = get_positive(s["gap_tol"], "solver.gap_tol");
    if (s.contains("max_iterations")) {
      c.solver.max_iterations = static_cast<int>(get_integer(s["max_iterations"], "solver.max_iterations", 1));
    }
  }
  if (j.contains("output")) {
    fs::path out = get_string(j["output"], "output");
    c.output = out.is_relative() ? base_dir / out : out;
  } else {
    c.output = base_dir / "out";
  }
  if (j.contains("bench")) {
    const auto& b = j["bench"];
    check_keys(b, {"trials", "noise_levels", "threads"}, "bench");
    if (b.contains("trials")) c.bench.trials = static_cast<int>(get_integer(b["trials"], "bench.trials", 1));
    if (b.contains("noise_levels")) {
      if (!b["noise_levels"].is_array() || b["noise_levels"].empty()) {
        throw ValidationError("bench.noise_levels must be a nonempty list");
      }
      c.bench.noise_levels.clear();
      for (const auto& v : b["noise_levels"]) {
        const double level = get_number(v, "bench.noise_levels");
        if (level < 0.0) throw ValidationError("bench.noise_levels must be nonnegative");
        c.bench.noise_levels.push_back(level);
      }
    }
    if (b.contains("threads")) {
      c.bench.threads = static_cast<unsigned>(get_integer(b["threads"], "bench.threads", 0));
    }
  }
  if (!c.has_system() && !c.data) throw ValidationError("config needs a 'system' or a 'data' file");
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config '" + path.string() + "': " + e.what());
  }
  auto c = parse_config(j, fs::absolute(path).parent_path());
  c.source = path;
  return c;
}

}  // namespace dbctl::cli
