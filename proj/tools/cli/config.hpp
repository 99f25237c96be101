#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dbctl/invopt.hpp"
#include "dbctl/poleplace.hpp"
#include "dbctl/sdp.hpp"
#include "dbctl/system.hpp"
#include "dbctl/trajref.hpp"

namespace dbctl::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// A matrix given inline, by file, or as a multiple of the identity whose
/// size is only known once the data are loaded.
struct MatrixSpec {
  std::optional<Mat> value;
  double scale = 1.0;

  Mat resolve(Index rows, Index cols, const std::string& what) const;
};

struct SystemEntry {
  LtiSystem sys;
  std::optional<PoleSpec> poles;
};

enum class Procedure { kNone, kTrajref, kLqr, kInvoc, kPoles };
std::string to_string(Procedure p);

struct LqrParams {
  MatrixSpec Q;
  MatrixSpec R{std::nullopt, 1.0};
};

struct TrajrefParams {
  std::optional<ReferenceSet> references;
  std::optional<MatrixSpec> F;
  std::optional<MatrixSpec> X0;
  Vec times;
  std::optional<MatrixSpec> wbar;
  CostForm cost_form = CostForm::kSquared;
  double tracking_weight = 1.0;
  double scale_fraction = 0.5;
};

struct InvocParams {
  MatrixSpec K;
  std::optional<MatrixSpec> x0;
  std::optional<ReferenceBundle> bundle;
  RGauge gauge = RGauge::kUnitFloor;
  ClosedLoopSampling sampling;
};

enum class PoleMethod { kRobust, kBaseline };

struct PoleParams {
  std::optional<PoleSpec> spec;
  PoleMethod method = PoleMethod::kRobust;
  PolePlacementOptions options;
};

struct BenchSettings {
  int trials = 100;
  std::vector<double> noise_levels{1e-3, 1e-2};
  unsigned threads = 0;  // 0: hardware concurrency
};

struct ExperimentConfig {
  fs::path source;
  std::vector<SystemEntry> systems;
  Index N = 15;
  double T = 0.5;
  std::uint64_t seed = 7;
  Index q = 21;
  std::optional<Vec> x0;
  NoiseModel noise;
  bool noise_seed_given = false;
  std::optional<fs::path> data;
  std::optional<Index> grid_index;

  Procedure procedure = Procedure::kNone;
  LqrParams lqr;
  TrajrefParams trajref;
  InvocParams invoc;
  PoleParams poles;
  /// lqr/invoc: project Hxd(t_j) onto the data row space first; unset means
  /// only when the data carry active noise.
  std::optional<bool> project_data;

  convex::SolverOptions solver = convex::SolverOptions::from_environment();
  fs::path output = "out";
  BenchSettings bench;

  const SystemEntry& system() const;
  bool has_system() const { return !systems.empty(); }
};

/// Parses and validates a configuration; relative paths are resolved against
/// `base_dir` and every referenced file is loaded here, so a config that
/// parses is ready to run. Throws ValidationError.
ExperimentConfig parse_config(const json& j, const fs::path& base_dir);
ExperimentConfig load_config(const fs::path& path);

/// List of {re, im, multiplicity} objects, or {"poles": [...]}.
PoleSpec parse_pole_spec(const json& j);
PoleSpec load_pole_spec(const fs::path& path);

/// Directory with manifest.json: {"systems": [{"name", "A", "B", "poles"?}]}.
std::vector<SystemEntry> load_manifest(const fs::path& dir);

}  // namespace dbctl::cli
