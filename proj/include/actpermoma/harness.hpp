#pragma once

#include "actpermoma/grasping.hpp"
#include "actpermoma/planning.hpp"
#include "actpermoma/policies.hpp"
#include "actpermoma/scene.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace actpermoma
{

class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class InsufficientSamples : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Simulator knobs that are not planner hyperparameters.
struct SimulationParams
{
  CameraIntrinsics sensor;
  // Virtual camera for rear-side IG: 32 x 32 rays over a field that frames
  // the target box from typical viewing distances.
  CameraIntrinsics ig_camera{32, 32, deg2rad(25.0), 3.0};
  double target_volume_size = 0.6;
  int target_resolution = 40;
  double nav_voxel_size = 0.1;
  double start_camera_height = 1.2;
  // Budget steps consumed by an attempt that fails because the grasp is out
  // of reach (the episode continues).
  int grasp_attempt_cost = 10;
  // Planar base laser feeding only the navigation map: four depth strips
  // 90 degrees apart at this height. A height <= 0 disables it.
  double laser_height = 0.3;
  ExecutionParams execution;
  DetectionParams detection;
  SceneParams scene;
};

struct RunConfig
{
  PlannerConfig planner;
  ScenarioKind scenario = ScenarioKind::Simple;
  bool hard_grasps = false;
  int episodes = 100;
  std::uint64_t base_seed = 0;
  PolicyKind policy = PolicyKind::ActPerMoMa;
  std::filesystem::path output_dir = "out";
  SimulationParams sim;

  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
// Starts from `base` and overrides every key present; unknown keys throw
// ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j, const RunConfig& base = {});
RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base = {});
// Hash of everything that influences results (not episodes or output_dir).
std::string config_hash(const RunConfig& cfg);

enum class Outcome : std::uint8_t
{
  Success,
  Abort,
  GraspFailure
};

std::string to_string(Outcome o);
Outcome outcome_from_string(const std::string& s);

struct EpisodeResult
{
  Outcome outcome = Outcome::Abort;
  double d_total = 0.0;
  long v_total = 1;
  int steps = 0;
  std::uint64_t scene_seed = 0;
  std::uint64_t policy_seed = 0;
  PolicyKind policy = PolicyKind::ActPerMoMa;
  int grasp_attempts = 0;
  int safety_violations = 0;  // MoveSteps ending in an Occupied cell
  std::string detail;

  bool operator==(const EpisodeResult&) const = default;
};

nlohmann::json to_json(const EpisodeResult& r);
EpisodeResult episode_result_from_json(const nlohmann::json& j);

std::uint64_t scene_seed_for(const RunConfig& cfg, int episode_index);
std::uint64_t policy_seed_for(std::uint64_t scene_seed);

// Builds the policy for one episode; replaceable for scripted tests.
using PolicyFactory = std::function<std::unique_ptr<Policy>(const PolicyContext&)>;

// One sense -> integrate -> decide -> act episode. When `trace` is given a
// JSONL trace (header, one record per step, result) is written to it.
EpisodeResult run_episode(const RunConfig& cfg, int episode_index, std::ostream* trace = nullptr,
                          const PolicyFactory& factory = {});

struct MetricsSummary
{
  double sr = 0.0;
  double ar = 0.0;
  double gfr = 0.0;
  double d_mean = 0.0;
  double d_std = 0.0;
  double v_mean = 0.0;
  double v_std = 0.0;
  int episodes = 0;
};

MetricsSummary summarize(const std::vector<EpisodeResult>& results);

// Worker count: ACTPERMOMA_THREADS if set and positive, else the hardware
// concurrency.
int worker_count();

// Runs cfg.episodes episodes in parallel. Results are ordered by episode index
// and do not depend on the thread count. With `trace_dir`, each episode's
// trace goes to <trace_dir>/<index>.jsonl.
std::vector<EpisodeResult> run_episodes(const RunConfig& cfg, int threads = 0,
                                        const std::optional<std::filesystem::path>& trace_dir = std::nullopt);

// `run` command: episodes/*.jsonl traces, results.jsonl, metrics.csv and the
// resolved config.json under cfg.output_dir.
MetricsSummary run_and_write(const RunConfig& cfg, int threads = 0, bool write_traces = true);

std::vector<EpisodeResult> load_results(const std::filesystem::path& dir);

inline constexpr const char* kMetricsCsvHeader = "policy,scenario,hard,sr,ar,gfr,d_mean,d_std,v_mean,v_std,config_hash";
std::string metrics_csv_row(const RunConfig& cfg, const MetricsSummary& m);

struct ExperimentCell
{
  std::string label;
  RunConfig config;
};

// Hyperparameter, ablation and hard-grasp rows of the ablation tables.
// "table1" uses simple scenes, "table2" complex ones.
std::vector<ExperimentCell> experiment_preset(const std::string& name, const RunConfig& base);

// Writes metrics.csv (one row per cell), cells.json (labels and configs) and
// per-episode traces. A cell that throws gets a row of nan metrics and the run
// continues.
std::vector<std::optional<MetricsSummary>> run_experiment(const std::vector<ExperimentCell>& cells,
                                                          const std::filesystem::path& out_dir, int threads = 0,
                                                          bool write_traces = true);

enum class Metric
{
  Sr,
  Ar,
  Gfr,
  D,
  V
};

Metric metric_from_string(const std::string& s);
std::string to_string(Metric m);

enum class Verdict
{
  ABetter,
  BBetter,
  Inconclusive
};

std::string to_string(Verdict v);

struct Comparison
{
  Verdict verdict = Verdict::Inconclusive;
  double statistic = 0.0;  // z for rates, Welch t for d/v (a minus b)
  double p_value = 1.0;
  double a_value = 0.0;
  double b_value = 0.0;
};

// Rates: pooled two-proportion z-test with continuity correction. d and v:
// Welch's t-test. Two-sided at `alpha`; the better side is the higher rate for
// sr and the lower value otherwise. Throws InsufficientSamples below 30
// episodes per side.
Comparison compare(const std::vector<EpisodeResult>& a, const std::vector<EpisodeResult>& b, Metric metric,
                   double alpha = 0.05);

// Top-down SVG of a JSONL episode trace.
void render_topdown(const std::filesystem::path& trace, const std::filesystem::path& out);
std::string render_topdown_svg(const std::vector<nlohmann::json>& records);

}  // namespace actpermoma
