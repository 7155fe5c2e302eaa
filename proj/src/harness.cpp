#include "actpermoma/harness.hpp"

#include "actpermoma/serialization.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace actpermoma
{

using nlohmann::json;

namespace
{
constexpr std::uint64_t kPolicyStream = 0x9011C7;

const ReachabilityMaps& shared_maps()
{
  static const ReachabilityMaps maps;
  return maps;
}

json trace_to_json(const DecisionTrace& t)
{
  json goals = json::array();
  for (const auto& g : t.goals)
  {
    goals.push_back({{"goal_id", g.goal_id}, {"pose", to_json(g.pose)}});
  }
  json scores = json::array();
  for (const auto& s : t.scores)
  {
    scores.push_back({{"goal_id", s.goal_id}, {"j_ig", s.j_ig}, {"j_exec", s.j_exec}, {"utility", s.utility}});
  }
  json path = json::array();
  for (const auto& p : t.selected_path)
  {
    path.push_back(to_json(p));
  }
  return json{{"goals", goals},
              {"scores", scores},
              {"selected_goal", t.selected_goal},
              {"momentum_held", t.momentum_held},
              {"selected_path", path}};
}

bool grasp_is_stable(const Grasp& g, const std::vector<Grasp>& stable)
{
  for (const auto& s : stable)
  {
    if (s.voxel == g.voxel)
    {
      return true;
    }
  }
  return false;
}

CameraIntrinsics laser_intrinsics()
{
  CameraIntrinsics intr;
  intr.width = 64;
  intr.height = 16;
  intr.vertical_fov = deg2rad(30.0);  // 94 degrees horizontally
  intr.max_range = 3.0;
  return intr;
}

// Mutable state of one running episode.
struct World
{
  const RunConfig& cfg;
  const Scene& scene;
  TsdfGrid target;
  TsdfGrid nav;
  OccupancyGrid2 occupancy;
  std::vector<Grasp> tracked;
  std::vector<Grasp> stable;
  Pose2 robot;
  Pose3 cam;
  int views = 0;

  World(const RunConfig& c, const Scene& s, const Pose2& start)
    : cfg(c),
      scene(s),
      target(TsdfGrid::target_volume(s.target_center, c.sim.target_volume_size, c.sim.target_resolution)),
      nav(TsdfGrid::navigation_volume(s.arena, c.sim.nav_voxel_size)),
      robot(start),
      cam(Pose3::look_at(Vec3(start.x, start.y, c.sim.start_camera_height), s.target_center))
  {
  }

  // Renders and fuses the current view, then refreshes the occupancy map and
  // the grasp detections.
  void sense()
  {
    const DepthImage depth = render_depth(scene, cam, cfg.sim.sensor);
    integrate_depth(target, depth, cam);
    integrate_depth(nav, depth, cam);
    if (cfg.sim.laser_height > 0.0)
    {
      const Vec3 eye(robot.x, robot.y, cfg.sim.laser_height);
      for (int k = 0; k < 4; ++k)
      {
        const double heading = robot.theta + k * deg2rad(90.0);
        const Pose3 laser = Pose3::look_at(eye, eye + Vec3(std::cos(heading), std::sin(heading), 0.0));
        integrate_depth(nav, render_depth(scene, laser, laser_intrinsics()), laser);
      }
    }
    occupancy = project_occupancy(nav, cfg.planner.band_min, cfg.planner.band_max);
    const auto detected = detect_grasps(target, scene, cfg.planner.q_th, scene.seed, views, cfg.sim.detection);
    auto filtered = filter_stable(tracked, detected, cfg.planner.n_stab);
    tracked = std::move(filtered.tracked);
    stable = std::move(filtered.stable);
    ++views;
  }
};

json step_record(int iteration, int budget, const char* action, const Pose2& before, const Pose2& after,
                 const Pose3& cam, double displacement, bool view, const DecisionTrace& dt,
                 const std::vector<Grasp>& stable, int views)
{
  json grasps = json::array();
  for (const auto& g : stable)
  {
    grasps.push_back(to_json(g, views));
  }
  return json{{"type", "step"},
              {"iteration", iteration},
              {"budget", budget},
              {"action", action},
              {"robot_before", to_json(before)},
              {"robot_after", to_json(after)},
              {"cam", to_json(cam)},
              {"displacement", displacement},
              {"view", view},
              {"stable_grasps", grasps},
              {"planner", trace_to_json(dt)}};
}

void write_line(std::ostream* out, const json& j)
{
  if (out)
  {
    *out << j.dump() << '\n';
  }
}
}  // namespace

std::string to_string(Outcome o)
{
  switch (o)
  {
    case Outcome::Success:
      return "Success";
    case Outcome::Abort:
      return "Abort";
    case Outcome::GraspFailure:
      return "GraspFailure";
  }
  return "Abort";
}

Outcome outcome_from_string(const std::string& s)
{
  for (const auto o : {Outcome::Success, Outcome::Abort, Outcome::GraspFailure})
  {
    if (s == to_string(o))
    {
      return o;
    }
  }
  throw std::invalid_argument("unknown outcome '" + s + "'");
}

json to_json(const EpisodeResult& r)
{
  return json{{"outcome", to_string(r.outcome)},
              {"d_total", r.d_total},
              {"v_total", r.v_total},
              {"steps", r.steps},
              {"scene_seed", r.scene_seed},
              {"policy_seed", r.policy_seed},
              {"policy", to_string(r.policy)},
              {"grasp_attempts", r.grasp_attempts},
              {"safety_violations", r.safety_violations},
              {"detail", r.detail}};
}

EpisodeResult episode_result_from_json(const json& j)
{
  EpisodeResult r;
  r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
  r.d_total = j.at("d_total").get<double>();
  r.v_total = j.at("v_total").get<long>();
  r.steps = j.at("steps").get<int>();
  r.scene_seed = j.at("scene_seed").get<std::uint64_t>();
  r.policy_seed = j.at("policy_seed").get<std::uint64_t>();
  r.policy = policy_from_string(j.at("policy").get<std::string>());
  r.grasp_attempts = j.at("grasp_attempts").get<int>();
  r.safety_violations = j.at("safety_violations").get<int>();
  r.detail = j.at("detail").get<std::string>();
  return r;
}

std::uint64_t scene_seed_for(const RunConfig& cfg, int episode_index)
{
  return cfg.base_seed + static_cast<std::uint64_t>(episode_index);
}

std::uint64_t policy_seed_for(std::uint64_t scene_seed) { return Rng::derive(scene_seed, {kPolicyStream}).next_u64(); }

EpisodeResult run_episode(const RunConfig& cfg, int episode_index, std::ostream* trace, const PolicyFactory& factory)
{
  cfg.validate();
  EpisodeResult result;
  result.scene_seed = scene_seed_for(cfg, episode_index);
  result.policy_seed = policy_seed_for(result.scene_seed);
  result.policy = cfg.policy;

  json header{{"type", "header"},
              {"episode", episode_index},
              {"scene_seed", result.scene_seed},
              {"policy_seed", result.policy_seed},
              {"policy", to_string(cfg.policy)},
              {"config_hash", config_hash(cfg)}};

  Scene scene;
  Pose2 start;
  try
  {
    scene = generate_scene(cfg.scenario, cfg.hard_grasps, result.scene_seed, cfg.sim.scene);
    start = sample_start_pose(scene, result.scene_seed);
  }
  catch (const SceneGenFailure& e)
  {
    result.outcome = Outcome::Abort;
    result.detail = std::string("scene generation failed: ") + e.what();
    write_line(trace, header);
    write_line(trace, json{{"type", "result"}, {"result", to_json(result)}});
    return result;
  }

  header["scene"] = to_json(scene);
  header["start"] = to_json(start);
  write_line(trace, header);

  World world(cfg, scene, start);
  world.sense();

  PolicyContext ctx;
  ctx.planner = cfg.planner;
  ctx.ig_intrinsics = cfg.sim.ig_camera;
  ctx.maps = &shared_maps();
  ctx.seed = result.policy_seed;
  ctx.camera_height = cfg.sim.start_camera_height;
  auto policy = factory ? factory(ctx) : make_policy(cfg.policy, ctx);

  int budget = 0;
  // Guards against policies that never abort; every policy gives up once the
  // budget is spent, so this only trips on a bug.
  const int iteration_cap = 4 * cfg.planner.max_steps + 100;
  bool done = false;
  while (!done)
  {
    if (result.steps >= iteration_cap)
    {
      result.outcome = Outcome::Abort;
      result.detail = "iteration cap reached";
      break;
    }
    const Observation obs{world.target, world.occupancy, world.stable, scene.target_center, scene.target_bbox,
                          world.robot,  world.cam,       budget,       cfg.planner.max_steps};
    DecisionTrace dt;
    const PolicyDecision decision = policy->decide(obs, dt);
    ++result.steps;
    const Pose2 before = world.robot;

    if (const auto* move = std::get_if<MoveStep>(&decision))
    {
      const auto cell = world.occupancy.world_to_cell(move->base.position());
      if (world.occupancy.in_bounds(cell) && world.occupancy.at(cell) == CellState::Occupied)
      {
        ++result.safety_violations;
      }
      double displacement = 0.0;
      if (!base_collides(scene, move->base.position()))
      {
        displacement = (move->base.position() - world.robot.position()).norm();
        world.robot = move->base;
        world.cam = move->cam;
      }
      result.d_total += displacement;
      ++budget;
      world.sense();
      write_line(trace, step_record(result.steps, budget, "move", before, world.robot, world.cam, displacement, true,
                                    dt, world.stable, world.views));
    }
    else if (const auto* exec = std::get_if<ExecuteGrasp>(&decision))
    {
      ++result.grasp_attempts;
      double displacement = 0.0;
      if (!base_collides(scene, exec->base.position()))
      {
        displacement = (exec->base.position() - world.robot.position()).norm();
        world.robot = exec->base;
      }
      result.d_total += displacement;
      ExecutionResult er;
      if (!grasp_is_stable(exec->grasp, world.stable))
      {
        er.reason = FailureReason::NoMatchingTruthGrasp;
      }
      else
      {
        er = execute_grasp(scene, world.target, exec->grasp, world.robot, shared_maps(), cfg.sim.execution);
      }
      json record = step_record(result.steps, budget, "execute", before, world.robot, world.cam, displacement, false,
                                dt, world.stable, world.views);
      record["execution"] = {{"outcome", er.outcome == ExecutionOutcome::Succeeded ? "Succeeded" : "Failed"},
                             {"reason", to_string(er.reason)},
                             {"intrinsic_quality", er.intrinsic_quality},
                             {"reach", er.reach},
                             {"coverage", er.coverage},
                             {"grasp", to_json(exec->grasp, world.views)},
                             {"arm", to_string(exec->arm)}};
      write_line(trace, record);
      if (er.outcome == ExecutionOutcome::Succeeded)
      {
        result.outcome = Outcome::Success;
        done = true;
      }
      else if (er.reason == FailureReason::Unreachable)
      {
        // Out of reach: the arm never touches the object, so the robot may
        // reposition and try again at a cost in budget.
        policy->on_grasp_failed(exec->grasp);
        budget += cfg.sim.grasp_attempt_cost;
      }
      else
      {
        result.outcome = Outcome::GraspFailure;
        result.detail = to_string(er.reason);
        done = true;
      }
    }
    else
    {
      const auto& abort = std::get<Abort>(decision);
      write_line(trace, step_record(result.steps, budget, "abort", before, world.robot, world.cam, 0.0, false, dt,
                                    world.stable, world.views));
      result.outcome = Outcome::Abort;
      result.detail = abort.reason;
      done = true;
    }
  }

  result.v_total = world.views;
  write_line(trace, json{{"type", "result"}, {"result", to_json(result)}, {"occupancy", to_json(world.occupancy)}});
  return result;
}

int worker_count()
{
  if (const char* env = std::getenv("ACTPERMOMA_THREADS"))
  {
    const int n = std::atoi(env);
    if (n > 0)
    {
      return n;
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<EpisodeResult> run_episodes(const RunConfig& cfg, int threads,
                                        const std::optional<std::filesystem::path>& trace_dir)
{
  cfg.validate();
  if (trace_dir)
  {
    std::filesystem::create_directories(*trace_dir);
  }
  const int n = cfg.episodes;
  const int workers = std::clamp(threads > 0 ? threads : worker_count(), 1, n);
  std::vector<EpisodeResult> results(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto work = [&] {
    for (int i = next++; i < n; i = next++)
    {
      try
      {
        if (trace_dir)
        {
          char name[32];
          std::snprintf(name, sizeof(name), "%04d.jsonl", i);
          std::ofstream out(*trace_dir / name);
          if (!out)
          {
            throw IoError("cannot write trace " + (*trace_dir / name).string());
          }
          results[static_cast<std::size_t>(i)] = run_episode(cfg, i, &out);
        }
        else
        {
          results[static_cast<std::size_t>(i)] = run_episode(cfg, i);
        }
      }
      catch (...)
      {
        std::lock_guard lock(error_mutex);
        if (!error)
        {
          error = std::current_exception();
        }
        next = n;
      }
    }
  };

  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t)
  {
    pool.emplace_back(work);
  }
  work();
  for (auto& t : pool)
  {
    t.join();
  }
  if (error)
  {
    std::rethrow_exception(error);
  }
  return results;
}

std::string metrics_csv_row(const RunConfig& cfg, const MetricsSummary& m)
{
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.4f,%.4f,%.4f,%.6f,%.6f,%.6f,%.6f,%s", to_string(cfg.policy).c_str(),
                to_string(cfg.scenario).c_str(), cfg.hard_grasps ? 1 : 0, m.sr, m.ar, m.gfr, m.d_mean, m.d_std,
                m.v_mean, m.v_std, config_hash(cfg).c_str());
  return buf;
}

namespace
{
void write_text(const std::filesystem::path& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
  {
    throw IoError("cannot write " + path.string());
  }
  out << text;
  if (!out)
  {
    throw IoError("write failed for " + path.string());
  }
}
}  // namespace

MetricsSummary run_and_write(const RunConfig& cfg, int threads, bool write_traces)
{
  std::filesystem::create_directories(cfg.output_dir);
  write_text(cfg.output_dir / "config.json", to_json(cfg).dump(2) + "\n");
  const auto results = run_episodes(cfg, threads,
                                    write_traces ? std::optional(cfg.output_dir / "episodes") : std::nullopt);
  std::string lines;
  for (const auto& r : results)
  {
    lines += to_json(r).dump() + "\n";
  }
  write_text(cfg.output_dir / "results.jsonl", lines);
  const MetricsSummary m = summarize(results);
  write_text(cfg.output_dir / "metrics.csv", std::string(kMetricsCsvHeader) + "\n" + metrics_csv_row(cfg, m) + "\n");
  return m;
}

std::vector<EpisodeResult> load_results(const std::filesystem::path& dir)
{
  const auto path = std::filesystem::is_directory(dir) ? dir / "results.jsonl" : dir;
  std::ifstream in(path);
  if (!in)
  {
    throw IoError("cannot open results " + path.string());
  }
  std::vector<EpisodeResult> results;
  std::string line;
  while (std::getline(in, line))
  {
    if (line.empty())
    {
      continue;
    }
    try
    {
      results.push_back(episode_result_from_json(json::parse(line)));
    }
    catch (const std::exception& e)
    {
      throw IoError("malformed result in " + path.string() + ": " + e.what());
    }
  }
  return results;
}

std::vector<ExperimentCell> experiment_preset(const std::string& name, const RunConfig& base)
{
  ScenarioKind scenario;
  if (name == "table1")
  {
    scenario = ScenarioKind::Simple;
  }
  else if (name == "table2")
  {
    scenario = ScenarioKind::Complex;
  }
  else
  {
    throw ConfigError("unknown preset '" + name + "' (expected table1 or table2)");
  }

  RunConfig root = base;
  root.scenario = scenario;
  root.hard_grasps = false;
  root.policy = PolicyKind::ActPerMoMa;

  std::vector<ExperimentCell> cells;
  auto add = [&](const std::string& label, auto&& edit) {
    RunConfig c = root;
    edit(c);
    cells.push_back({label, c});
  };
  add("Quality 0.7", [](RunConfig& c) { c.planner.q_th = 0.7; });
  add("Quality 0.9", [](RunConfig& c) { c.planner.q_th = 0.9; });
  add("StableGrasp 1", [](RunConfig& c) { c.planner.n_stab = 1; });
  add("StableGrasp 5", [](RunConfig& c) { c.planner.n_stab = 5; });
  add("IGweight 3.0", [](RunConfig& c) { c.planner.w_ig = 3.0; });
  add("IGweight 0.2", [](RunConfig& c) { c.planner.w_ig = 0.2; });
  add("momentum 0", [](RunConfig& c) { c.planner.momentum = 0.0; });
  add("momentum 700", [](RunConfig& c) { c.planner.momentum = 700.0; });
  add("ActPerMoMa", [](RunConfig&) {});
  add("ActPerMoMa IG-only", [](RunConfig& c) { c.policy = PolicyKind::ActPerMoMaIgOnly; });
  add("ActPerMoMa no-weights", [](RunConfig& c) { c.policy = PolicyKind::ActPerMoMaNoWeights; });
  add("Hard grasps ActPerMoMa", [](RunConfig& c) { c.hard_grasps = true; });
  add("Hard grasps ActPerMoMa IG-only", [](RunConfig& c) {
    c.hard_grasps = true;
    c.policy = PolicyKind::ActPerMoMaIgOnly;
  });
  return cells;
}

std::vector<std::optional<MetricsSummary>> run_experiment(const std::vector<ExperimentCell>& cells,
                                                          const std::filesystem::path& out_dir, int threads,
                                                          bool write_traces)
{
  std::filesystem::create_directories(out_dir);
  std::vector<std::optional<MetricsSummary>> summaries;
  std::string csv = std::string(kMetricsCsvHeader) + ",label,status\n";
  json cells_json = json::array();
  for (std::size_t i = 0; i < cells.size(); ++i)
  {
    const auto& cell = cells[i];
    char dir_name[32];
    std::snprintf(dir_name, sizeof(dir_name), "cell_%02zu", i);
    RunConfig cfg = cell.config;
    cfg.output_dir = out_dir / dir_name;
    cells_json.push_back({{"label", cell.label}, {"dir", dir_name}, {"config", to_json(cfg)}});
    try
    {
      const auto m = run_and_write(cfg, threads, write_traces);
      summaries.emplace_back(m);
      csv += metrics_csv_row(cfg, m) + "," + cell.label + ",ok\n";
    }
    catch (const std::exception& e)
    {
      summaries.emplace_back(std::nullopt);
      MetricsSummary nan_row;
      const double nan = std::numeric_limits<double>::quiet_NaN();
      nan_row.sr = nan_row.ar = nan_row.gfr = nan;
      nan_row.d_mean = nan_row.d_std = nan_row.v_mean = nan_row.v_std = nan;
      std::string reason = e.what();
      std::replace(reason.begin(), reason.end(), ',', ';');
      std::replace(reason.begin(), reason.end(), '\n', ' ');
      csv += metrics_csv_row(cfg, nan_row) + "," + cell.label + ",failed: " + reason + "\n";
    }
  }
  write_text(out_dir / "metrics.csv", csv);
  write_text(out_dir / "cells.json", cells_json.dump(2) + "\n");
  return summaries;
}

}  // namespace actpermoma
