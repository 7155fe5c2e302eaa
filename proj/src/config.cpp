#include "actpermoma/harness.hpp"

#include <fstream>
#include <sstream>

namespace actpermoma
{

using nlohmann::json;

namespace
{
template <class S>
struct Field
{
  const char* name;
  std::variant<double S::*, int S::*> member;
};

template <class S>
json fields_to_json(const S& s, const std::vector<Field<S>>& fields)
{
  json j = json::object();
  for (const auto& f : fields)
  {
    std::visit([&](auto m) { j[f.name] = s.*m; }, f.member);
  }
  return j;
}

void require_object(const json& j, const std::string& where)
{
  if (!j.is_object())
  {
    throw ConfigError("config: '" + where + "' must be an object");
  }
}

// Reads known numeric keys; returns the keys it did not recognize.
template <class S>
std::vector<std::string> fields_from_json(const json& j, S& s, const std::vector<Field<S>>& fields,
                                          const std::string& where)
{
  require_object(j, where);
  std::vector<std::string> rest;
  for (const auto& [key, value] : j.items())
  {
    bool found = false;
    for (const auto& f : fields)
    {
      if (key != f.name)
      {
        continue;
      }
      found = true;
      if (!value.is_number())
      {
        throw ConfigError("config: '" + where + "." + key + "' must be a number");
      }
      std::visit(
        [&](auto m) {
          using T = std::remove_reference_t<decltype(s.*m)>;
          if constexpr (std::is_same_v<T, int>)
          {
            if (!value.is_number_integer())
            {
              throw ConfigError("config: '" + where + "." + key + "' must be an integer");
            }
          }
          s.*m = value.template get<T>();
        },
        f.member);
    }
    if (!found)
    {
      rest.push_back(key);
    }
  }
  return rest;
}

void reject(const std::vector<std::string>& keys, const std::string& where)
{
  if (!keys.empty())
  {
    throw ConfigError("config: unknown key '" + where + "." + keys.front() + "'");
  }
}

const std::vector<Field<PlannerConfig>>& planner_fields()
{
  static const std::vector<Field<PlannerConfig>> f{
    {"n_b", &PlannerConfig::n_b},
    {"q_th", &PlannerConfig::q_th},
    {"n_stab", &PlannerConfig::n_stab},
    {"w_ig", &PlannerConfig::w_ig},
    {"w_exec", &PlannerConfig::w_exec},
    {"momentum", &PlannerConfig::momentum},
    {"reach_radius", &PlannerConfig::reach_radius},
    {"exec_threshold", &PlannerConfig::exec_threshold},
    {"cam_spacing", &PlannerConfig::cam_spacing},
    {"max_steps", &PlannerConfig::max_steps},
    {"step_size", &PlannerConfig::step_size},
    {"exec_scale", &PlannerConfig::exec_scale},
    {"goal_radius_min", &PlannerConfig::goal_radius_min},
    {"goal_radius_max", &PlannerConfig::goal_radius_max},
    {"torso_min", &PlannerConfig::torso_min},
    {"torso_max", &PlannerConfig::torso_max},
    {"unknown_cost", &PlannerConfig::unknown_cost},
    {"band_min", &PlannerConfig::band_min},
    {"band_max", &PlannerConfig::band_max},
  };
  return f;
}

const std::vector<Field<CameraIntrinsics>>& sensor_fields()
{
  static const std::vector<Field<CameraIntrinsics>> f{
    {"width", &CameraIntrinsics::width},
    {"height", &CameraIntrinsics::height},
    {"vertical_fov", &CameraIntrinsics::vertical_fov},
    {"max_range", &CameraIntrinsics::max_range},
  };
  return f;
}

const std::vector<Field<ExecutionParams>>& execution_fields()
{
  static const std::vector<Field<ExecutionParams>> f{
    {"min_intrinsic", &ExecutionParams::min_intrinsic},
    {"min_reachability", &ExecutionParams::min_reachability},
    {"min_coverage", &ExecutionParams::min_coverage},
    {"match_voxels", &ExecutionParams::match_voxels},
  };
  return f;
}

const std::vector<Field<DetectionParams>>& detection_fields()
{
  static const std::vector<Field<DetectionParams>> f{
    {"noise", &DetectionParams::noise},
    {"ball_voxels", &DetectionParams::ball_voxels},
    {"coverage_lo", &DetectionParams::coverage_lo},
    {"coverage_hi", &DetectionParams::coverage_hi},
  };
  return f;
}

const std::vector<Field<SceneParams>>& scene_fields()
{
  static const std::vector<Field<SceneParams>> f{
    {"table_half", &SceneParams::table_half},
    {"table_height", &SceneParams::table_height},
    {"object_min_edge", &SceneParams::object_min_edge},
    {"object_max_edge", &SceneParams::object_max_edge},
    {"bbox_margin", &SceneParams::bbox_margin},
    {"min_grasps", &SceneParams::min_grasps},
    {"max_grasps", &SceneParams::max_grasps},
    {"min_intrinsic", &SceneParams::min_intrinsic},
    {"max_intrinsic", &SceneParams::max_intrinsic},
    {"clutter_near_target", &SceneParams::clutter_near_target},
    {"top_down_fraction", &SceneParams::top_down_fraction},
    {"max_attempts", &SceneParams::max_attempts},
  };
  return f;
}

const std::vector<Field<SimulationParams>>& sim_fields()
{
  static const std::vector<Field<SimulationParams>> f{
    {"target_volume_size", &SimulationParams::target_volume_size},
    {"target_resolution", &SimulationParams::target_resolution},
    {"nav_voxel_size", &SimulationParams::nav_voxel_size},
    {"start_camera_height", &SimulationParams::start_camera_height},
    {"grasp_attempt_cost", &SimulationParams::grasp_attempt_cost},
    {"laser_height", &SimulationParams::laser_height},
  };
  return f;
}

json sim_to_json(const SimulationParams& s)
{
  json j = fields_to_json(s, sim_fields());
  j["sensor"] = fields_to_json(s.sensor, sensor_fields());
  j["ig_camera"] = fields_to_json(s.ig_camera, sensor_fields());
  j["execution"] = fields_to_json(s.execution, execution_fields());
  j["detection"] = fields_to_json(s.detection, detection_fields());
  j["scene"] = fields_to_json(s.scene, scene_fields());
  return j;
}

void sim_from_json(const json& j, SimulationParams& s)
{
  std::vector<std::string> unknown;
  for (const auto& key : fields_from_json(j, s, sim_fields(), "sim"))
  {
    const json& v = j.at(key);
    if (key == "sensor")
    {
      reject(fields_from_json(v, s.sensor, sensor_fields(), "sim.sensor"), "sim.sensor");
    }
    else if (key == "ig_camera")
    {
      reject(fields_from_json(v, s.ig_camera, sensor_fields(), "sim.ig_camera"), "sim.ig_camera");
    }
    else if (key == "execution")
    {
      reject(fields_from_json(v, s.execution, execution_fields(), "sim.execution"), "sim.execution");
    }
    else if (key == "detection")
    {
      reject(fields_from_json(v, s.detection, detection_fields(), "sim.detection"), "sim.detection");
    }
    else if (key == "scene")
    {
      reject(fields_from_json(v, s.scene, scene_fields(), "sim.scene"), "sim.scene");
    }
    else
    {
      unknown.push_back(key);
    }
  }
  reject(unknown, "sim");
}

std::string get_string(const json& v, const std::string& key)
{
  if (!v.is_string())
  {
    throw ConfigError("config: '" + key + "' must be a string");
  }
  return v.get<std::string>();
}
}  // namespace

void RunConfig::validate() const
{
  if (episodes < 1)
  {
    throw ConfigError("config: episodes must be >= 1");
  }
  try
  {
    planner.validate();
    sim.sensor.validate();
    sim.ig_camera.validate();
  }
  catch (const std::invalid_argument& e)
  {
    throw ConfigError(e.what());
  }
  if (sim.target_resolution < 4 || !(sim.target_volume_size > 0.0) ||
      !(sim.nav_voxel_size > 0.0) || sim.grasp_attempt_cost < 0)
  {
    throw ConfigError("config: invalid simulation parameters");
  }
}

json to_json(const RunConfig& cfg)
{
  return json{{"planner", fields_to_json(cfg.planner, planner_fields())},
              {"scenario", to_string(cfg.scenario)},
              {"hard_grasps", cfg.hard_grasps},
              {"episodes", cfg.episodes},
              {"base_seed", cfg.base_seed},
              {"policy", to_string(cfg.policy)},
              {"output_dir", cfg.output_dir.string()},
              {"sim", sim_to_json(cfg.sim)}};
}

RunConfig run_config_from_json(const json& j, const RunConfig& base)
{
  require_object(j, "<root>");
  RunConfig cfg = base;
  try
  {
    for (const auto& [key, v] : j.items())
    {
      if (key == "planner")
      {
        reject(fields_from_json(v, cfg.planner, planner_fields(), "planner"), "planner");
      }
      else if (key == "scenario")
      {
        cfg.scenario = scenario_from_string(get_string(v, key));
      }
      else if (key == "hard_grasps")
      {
        if (!v.is_boolean())
        {
          throw ConfigError("config: 'hard_grasps' must be a boolean");
        }
        cfg.hard_grasps = v.get<bool>();
      }
      else if (key == "episodes")
      {
        if (!v.is_number_integer())
        {
          throw ConfigError("config: 'episodes' must be an integer");
        }
        cfg.episodes = v.get<int>();
      }
      else if (key == "base_seed")
      {
        if (!v.is_number_unsigned())
        {
          throw ConfigError("config: 'base_seed' must be a non-negative integer");
        }
        cfg.base_seed = v.get<std::uint64_t>();
      }
      else if (key == "policy")
      {
        cfg.policy = policy_from_string(get_string(v, key));
      }
      else if (key == "output_dir")
      {
        cfg.output_dir = get_string(v, key);
      }
      else if (key == "sim")
      {
        sim_from_json(v, cfg.sim);
      }
      else
      {
        throw ConfigError("config: unknown key '" + key + "'");
      }
    }
  }
  catch (const std::invalid_argument& e)
  {
    throw ConfigError(std::string("config: ") + e.what());
  }
  catch (const json::exception& e)
  {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base)
{
  std::ifstream in(path);
  if (!in)
  {
    throw IoError("cannot open config " + path.string());
  }
  json j;
  try
  {
    j = json::parse(in);
  }
  catch (const json::exception& e)
  {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j, base);
}

std::string config_hash(const RunConfig& cfg)
{
  json j = to_json(cfg);
  j.erase("episodes");
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (const unsigned char c : text)
  {
    h = (h ^ c) * 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

}  // namespace actpermoma
