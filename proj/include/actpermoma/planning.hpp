#pragma once

#include "actpermoma/candidate_path.hpp"
#include "actpermoma/grasping.hpp"
#include "actpermoma/perception.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace actpermoma
{

class NoFeasibleGoals : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct PlannerConfig
{
  int n_b = 16;
  double q_th = 0.8;
  int n_stab = 1;
  double w_ig = 0.2;
  double w_exec = 1.0;
  double momentum = 800.0;
  double reach_radius = 0.85;
  double exec_threshold = 0.15;
  double cam_spacing = 0.5;
  int max_steps = 400;

  double step_size = 0.2;
  // Converts J_exec to the voxel-count scale of J_IG.
  double exec_scale = 1000.0;
  double goal_radius_min = 0.55;
  double goal_radius_max = 0.85;
  double torso_min = 1.1;
  double torso_max = 1.3;
  double unknown_cost = 1.05;
  // Height band of the base/torso used for the navigation occupancy map.
  double band_min = 0.1;
  double band_max = 1.6;

  void validate() const;
};

struct PlannerState
{
  std::optional<int> prev_goal_id;
  double prev_goal_utility = 0.0;
  bool grasp_found = false;
};

struct BaseGoal
{
  Pose2 pose;
  int goal_id = -1;
};

// Up to n_b goals on the annulus [r_min, r_max] around `target`, one per
// angular stratum, facing the target. Infeasible draws are retried up to 10
// times per stratum; a stratum's draws depend only on (seed, stratum).
std::vector<BaseGoal> sample_base_goals(const OccupancyGrid2& occ, const Vec3& target, int n_b, std::uint64_t seed,
                                        double r_min = 0.55, double r_max = 0.85, double base_radius = kBaseRadius);

// Cells whose center admits the robot disc (no overlap with Occupied cells,
// fully inside the grid).
class TraversabilityMap
{
public:
  TraversabilityMap(const OccupancyGrid2& occ, double robot_radius);

  const OccupancyGrid2& occupancy() const { return occ_; }
  double robot_radius() const { return radius_; }
  bool traversable(const Index2& c) const { return occ_.in_bounds(c) && free_[occ_.linear(c)] != 0; }

private:
  OccupancyGrid2 occ_;
  double radius_;
  std::vector<std::uint8_t> free_;
};

struct GridPath
{
  std::vector<Index2> cells;
  // Start position, interior cell centers, goal position.
  std::vector<Vec2> points;
  double cost = 0.0;  // grid cost including the Unknown multiplier
};

// 8-connected A* without corner cutting. Steps into Unknown cells cost
// `unknown_cost` times their length. The start cell is always usable; the goal
// cell is usable when the exact goal position admits the robot disc.
std::optional<GridPath> plan_path(const TraversabilityMap& nav, const Pose2& start, const Pose2& goal,
                                  double unknown_cost = 1.05);
std::optional<GridPath> plan_path(const OccupancyGrid2& occ, const Pose2& start, const Pose2& goal,
                                  double robot_radius = kBaseRadius, double unknown_cost = 1.05);

// Point at arc length `s` along the polyline, clamped to its ends.
Vec2 point_along(const std::vector<Vec2>& polyline, double s);

// Camera views every `cam_spacing` meters of arc length plus one at the goal,
// each looking at `target` from a seeded torso height. When `current_cam` is
// given it is used for the view at arc length 0.
CandidatePath sample_camera_poses(const std::vector<Vec2>& base_path, const Vec3& target, double cam_spacing,
                                  double torso_min, double torso_max, std::uint64_t seed, int goal_id,
                                  const Pose3* current_cam = nullptr);

struct PathScore
{
  int goal_id = -1;
  double j_ig = 0.0;
  double j_exec = 0.0;
  double utility = 0.0;
  ExecUtility exec;
};

// J_IG and J_exec of every path; `weighted = false` drops the distance and
// length scaling from both.
std::vector<PathScore> score_paths(const std::vector<CandidatePath>& paths, const TsdfGrid& tsdf,
                                   const std::vector<Grasp>& grasps, const ReachabilityMaps& maps,
                                   const CameraIntrinsics& ig_intr, const Aabb& target_bbox, bool weighted = true);

struct Selection
{
  int index = -1;
  PlannerState state;
  bool momentum_held = false;
};

// Receding-horizon choice among `paths` given their scores; fills in
// scores[i].utility. `stable_grasp` latches state.grasp_found, switching the
// IG weight from 1 to cfg.w_ig.
Selection select_path(const std::vector<CandidatePath>& paths, std::vector<PathScore>& scores,
                      const PlannerConfig& cfg, const PlannerState& st, bool stable_grasp);

// Base pose after moving at most `step_size` along the path, facing `target`.
Pose2 step_along(const Pose2& robot, const CandidatePath& path, double step_size, const Vec3& target);

// The robot is within one step of the goal and the grasp is worth executing.
bool should_execute(const CandidatePath& path, double j_exec, const PlannerConfig& cfg);

}  // namespace actpermoma
