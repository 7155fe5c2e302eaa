#pragma once

#include "actpermoma/geom.hpp"

#include <vector>

namespace actpermoma
{

struct PathWaypoint
{
  Pose2 base;
  Pose3 cam;
  // Along-path base distance from the robot's current pose.
  double arc_length = 0.0;
};

// One candidate trajectory toward a base goal. `base_path` is the dense
// collision-checked polyline (consecutive points at most one grid step
// apart); `waypoints` are the camera views sampled along it, the last one at
// the goal.
struct CandidatePath
{
  std::vector<PathWaypoint> waypoints;
  std::vector<Vec2> base_path;
  Pose2 goal;
  int goal_id = -1;
  double length = 0.0;
};

double polyline_length(const std::vector<Vec2>& points);

}  // namespace actpermoma
