#include "actpermoma/planning.hpp"

#include "actpermoma/rng.hpp"

#include <queue>
#include <tuple>

namespace actpermoma
{

void PlannerConfig::validate() const
{
  const auto require = [](bool ok, const char* what) {
    if (!ok)
    {
      throw std::invalid_argument(std::string("planner config: ") + what);
    }
  };
  require(n_b >= 1, "n_b must be >= 1");
  require(q_th >= 0.0 && q_th <= 1.0, "q_th must be in [0, 1]");
  require(n_stab >= 1, "n_stab must be >= 1");
  require(w_ig >= 0.0 && w_exec >= 0.0, "weights must be non-negative");
  require(momentum >= 0.0, "momentum must be non-negative");
  require(reach_radius > 0.0, "reach_radius must be positive");
  require(exec_threshold >= 0.0, "exec_threshold must be non-negative");
  require(cam_spacing > 0.0, "cam_spacing must be positive");
  require(max_steps >= 1, "max_steps must be >= 1");
  require(step_size > 0.0, "step_size must be positive");
  require(exec_scale > 0.0, "exec_scale must be positive");
  require(goal_radius_min > 0.0 && goal_radius_min <= goal_radius_max, "goal annulus must be 0 < min <= max");
  require(torso_min > 0.0 && torso_min <= torso_max, "torso band must be 0 < min <= max");
  require(unknown_cost >= 1.0, "unknown_cost must be >= 1");
  require(band_min < band_max, "occupancy band must be non-empty");
}

std::vector<BaseGoal> sample_base_goals(const OccupancyGrid2& occ, const Vec3& target, int n_b, std::uint64_t seed,
                                        double r_min, double r_max, double base_radius)
{
  if (n_b < 1)
  {
    throw std::invalid_argument("sample_base_goals: n_b must be >= 1");
  }
  const Vec2 t = target.head<2>();
  std::vector<BaseGoal> goals;
  for (int slot = 0; slot < n_b; ++slot)
  {
    Rng rng = Rng::derive(seed, {0x60A15, static_cast<std::uint64_t>(slot)});
    for (int attempt = 0; attempt < 10; ++attempt)
    {
      const double angle = 2.0 * kPi * (slot + rng.uniform()) / n_b;
      const double r = rng.uniform(r_min, r_max);
      const Vec2 p = t + r * Vec2(std::cos(angle), std::sin(angle));
      if (!occ.disc_hits_occupied(p, base_radius))
      {
        goals.push_back({Pose2::facing(p, t), slot});
        break;
      }
    }
  }
  if (goals.empty())
  {
    throw NoFeasibleGoals("no feasible base goal around the target");
  }
  return goals;
}

TraversabilityMap::TraversabilityMap(const OccupancyGrid2& occ, double robot_radius)
  : occ_(occ), radius_(robot_radius), free_(static_cast<std::size_t>(occ.nx()) * occ.ny(), 1)
{
  const double cs = occ.cell_size();
  const Vec2 lo = occ.origin();
  const Vec2 hi = occ.origin() + cs * Vec2(occ.nx(), occ.ny());
  for (int y = 0; y < occ.ny(); ++y)
  {
    for (int x = 0; x < occ.nx(); ++x)
    {
      const Vec2 c = occ.cell_center({x, y});
      if (c.x() - radius_ < lo.x() || c.y() - radius_ < lo.y() || c.x() + radius_ > hi.x() || c.y() + radius_ > hi.y())
      {
        free_[occ.linear({x, y})] = 0;
      }
    }
  }
  // Dilate every Occupied cell by the robot disc: a center is blocked when
  // its distance to the occupied square is below the radius.
  const int k = static_cast<int>(std::ceil(radius_ / cs)) + 1;
  const double r2 = radius_ * radius_;
  for (int y = 0; y < occ.ny(); ++y)
  {
    for (int x = 0; x < occ.nx(); ++x)
    {
      if (occ.at({x, y}) != CellState::Occupied)
      {
        continue;
      }
      for (int dy = -k; dy <= k; ++dy)
      {
        for (int dx = -k; dx <= k; ++dx)
        {
          const Index2 c{x + dx, y + dy};
          if (!occ.in_bounds(c))
          {
            continue;
          }
          const double gx = std::max(std::abs(dx) - 0.5, 0.0) * cs;
          const double gy = std::max(std::abs(dy) - 0.5, 0.0) * cs;
          if (gx * gx + gy * gy < r2)
          {
            free_[occ.linear(c)] = 0;
          }
        }
      }
    }
  }
}

std::optional<GridPath> plan_path(const TraversabilityMap& nav, const Pose2& start, const Pose2& goal,
                                  double unknown_cost)
{
  const OccupancyGrid2& occ = nav.occupancy();
  const Index2 s = occ.world_to_cell(start.position());
  const Index2 g = occ.world_to_cell(goal.position());
  if (!occ.in_bounds(s) || !occ.in_bounds(g))
  {
    return std::nullopt;
  }
  const bool goal_ok = s == g || nav.traversable(g) || !occ.disc_hits_occupied(goal.position(), nav.robot_radius());
  if (!goal_ok)
  {
    return std::nullopt;
  }
  const auto usable = [&](const Index2& c) { return c == s || c == g || nav.traversable(c); };

  const double cs = occ.cell_size();
  const auto heuristic = [&](const Index2& c) {
    const int dx = std::abs(c.x - g.x);
    const int dy = std::abs(c.y - g.y);
    return cs * (std::max(dx, dy) + (std::sqrt(2.0) - 1.0) * std::min(dx, dy));
  };

  const std::size_t n = static_cast<std::size_t>(occ.nx()) * occ.ny();
  std::vector<double> cost(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> parent(n, n);
  std::vector<std::uint8_t> closed(n, 0);
  using Entry = std::tuple<double, double, std::size_t>;  // f, h, cell
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;

  const std::size_t si = occ.linear(s);
  const std::size_t gi = occ.linear(g);
  cost[si] = 0.0;
  open.emplace(heuristic(s), heuristic(s), si);
  constexpr std::array<std::array<int, 2>, 8> kMoves{
    {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};
  while (!open.empty())
  {
    const auto [f, h, ci] = open.top();
    open.pop();
    if (closed[ci])
    {
      continue;
    }
    closed[ci] = 1;
    if (ci == gi)
    {
      break;
    }
    const Index2 c{static_cast<int>(ci % occ.nx()), static_cast<int>(ci / occ.nx())};
    for (const auto& [dx, dy] : kMoves)
    {
      const Index2 nb{c.x + dx, c.y + dy};
      if (!occ.in_bounds(nb) || !usable(nb))
      {
        continue;
      }
      const bool diagonal = dx != 0 && dy != 0;
      if (diagonal && (!usable({c.x + dx, c.y}) || !usable({c.x, c.y + dy})))
      {
        continue;
      }
      const std::size_t ni = occ.linear(nb);
      if (closed[ni])
      {
        continue;
      }
      double step = diagonal ? cs * std::sqrt(2.0) : cs;
      if (occ.at(nb) == CellState::Unknown)
      {
        step *= unknown_cost;
      }
      const double candidate = cost[ci] + step;
      if (candidate < cost[ni])
      {
        cost[ni] = candidate;
        parent[ni] = ci;
        const double hn = heuristic(nb);
        open.emplace(candidate + hn, hn, ni);
      }
    }
  }
  if (!closed[gi])
  {
    return std::nullopt;
  }

  GridPath path;
  path.cost = cost[gi];
  for (std::size_t i = gi; i != n; i = parent[i])
  {
    path.cells.push_back({static_cast<int>(i % occ.nx()), static_cast<int>(i / occ.nx())});
  }
  std::reverse(path.cells.begin(), path.cells.end());
  path.points.push_back(start.position());
  for (std::size_t i = 1; i + 1 < path.cells.size(); ++i)
  {
    path.points.push_back(occ.cell_center(path.cells[i]));
  }
  if (path.cells.size() > 1 || (goal.position() - start.position()).norm() > 0.0)
  {
    path.points.push_back(goal.position());
  }
  return path;
}

std::optional<GridPath> plan_path(const OccupancyGrid2& occ, const Pose2& start, const Pose2& goal,
                                  double robot_radius, double unknown_cost)
{
  return plan_path(TraversabilityMap(occ, robot_radius), start, goal, unknown_cost);
}

Vec2 point_along(const std::vector<Vec2>& polyline, double s)
{
  if (polyline.empty())
  {
    throw std::invalid_argument("point_along: empty polyline");
  }
  double remaining = std::max(s, 0.0);
  for (std::size_t i = 1; i < polyline.size(); ++i)
  {
    const Vec2 seg = polyline[i] - polyline[i - 1];
    const double len = seg.norm();
    if (remaining <= len)
    {
      return len > 0.0 ? Vec2(polyline[i - 1] + (remaining / len) * seg) : polyline[i];
    }
    remaining -= len;
  }
  return polyline.back();
}

CandidatePath sample_camera_poses(const std::vector<Vec2>& base_path, const Vec3& target, double cam_spacing,
                                  double torso_min, double torso_max, std::uint64_t seed, int goal_id,
                                  const Pose3* current_cam)
{
  if (base_path.empty())
  {
    throw std::invalid_argument("sample_camera_poses: empty base path");
  }
  if (!(cam_spacing > 0.0))
  {
    throw std::invalid_argument("sample_camera_poses: cam_spacing must be positive");
  }
  CandidatePath path;
  path.base_path = base_path;
  path.goal_id = goal_id;
  path.length = polyline_length(base_path);
  path.goal = Pose2::facing(base_path.back(), target.head<2>());

  std::vector<double> arcs;
  for (int k = 0; k * cam_spacing < path.length - 1e-9; ++k)
  {
    arcs.push_back(k * cam_spacing);
  }
  arcs.push_back(path.length);

  for (std::size_t i = 0; i < arcs.size(); ++i)
  {
    PathWaypoint wp;
    wp.arc_length = arcs[i];
    const Vec2 p = i + 1 == arcs.size() ? base_path.back() : point_along(base_path, arcs[i]);
    wp.base = Pose2::facing(p, target.head<2>());
    if (i == 0 && current_cam)
    {
      wp.cam = *current_cam;
    }
    else
    {
      Rng rng = Rng::derive(seed, {0x70850, static_cast<std::uint64_t>(goal_id), i});
      const double height = rng.uniform(torso_min, torso_max);
      wp.cam = Pose3::look_at(Vec3(p.x(), p.y(), height), target);
    }
    path.waypoints.push_back(wp);
  }
  return path;
}

std::vector<PathScore> score_paths(const std::vector<CandidatePath>& paths, const TsdfGrid& tsdf,
                                   const std::vector<Grasp>& grasps, const ReachabilityMaps& maps,
                                   const CameraIntrinsics& ig_intr, const Aabb& target_bbox, bool weighted)
{
  std::vector<PathScore> scores;
  scores.reserve(paths.size());
  for (const auto& p : paths)
  {
    PathScore s;
    s.goal_id = p.goal_id;
    s.j_ig = path_ig(tsdf, p, ig_intr, target_bbox, weighted);
    s.exec = exec_utility(grasps, p, maps, weighted);
    s.j_exec = s.exec.value;
    scores.push_back(s);
  }
  return scores;
}

Selection select_path(const std::vector<CandidatePath>& paths, std::vector<PathScore>& scores,
                      const PlannerConfig& cfg, const PlannerState& st, bool stable_grasp)
{
  if (paths.empty() || paths.size() != scores.size())
  {
    throw std::invalid_argument("select_path: need one score per path and at least one path");
  }
  Selection sel;
  sel.state = st;
  sel.state.grasp_found = st.grasp_found || stable_grasp;
  const double w_ig = sel.state.grasp_found ? cfg.w_ig : 1.0;
  for (auto& s : scores)
  {
    s.utility = w_ig * s.j_ig + cfg.w_exec * cfg.exec_scale * s.j_exec;
  }

  // Higher utility, then shorter path, then lower goal id.
  const auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a].utility != scores[b].utility)
    {
      return scores[a].utility > scores[b].utility;
    }
    if (paths[a].length != paths[b].length)
    {
      return paths[a].length < paths[b].length;
    }
    return paths[a].goal_id < paths[b].goal_id;
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < paths.size(); ++i)
  {
    if (better(i, best))
    {
      best = i;
    }
  }
  std::size_t chosen = best;
  if (st.prev_goal_id && cfg.momentum > 0.0)
  {
    for (std::size_t i = 0; i < paths.size(); ++i)
    {
      if (paths[i].goal_id == *st.prev_goal_id)
      {
        if (!(scores[best].utility > scores[i].utility + cfg.momentum))
        {
          chosen = i;
          sel.momentum_held = i != best;
        }
        break;
      }
    }
  }
  sel.index = static_cast<int>(chosen);
  sel.state.prev_goal_id = paths[chosen].goal_id;
  sel.state.prev_goal_utility = scores[chosen].utility;
  return sel;
}

Pose2 step_along(const Pose2& robot, const CandidatePath& path, double step_size, const Vec3& target)
{
  if (path.base_path.empty())
  {
    return Pose2::facing(robot.position(), target.head<2>());
  }
  const Vec2 p = point_along(path.base_path, std::min(step_size, path.length));
  return Pose2::facing(p, target.head<2>());
}

bool should_execute(const CandidatePath& path, double j_exec, const PlannerConfig& cfg)
{
  return path.length <= cfg.step_size + 1e-9 && j_exec >= cfg.exec_threshold;
}

}  // namespace actpermoma
