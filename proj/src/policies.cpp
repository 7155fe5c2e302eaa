#include "actpermoma/policies.hpp"

namespace actpermoma
{

namespace
{
struct PolicyName
{
  PolicyKind kind;
  const char* name;
};

constexpr std::array<PolicyName, 6> kPolicyNames{{{PolicyKind::ActPerMoMa, "ActPerMoMa"},
                                                  {PolicyKind::ActPerMoMaIgOnly, "ActPerMoMaIgOnly"},
                                                  {PolicyKind::ActPerMoMaNoWeights, "ActPerMoMaNoWeights"},
                                                  {PolicyKind::Naive, "Naive"},
                                                  {PolicyKind::Random, "Random"},
                                                  {PolicyKind::BreyerNbv, "BreyerNbv"}}};

constexpr double kArrivalTol = 1e-6;

double planar_distance(const Pose2& robot, const Vec3& target) { return (robot.position() - target.head<2>()).norm(); }

// Highest quality; the grasp list is ordered by voxel, so ties keep the
// lowest voxel.
const Grasp* best_quality(const std::vector<Grasp>& grasps)
{
  const Grasp* best = nullptr;
  for (const auto& g : grasps)
  {
    if (!best || g.quality > best->quality)
    {
      best = &g;
    }
  }
  return best;
}

ExecuteGrasp execute_from(const Grasp& g, const Pose2& base, const ReachabilityMaps& maps)
{
  return {g, reachability(maps, g.pose, base).arm, base};
}

Pose3 head_camera(const Pose2& base, double height, const Vec3& target)
{
  return Pose3::look_at(Vec3(base.x, base.y, height), target);
}

// One step along an A* route to `goal`, or nothing when there is no route.
std::optional<MoveStep> step_toward(const TraversabilityMap& nav, const Observation& obs, const Pose2& goal,
                                    const PlannerConfig& cfg, double cam_height, DecisionTrace& trace)
{
  const auto route = plan_path(nav, obs.robot, goal, cfg.unknown_cost);
  if (!route)
  {
    return std::nullopt;
  }
  CandidatePath path;
  path.base_path = route->points;
  path.length = polyline_length(route->points);
  path.goal = goal;
  trace.selected_path = route->points;
  const Pose2 next = step_along(obs.robot, path, cfg.step_size, obs.target_center);
  return MoveStep{next, head_camera(next, cam_height, obs.target_center)};
}
}  // namespace

std::string to_string(PolicyKind k)
{
  for (const auto& p : kPolicyNames)
  {
    if (p.kind == k)
    {
      return p.name;
    }
  }
  return "unknown";
}

PolicyKind policy_from_string(const std::string& s)
{
  for (const auto& p : kPolicyNames)
  {
    if (s == p.name)
    {
      return p.kind;
    }
  }
  throw std::invalid_argument("unknown policy '" + s + "'");
}

const std::vector<PolicyKind>& all_policies()
{
  static const std::vector<PolicyKind> kinds = [] {
    std::vector<PolicyKind> v;
    for (const auto& p : kPolicyNames)
    {
      v.push_back(p.kind);
    }
    return v;
  }();
  return kinds;
}

std::vector<Grasp> Policy::usable_grasps(const std::vector<Grasp>& stable) const
{
  std::vector<Grasp> out;
  for (const auto& g : stable)
  {
    if (!failed_voxels_.contains(g.voxel))
    {
      out.push_back(g);
    }
  }
  return out;
}

std::unique_ptr<Policy> make_policy(PolicyKind kind, const PolicyContext& ctx)
{
  if (!ctx.maps)
  {
    throw std::invalid_argument("make_policy: reachability maps required");
  }
  ctx.planner.validate();
  switch (kind)
  {
    case PolicyKind::ActPerMoMa:
      return std::make_unique<ActPerMoMaPolicy>(ctx, ActPerMoMaPolicy::Variant::Full);
    case PolicyKind::ActPerMoMaIgOnly:
      return std::make_unique<ActPerMoMaPolicy>(ctx, ActPerMoMaPolicy::Variant::IgOnly);
    case PolicyKind::ActPerMoMaNoWeights:
      return std::make_unique<ActPerMoMaPolicy>(ctx, ActPerMoMaPolicy::Variant::NoWeights);
    case PolicyKind::Naive:
      return std::make_unique<NaivePolicy>(ctx);
    case PolicyKind::Random:
      return std::make_unique<RandomPolicy>(ctx);
    case PolicyKind::BreyerNbv:
      return std::make_unique<BreyerNbvPolicy>(ctx);
  }
  throw std::invalid_argument("make_policy: unknown kind");
}

ActPerMoMaPolicy::ActPerMoMaPolicy(const PolicyContext& ctx, Variant variant) : ctx_(ctx), variant_(variant)
{
  if (variant_ == Variant::IgOnly)
  {
    ctx_.planner.w_exec = 0.0;
  }
}

PolicyKind ActPerMoMaPolicy::kind() const
{
  switch (variant_)
  {
    case Variant::IgOnly:
      return PolicyKind::ActPerMoMaIgOnly;
    case Variant::NoWeights:
      return PolicyKind::ActPerMoMaNoWeights;
    case Variant::Full:
      break;
  }
  return PolicyKind::ActPerMoMa;
}

PolicyDecision ActPerMoMaPolicy::decide(const Observation& obs, DecisionTrace& trace)
{
  const PlannerConfig& cfg = ctx_.planner;
  if (obs.step >= obs.max_steps)
  {
    return Abort{"step budget exhausted"};
  }
  const Vec3& target = obs.target_center;
  try
  {
    trace.goals =
      sample_base_goals(obs.occupancy, target, cfg.n_b, ctx_.seed, cfg.goal_radius_min, cfg.goal_radius_max);
  }
  catch (const NoFeasibleGoals& e)
  {
    return Abort{e.what()};
  }

  const TraversabilityMap nav(obs.occupancy, kBaseRadius);
  std::vector<CandidatePath> paths;
  for (const auto& g : trace.goals)
  {
    const auto route = plan_path(nav, obs.robot, g.pose, cfg.unknown_cost);
    if (!route)
    {
      continue;
    }
    paths.push_back(sample_camera_poses(route->points, target, cfg.cam_spacing, cfg.torso_min, cfg.torso_max,
                                        ctx_.seed, g.goal_id, &obs.cam));
  }
  if (paths.empty())
  {
    return Abort{"no path to any base goal"};
  }

  const std::vector<Grasp> grasps = usable_grasps(obs.stable_grasps);
  // Momentum keeps the robot heading somewhere; a goal already reached has
  // nothing left to hold on to.
  for (const auto& p : paths)
  {
    if (state_.prev_goal_id && p.goal_id == *state_.prev_goal_id && p.length < 0.5 * cfg.step_size)
    {
      state_.prev_goal_id.reset();
    }
  }
  const bool weighted = variant_ != Variant::NoWeights;
  trace.scores = score_paths(paths, obs.target_tsdf, grasps, *ctx_.maps, ctx_.ig_intrinsics, obs.target_bbox, weighted);
  const Selection sel = select_path(paths, trace.scores, cfg, state_, !grasps.empty());
  state_ = sel.state;
  const CandidatePath& tau = paths[static_cast<std::size_t>(sel.index)];
  const PathScore& score = trace.scores[static_cast<std::size_t>(sel.index)];
  trace.selected_goal = tau.goal_id;
  trace.momentum_held = sel.momentum_held;
  trace.selected_path = tau.base_path;

  if (variant_ == Variant::IgOnly)
  {
    if (!grasps.empty() && planar_distance(obs.robot, target) <= cfg.reach_radius + kArrivalTol)
    {
      return execute_from(*best_quality(grasps), obs.robot, *ctx_.maps);
    }
  }
  else if (score.exec.grasp_index >= 0 && should_execute(tau, score.j_exec, cfg))
  {
    const Grasp& g = grasps[static_cast<std::size_t>(score.exec.grasp_index)];
    return ExecuteGrasp{g, score.exec.reach.arm, tau.goal};
  }

  const Pose2 next = step_along(obs.robot, tau, cfg.step_size, target);
  const std::size_t view = std::min<std::size_t>(1, tau.waypoints.size() - 1);
  const double height = tau.waypoints[view].cam.position.z();
  return MoveStep{next, head_camera(next, height, target)};
}

PolicyDecision NaivePolicy::decide(const Observation& obs, DecisionTrace& trace)
{
  const PlannerConfig& cfg = ctx_.planner;
  if (obs.step >= obs.max_steps)
  {
    return Abort{"step budget exhausted"};
  }
  const Vec3& target = obs.target_center;
  const std::vector<Grasp> grasps = usable_grasps(obs.stable_grasps);
  if (planar_distance(obs.robot, target) <= cfg.reach_radius + kArrivalTol)
  {
    if (!grasps.empty())
    {
      return execute_from(*best_quality(grasps), obs.robot, *ctx_.maps);
    }
    return MoveStep{obs.robot, obs.cam};
  }

  // Nearest feasible point of the reach circle, scanning outward from the
  // robot's bearing in 5 degree steps.
  const TraversabilityMap nav(obs.occupancy, kBaseRadius);
  const Vec2 t = target.head<2>();
  const Vec2 rel = obs.robot.position() - t;
  const double bearing = std::atan2(rel.y(), rel.x());
  for (int k = 0; k <= 36; ++k)
  {
    for (const int sign : {1, -1})
    {
      if (k == 0 && sign < 0)
      {
        continue;
      }
      if (k == 36 && sign < 0)
      {
        continue;
      }
      const double a = bearing + sign * deg2rad(5.0 * k);
      const Vec2 p = t + cfg.reach_radius * Vec2(std::cos(a), std::sin(a));
      if (obs.occupancy.disc_hits_occupied(p, kBaseRadius))
      {
        continue;
      }
      if (auto move = step_toward(nav, obs, Pose2::facing(p, t), cfg, ctx_.camera_height, trace))
      {
        return *move;
      }
    }
  }
  return Abort{"no feasible approach to the target"};
}

RandomPolicy::RandomPolicy(const PolicyContext& ctx) : ctx_(ctx), rng_(Rng::derive(ctx.seed, {0xBA5E})) {}

std::optional<Pose2> RandomPolicy::sample_goal(const Observation& obs, const TraversabilityMap& nav)
{
  const Vec2 t = obs.target_center.head<2>();
  for (int attempt = 0; attempt < 100; ++attempt)
  {
    const double a = rng_.uniform(-kPi, kPi);
    const Vec2 p = t + radius_ * Vec2(std::cos(a), std::sin(a));
    if (obs.occupancy.disc_hits_occupied(p, kBaseRadius))
    {
      continue;
    }
    const Pose2 goal = Pose2::facing(p, t);
    if ((p - obs.robot.position()).norm() > kArrivalTol && plan_path(nav, obs.robot, goal, ctx_.planner.unknown_cost))
    {
      ++goal_id_;
      return goal;
    }
  }
  return std::nullopt;
}

PolicyDecision RandomPolicy::decide(const Observation& obs, DecisionTrace& trace)
{
  const PlannerConfig& cfg = ctx_.planner;
  if (obs.step >= obs.max_steps)
  {
    return Abort{"step budget exhausted"};
  }
  const std::vector<Grasp> grasps = usable_grasps(obs.stable_grasps);
  if (goal_ && (goal_->position() - obs.robot.position()).norm() <= kArrivalTol)
  {
    if (!grasps.empty())
    {
      return execute_from(*best_quality(grasps), obs.robot, *ctx_.maps);
    }
    goal_.reset();
  }
  if (goal_ && obs.occupancy.disc_hits_occupied(goal_->position(), kBaseRadius))
  {
    goal_.reset();
  }
  const TraversabilityMap nav(obs.occupancy, kBaseRadius);
  for (int attempt = 0; attempt < 2; ++attempt)
  {
    if (!goal_)
    {
      goal_ = sample_goal(obs, nav);
      if (!goal_)
      {
        return Abort{"no feasible random goal"};
      }
    }
    trace.selected_goal = goal_id_;
    if (auto move = step_toward(nav, obs, *goal_, cfg, ctx_.camera_height, trace))
    {
      return *move;
    }
    goal_.reset();
  }
  return Abort{"no path to a random goal"};
}

void RandomPolicy::on_grasp_failed(const Grasp& grasp)
{
  Policy::on_grasp_failed(grasp);
  radius_ = 0.75;
  goal_.reset();
}

Pose3 BreyerNbvPolicy::hemisphere_view(const Vec3& target, double r, int i)
{
  const double elevation = deg2rad(i / kAzimuths == 0 ? 30.0 : 45.0);
  const double azimuth = 2.0 * kPi * (i % kAzimuths) / kAzimuths;
  const Vec3 eye = target + r * Vec3(std::cos(elevation) * std::cos(azimuth),
                                     std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
  return Pose3::look_at(eye, target);
}

void BreyerNbvPolicy::on_grasp_failed(const Grasp& grasp)
{
  Policy::on_grasp_failed(grasp);
  failed_since_arrival_ = true;
}

PolicyDecision BreyerNbvPolicy::decide(const Observation& obs, DecisionTrace& trace)
{
  const PlannerConfig& cfg = ctx_.planner;
  if (obs.step >= obs.max_steps)
  {
    return Abort{"step budget exhausted"};
  }
  const Vec3& target = obs.target_center;
  for (int i = 0; i < kViews; ++i)
  {
    const Vec3 eye = hemisphere_view(target, radius_, i).position;
    if ((eye.head<2>() - obs.robot.position()).norm() <= kArrivalTol)
    {
      visited_.insert(i);
      failed_since_arrival_ = false;
    }
  }

  const std::vector<Grasp> grasps = usable_grasps(obs.stable_grasps);
  if (!grasps.empty() && !failed_since_arrival_ &&
      planar_distance(obs.robot, target) <= cfg.reach_radius + kArrivalTol)
  {
    return execute_from(*best_quality(grasps), obs.robot, *ctx_.maps);
  }

  const TraversabilityMap nav(obs.occupancy, kBaseRadius);
  for (int sweep = 0; sweep < 4; ++sweep)
  {
    struct Candidate
    {
      long ig;
      int index;
      Pose3 view;
    };
    std::vector<Candidate> candidates;
    bool any_feasible = false;
    for (int i = 0; i < kViews; ++i)
    {
      const Pose3 view = hemisphere_view(target, radius_, i);
      if (obs.occupancy.disc_hits_occupied(view.position.head<2>(), kBaseRadius))
      {
        continue;
      }
      any_feasible = true;
      if (visited_.contains(i))
      {
        continue;
      }
      candidates.push_back(
        {rear_side_ig(obs.target_tsdf, view, ctx_.ig_intrinsics, obs.target_bbox).rear_side_count, i, view});
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.ig > b.ig; });
    for (const auto& c : candidates)
    {
      BaseGoal goal{Pose2::facing(c.view.position.head<2>(), target.head<2>()), c.index};
      trace.goals.push_back(goal);
      const double height = std::clamp(c.view.position.z(), cfg.torso_min, cfg.torso_max);
      if (auto move = step_toward(nav, obs, goal.pose, cfg, height, trace))
      {
        trace.selected_goal = c.index;
        return *move;
      }
    }
    if (!any_feasible && visited_.empty())
    {
      break;
    }
    // Every reachable view has been visited without a usable grasp: shrink.
    radius_ *= 0.8;
    visited_.clear();
  }
  return Abort{"no reachable next-best view"};
}

}  // namespace actpermoma
