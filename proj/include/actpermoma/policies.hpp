#pragma once

#include "actpermoma/grasping.hpp"
#include "actpermoma/perception.hpp"
#include "actpermoma/planning.hpp"
#include "actpermoma/rng.hpp"

#include <memory>
#include <set>
#include <string>
#include <variant>

namespace actpermoma
{

enum class PolicyKind : std::uint8_t
{
  ActPerMoMa,
  ActPerMoMaIgOnly,
  ActPerMoMaNoWeights,
  Naive,
  Random,
  BreyerNbv
};

std::string to_string(PolicyKind k);
PolicyKind policy_from_string(const std::string& s);
const std::vector<PolicyKind>& all_policies();

// What a policy may look at: beliefs built from its own observations plus the
// approximate target location. Ground truth stays with the harness.
struct Observation
{
  const TsdfGrid& target_tsdf;
  const OccupancyGrid2& occupancy;
  const std::vector<Grasp>& stable_grasps;
  Vec3 target_center;
  Aabb target_bbox;
  Pose2 robot;
  Pose3 cam;
  int step = 0;
  int max_steps = 0;
};

struct MoveStep
{
  Pose2 base;
  Pose3 cam;
};

struct ExecuteGrasp
{
  Grasp grasp;
  Arm arm = Arm::Left;
  Pose2 base;  // pose the grasp is executed from
};

struct Abort
{
  std::string reason;
};

using PolicyDecision = std::variant<MoveStep, ExecuteGrasp, Abort>;

// Planner internals of one decision, for the per-step trace.
struct DecisionTrace
{
  std::vector<BaseGoal> goals;
  std::vector<PathScore> scores;
  int selected_goal = -1;
  bool momentum_held = false;
  std::vector<Vec2> selected_path;
};

class Policy
{
public:
  virtual ~Policy() = default;
  virtual PolicyKind kind() const = 0;
  virtual PolicyDecision decide(const Observation& obs, DecisionTrace& trace) = 0;
  // A grasp attempt that failed without ending the episode.
  virtual void on_grasp_failed(const Grasp& grasp) { failed_voxels_.insert(grasp.voxel); }

protected:
  // Stable grasps not yet tried and failed.
  std::vector<Grasp> usable_grasps(const std::vector<Grasp>& stable) const;

  std::set<Index3> failed_voxels_;
};

struct PolicyContext
{
  PlannerConfig planner;
  CameraIntrinsics ig_intrinsics;
  const ReachabilityMaps* maps = nullptr;
  std::uint64_t seed = 0;
  // Head height used by policies that do not plan camera poses.
  double camera_height = 1.2;
};

std::unique_ptr<Policy> make_policy(PolicyKind kind, const PolicyContext& ctx);

// Receding-horizon path-wise active perception, also used for the IG-only and
// no-weights ablations.
class ActPerMoMaPolicy : public Policy
{
public:
  enum class Variant
  {
    Full,
    IgOnly,
    NoWeights
  };

  ActPerMoMaPolicy(const PolicyContext& ctx, Variant variant);

  PolicyKind kind() const override;
  PolicyDecision decide(const Observation& obs, DecisionTrace& trace) override;
  const PlannerState& state() const { return state_; }

private:
  PolicyContext ctx_;
  Variant variant_;
  PlannerState state_;
};

// Drives to the nearest feasible pose on the reach circle and grasps once a
// stable grasp shows up; never explores.
class NaivePolicy : public Policy
{
public:
  explicit NaivePolicy(const PolicyContext& ctx) : ctx_(ctx) {}

  PolicyKind kind() const override { return PolicyKind::Naive; }
  PolicyDecision decide(const Observation& obs, DecisionTrace& trace) override;

private:
  PolicyContext ctx_;
};

// Random feasible goals on the reach circle; a smaller circle after a failure.
class RandomPolicy : public Policy
{
public:
  explicit RandomPolicy(const PolicyContext& ctx);

  PolicyKind kind() const override { return PolicyKind::Random; }
  PolicyDecision decide(const Observation& obs, DecisionTrace& trace) override;
  void on_grasp_failed(const Grasp& grasp) override;
  double radius() const { return radius_; }

private:
  std::optional<Pose2> sample_goal(const Observation& obs, const TraversabilityMap& nav);

  PolicyContext ctx_;
  Rng rng_;
  double radius_ = 0.85;
  std::optional<Pose2> goal_;
  int goal_id_ = 0;
};

// Next-best-view baseline: views on a hemisphere around the target, always
// heading for the single view with the highest rear-side IG.
class BreyerNbvPolicy : public Policy
{
public:
  static constexpr int kAzimuths = 16;
  static constexpr int kViews = 2 * kAzimuths;

  explicit BreyerNbvPolicy(const PolicyContext& ctx) : ctx_(ctx) {}

  PolicyKind kind() const override { return PolicyKind::BreyerNbv; }
  PolicyDecision decide(const Observation& obs, DecisionTrace& trace) override;
  void on_grasp_failed(const Grasp& grasp) override;

  // View `i` of a hemisphere of radius `r`: elevation ring i / kAzimuths
  // (30 or 45 degrees), azimuth (i % kAzimuths) * 360 / kAzimuths degrees.
  static Pose3 hemisphere_view(const Vec3& target, double r, int i);
  double radius() const { return radius_; }

private:
  PolicyContext ctx_;
  double radius_ = 1.0;
  std::set<int> visited_;
  bool failed_since_arrival_ = false;
};

}  // namespace actpermoma
