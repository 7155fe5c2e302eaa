#pragma once

#include "actpermoma/candidate_path.hpp"
#include "actpermoma/perception.hpp"
#include "actpermoma/scene.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>

namespace actpermoma
{

enum class Arm : std::uint8_t
{
  Left,
  Right
};

std::string to_string(Arm a);

struct Grasp
{
  Pose3 pose;  // world frame, position snapped to the voxel center
  double quality = 0.0;
  Index3 voxel;
  int stable_for = 1;
  Arm arm = Arm::Left;
};

struct DetectionParams
{
  double noise = 0.05;         // half-width of the uniform quality noise
  double ball_voxels = 3.0;    // coverage ball radius
  double coverage_lo = 0.3;    // smoothstep edges
  double coverage_hi = 0.8;
};

double smoothstep(double x, double edge0, double edge1);

// Fraction of the ground-truth visible-shell voxels of `obj` within `radius`
// of `center` that the TSDF classifies as OccupiedSurface; 0 when the ball
// contains no shell voxel.
double surface_coverage(const TsdfGrid& tsdf, const Primitive& obj, const Vec3& center, double radius);
// Same over the whole object.
double object_coverage(const TsdfGrid& tsdf, const Primitive& obj);

// Procedural stand-in for a volumetric grasp network: one candidate per
// ground-truth grasp of the target, its quality modulated by how much of the
// surface around the contact has been observed. Grasps with quality >= q_th
// are returned, at most one per voxel (the best).
std::vector<Grasp> detect_grasps(const TsdfGrid& tsdf, const Scene& scene, double q_th, std::uint64_t seed,
                                 int step, const DetectionParams& params = {});

struct StabilityResult
{
  std::vector<Grasp> tracked;  // every newly detected grasp with its updated counter
  std::vector<Grasp> stable;   // those seen for at least n_stab consecutive steps
};

StabilityResult filter_stable(const std::vector<Grasp>& prev, const std::vector<Grasp>& detected, int n_stab);

enum class PitchClass : std::uint8_t
{
  TopDown,
  Side45
};

// Grasp pose relative to a base pose, in the coordinates the map is binned on.
struct RelativeGrasp
{
  double distance = 0.0;  // planar, base origin to grasp position
  double height = 0.0;    // above the floor
  double yaw = 0.0;       // approach heading in the base frame
  PitchClass pitch = PitchClass::TopDown;
};

RelativeGrasp relative_grasp(const Pose3& grasp, const Pose2& base);

class ReachabilityMap
{
public:
  static constexpr double kDistStep = 0.05;
  static constexpr int kDistBins = 31;  // centers 0 .. 1.5 m
  static constexpr double kHeightStep = 0.05;
  static constexpr int kHeightBins = 41;  // centers 0 .. 2.0 m
  static constexpr int kYawBins = 36;     // centers every 10 degrees
  static constexpr int kPitchClasses = 2;

  ReachabilityMap() = default;

  // Analytic surrogate for a sampled forward-kinematics map.
  static ReachabilityMap build(Arm arm);

  Arm arm() const { return arm_; }
  double arm_offset() const { return arm_offset_; }

  // Nearest-bin lookup; 0 outside the binned range.
  double score(const RelativeGrasp& g) const;
  double bin(int d, int h, int yaw, int pitch) const { return scores_[index(d, h, yaw, pitch)]; }
  const std::vector<float>& scores() const { return scores_; }

  void save(const std::filesystem::path& path) const;
  static ReachabilityMap load(const std::filesystem::path& path);

  bool operator==(const ReachabilityMap&) const = default;

private:
  static std::size_t index(int d, int h, int yaw, int pitch)
  {
    return static_cast<std::size_t>(((pitch * kYawBins + yaw) * kHeightBins + h) * kDistBins + d);
  }

  Arm arm_ = Arm::Left;
  double arm_offset_ = 0.0;
  std::vector<float> scores_;
};

// The closed-form score the map is built from.
double reachability_surrogate(double d, double h, double yaw, PitchClass pitch, double arm_offset);

struct ReachabilityMaps
{
  ReachabilityMap left = ReachabilityMap::build(Arm::Left);
  ReachabilityMap right = ReachabilityMap::build(Arm::Right);
};

struct ReachQuery
{
  double score = 0.0;
  Arm arm = Arm::Left;
};

// Best of the two arms; ties go to the left arm.
ReachQuery reachability(const ReachabilityMaps& maps, const Pose3& grasp, const Pose2& base);

constexpr double kLenEpsilon = 0.1;

struct ExecUtility
{
  double value = 0.0;
  int grasp_index = -1;  // argmax grasp, -1 when there are none
  ReachQuery reach;
};

// max_g R(g, goal) / max(len, kLenEpsilon); `weighted = false` forces len = 1.
ExecUtility exec_utility(const std::vector<Grasp>& grasps, const CandidatePath& path, const ReachabilityMaps& maps,
                         bool weighted = true);

struct ExecutionParams
{
  double min_intrinsic = 0.5;
  double min_reachability = 0.3;
  double min_coverage = 0.5;
  double match_voxels = 3.0;
};

enum class ExecutionOutcome : std::uint8_t
{
  Succeeded,
  Failed
};

enum class FailureReason : std::uint8_t
{
  None,
  NoMatchingTruthGrasp,
  LowIntrinsicQuality,
  Unreachable,
  LowCoverage
};

std::string to_string(FailureReason r);

struct ExecutionResult
{
  ExecutionOutcome outcome = ExecutionOutcome::Failed;
  FailureReason reason = FailureReason::None;
  double intrinsic_quality = 0.0;
  double reach = 0.0;
  double coverage = 0.0;
};

// Deterministic success model replacing physics: the grasp must match a
// ground-truth grasp of the target (nearest contact within match_voxels), and
// that grasp, the reachability from `base` and the observed fraction of the
// target surface must clear their thresholds. The first failing condition is
// reported, in the order intrinsic, reachability, coverage.
ExecutionResult execute_grasp(const Scene& scene, const TsdfGrid& tsdf, const Grasp& grasp, const Pose2& base,
                              const ReachabilityMaps& maps, const ExecutionParams& params = {});

}  // namespace actpermoma
