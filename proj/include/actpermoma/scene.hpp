#pragma once

#include "actpermoma/geom.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace actpermoma
{

class SceneGenFailure : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

enum class ScenarioKind
{
  Simple,
  Complex
};

std::string to_string(ScenarioKind k);
ScenarioKind scenario_from_string(const std::string& s);

enum class PrimitiveTag
{
  Floor,
  Table,
  Object,
  Obstacle
};

struct BoxShape
{
  Vec3 half_extents;
};

// Upright cylinder, axis along the local z axis, centered on the pose.
struct CylinderShape
{
  double radius = 0.0;
  double height = 0.0;
};

struct Primitive
{
  std::variant<BoxShape, CylinderShape> shape;
  Pose3 pose;  // upright: rotation about world z only
  PrimitiveTag tag = PrimitiveTag::Object;
  int object_id = -1;

  // Nearest intersection parameter in (0, t_max], if any.
  std::optional<double> intersect(const Ray& ray, double t_max) const;
  double signed_distance(const Vec3& p) const;
  Aabb world_aabb() const;
  // Planar distance from p to the primitive footprint, 0 inside.
  double footprint_distance(const Vec2& p) const;
  // Radius of the footprint's bounding circle.
  double footprint_radius() const;
  double half_height() const;
  // Inside the solid and closer than `thickness` to a face other than the
  // bottom (the bottom rests on a support and is never visible).
  bool in_visible_shell(const Vec3& p, double thickness) const;
};

enum class GraspApproach
{
  TopDown,
  Side45
};

std::string to_string(GraspApproach a);

struct GroundTruthGrasp
{
  int object_id = -1;
  // Object frame. The position is the grasp center on the object surface; the
  // local z axis is the gripper approach direction.
  Pose3 pose;
  double intrinsic_quality = 0.0;
  GraspApproach approach = GraspApproach::TopDown;
};

struct Arena
{
  Vec2 min{-3.0, -3.0};
  Vec2 max{3.0, 3.0};
};

struct Scene
{
  ScenarioKind kind = ScenarioKind::Simple;
  bool hard_grasps = false;
  std::uint64_t seed = 0;
  std::vector<Primitive> primitives;
  int target_id = -1;
  Vec3 target_center = Vec3::Zero();
  Aabb target_bbox;
  Arena arena;
  // Side of the table the robot starts from (radians, world frame).
  double approach_bearing = 0.0;
  std::vector<GroundTruthGrasp> truth_grasps;

  const Primitive& target() const;
  Pose3 grasp_world_pose(const GroundTruthGrasp& g) const;
  std::vector<const GroundTruthGrasp*> target_grasps() const;
};

struct SceneParams
{
  double table_half = 0.4;
  double table_height = 0.75;
  double object_min_edge = 0.04;
  double object_max_edge = 0.12;
  double bbox_margin = 0.05;
  int min_grasps = 8;
  int max_grasps = 12;
  double min_intrinsic = 0.4;
  double max_intrinsic = 1.0;
  // Fraction of non-target objects placed right next to the target.
  double clutter_near_target = 0.5;
  double top_down_fraction = 0.6;
  int max_attempts = 1000;
};

Scene generate_scene(ScenarioKind kind, bool hard_grasps, std::uint64_t seed, const SceneParams& params = {});

struct CameraIntrinsics
{
  int width = 128;
  int height = 128;
  double vertical_fov = deg2rad(60.0);
  double max_range = 3.0;

  double focal() const { return 0.5 * height / std::tan(0.5 * vertical_fov); }
  // Unit ray direction in the camera frame through the center of pixel (u, v).
  Vec3 pixel_direction(int u, int v) const;
  // Pixel containing the camera-frame point, if it projects into the image.
  std::optional<std::pair<int, int>> project(const Vec3& p_cam) const;
  CameraIntrinsics downsampled(int factor) const;
  void validate() const;
};

struct DepthImage
{
  CameraIntrinsics intrinsics;
  std::vector<double> depths;  // row-major, NaN = no hit within max_range

  double at(int u, int v) const { return depths[static_cast<std::size_t>(v) * intrinsics.width + u]; }
};

// Range along each pixel ray to the nearest primitive.
DepthImage render_depth(const Scene& scene, const Pose3& cam, const CameraIntrinsics& intr);
DepthImage render_depth(const std::vector<Primitive>& primitives, const Pose3& cam, const CameraIntrinsics& intr);

constexpr double kBaseRadius = 0.3;

// Collision-free start pose between `min_distance` and 2 m of the target.
Pose2 sample_start_pose(const Scene& scene, std::uint64_t seed, double min_distance = 0.85);

// Ground-truth planar clearance check for a base disc.
bool base_collides(const Scene& scene, const Vec2& p, double radius = kBaseRadius);

}  // namespace actpermoma
