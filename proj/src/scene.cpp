#include "actpermoma/scene.hpp"

#include "actpermoma/rng.hpp"

#include <limits>

namespace actpermoma
{

std::string to_string(ScenarioKind k) { return k == ScenarioKind::Simple ? "simple" : "complex"; }

ScenarioKind scenario_from_string(const std::string& s)
{
  if (s == "simple")
  {
    return ScenarioKind::Simple;
  }
  if (s == "complex")
  {
    return ScenarioKind::Complex;
  }
  throw std::invalid_argument("unknown scenario '" + s + "' (expected simple|complex)");
}

std::string to_string(GraspApproach a) { return a == GraspApproach::TopDown ? "TopDown" : "Side45"; }

namespace
{
constexpr double kHitEps = 1e-9;

std::optional<double> intersect_box(const Vec3& o, const Vec3& d, const Vec3& h, double t_max)
{
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a)
  {
    if (std::abs(d[a]) < 1e-15)
    {
      if (std::abs(o[a]) > h[a])
      {
        return std::nullopt;
      }
      continue;
    }
    double ta = (-h[a] - o[a]) / d[a];
    double tb = (h[a] - o[a]) / d[a];
    if (ta > tb)
    {
      std::swap(ta, tb);
    }
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1)
    {
      return std::nullopt;
    }
  }
  const double t = t0 > kHitEps ? t0 : t1;
  if (t <= kHitEps || t > t_max)
  {
    return std::nullopt;
  }
  return t;
}

std::optional<double> intersect_cylinder(const Vec3& o, const Vec3& d, double r, double hz, double t_max)
{
  double best = std::numeric_limits<double>::infinity();
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a > 1e-15)
  {
    const double b = 2.0 * (o.x() * d.x() + o.y() * d.y());
    const double c = o.x() * o.x() + o.y() * o.y() - r * r;
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0)
    {
      const double sq = std::sqrt(disc);
      for (const double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)})
      {
        if (t > kHitEps && std::abs(o.z() + t * d.z()) <= hz)
        {
          best = std::min(best, t);
        }
      }
    }
  }
  if (std::abs(d.z()) > 1e-15)
  {
    for (const double zc : {-hz, hz})
    {
      const double t = (zc - o.z()) / d.z();
      const double x = o.x() + t * d.x();
      const double y = o.y() + t * d.y();
      if (t > kHitEps && x * x + y * y <= r * r)
      {
        best = std::min(best, t);
      }
    }
  }
  if (!(best <= t_max))
  {
    return std::nullopt;
  }
  return best;
}
}  // namespace

std::optional<double> Primitive::intersect(const Ray& ray, double t_max) const
{
  const Vec3 o = pose.inverse_transform(ray.origin);
  const Vec3 d = pose.orientation.conjugate() * ray.direction;
  if (const auto* box = std::get_if<BoxShape>(&shape))
  {
    return intersect_box(o, d, box->half_extents, t_max);
  }
  const auto& cyl = std::get<CylinderShape>(shape);
  return intersect_cylinder(o, d, cyl.radius, 0.5 * cyl.height, t_max);
}

double Primitive::signed_distance(const Vec3& p) const
{
  const Vec3 l = pose.inverse_transform(p);
  if (const auto* box = std::get_if<BoxShape>(&shape))
  {
    const Vec3 q = l.cwiseAbs() - box->half_extents;
    return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
  }
  const auto& cyl = std::get<CylinderShape>(shape);
  const Vec2 q(std::hypot(l.x(), l.y()) - cyl.radius, std::abs(l.z()) - 0.5 * cyl.height);
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

Aabb Primitive::world_aabb() const
{
  Vec3 half;
  if (const auto* box = std::get_if<BoxShape>(&shape))
  {
    half = pose.orientation.toRotationMatrix().cwiseAbs() * box->half_extents;
  }
  else
  {
    const auto& cyl = std::get<CylinderShape>(shape);
    half = Vec3(cyl.radius, cyl.radius, 0.5 * cyl.height);
  }
  return {pose.position - half, pose.position + half};
}

double Primitive::footprint_distance(const Vec2& p) const
{
  const Vec3 l = pose.inverse_transform(Vec3(p.x(), p.y(), pose.position.z()));
  if (const auto* box = std::get_if<BoxShape>(&shape))
  {
    const double dx = std::max(std::abs(l.x()) - box->half_extents.x(), 0.0);
    const double dy = std::max(std::abs(l.y()) - box->half_extents.y(), 0.0);
    return std::hypot(dx, dy);
  }
  const auto& cyl = std::get<CylinderShape>(shape);
  return std::max(std::hypot(l.x(), l.y()) - cyl.radius, 0.0);
}

double Primitive::footprint_radius() const
{
  if (const auto* box = std::get_if<BoxShape>(&shape))
  {
    return std::hypot(box->half_extents.x(), box->half_extents.y());
  }
  return std::get<CylinderShape>(shape).radius;
}

double Primitive::half_height() const
{
  if (const auto* box = std::get_if<BoxShape>(&shape))
  {
    return box->half_extents.z();
  }
  return 0.5 * std::get<CylinderShape>(shape).height;
}

bool Primitive::in_visible_shell(const Vec3& p, double thickness) const
{
  const Vec3 l = pose.inverse_transform(p);
  if (const auto* box = std::get_if<BoxShape>(&shape))
  {
    const Vec3& h = box->half_extents;
    if (std::abs(l.x()) > h.x() || std::abs(l.y()) > h.y() || std::abs(l.z()) > h.z())
    {
      return false;
    }
    return std::min({h.x() - std::abs(l.x()), h.y() - std::abs(l.y()), h.z() - l.z()}) < thickness;
  }
  const auto& cyl = std::get<CylinderShape>(shape);
  const double rho = std::hypot(l.x(), l.y());
  const double hz = 0.5 * cyl.height;
  if (rho > cyl.radius || std::abs(l.z()) > hz)
  {
    return false;
  }
  return std::min(cyl.radius - rho, hz - l.z()) < thickness;
}

const Primitive& Scene::target() const
{
  for (const auto& p : primitives)
  {
    if (p.tag == PrimitiveTag::Object && p.object_id == target_id)
    {
      return p;
    }
  }
  throw std::logic_error("scene has no target primitive");
}

Pose3 Scene::grasp_world_pose(const GroundTruthGrasp& g) const
{
  for (const auto& p : primitives)
  {
    if (p.tag == PrimitiveTag::Object && p.object_id == g.object_id)
    {
      return compose(p.pose, g.pose);
    }
  }
  throw std::logic_error("grasp references unknown object");
}

std::vector<const GroundTruthGrasp*> Scene::target_grasps() const
{
  std::vector<const GroundTruthGrasp*> out;
  for (const auto& g : truth_grasps)
  {
    if (g.object_id == target_id)
    {
      out.push_back(&g);
    }
  }
  return out;
}

namespace
{
Primitive make_box(const Vec3& center, const Vec3& half, double yaw, PrimitiveTag tag, int id = -1)
{
  Primitive p;
  p.shape = BoxShape{half};
  p.pose = Pose3(center, Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ())));
  p.tag = tag;
  p.object_id = id;
  return p;
}

Primitive sample_object(Rng& rng, const SceneParams& params, int id)
{
  const double lo = params.object_min_edge;
  const double hi = params.object_max_edge;
  const double top = params.table_height;
  if (rng.bernoulli(0.5))
  {
    const Vec3 half(0.5 * rng.uniform(lo, hi), 0.5 * rng.uniform(lo, hi), 0.5 * rng.uniform(lo, hi));
    return make_box(Vec3(0, 0, top + half.z()), half, rng.uniform(-kPi, kPi), PrimitiveTag::Object, id);
  }
  Primitive p;
  const CylinderShape cyl{0.5 * rng.uniform(lo, hi), rng.uniform(lo, hi)};
  p.shape = cyl;
  p.pose = Pose3(Vec3(0, 0, top + 0.5 * cyl.height), Quat::Identity());
  p.tag = PrimitiveTag::Object;
  p.object_id = id;
  return p;
}

// Grasp frame whose z axis is `approach` and x axis is `closing`.
Quat grasp_frame(const Vec3& approach, const Vec3& closing)
{
  Mat3 r;
  r.col(2) = approach.normalized();
  r.col(0) = closing.normalized();
  r.col(1) = r.col(2).cross(r.col(0));
  return Quat(r);
}

GroundTruthGrasp sample_grasp(Rng& rng, const Primitive& obj, const SceneParams& params, bool hard)
{
  GroundTruthGrasp g;
  g.object_id = obj.object_id;
  g.intrinsic_quality = rng.uniform(params.min_intrinsic, params.max_intrinsic);
  g.approach = (hard || !rng.bernoulli(params.top_down_fraction)) ? GraspApproach::Side45 : GraspApproach::TopDown;

  const double hz = obj.half_height();
  if (g.approach == GraspApproach::TopDown)
  {
    Vec2 offset;
    if (const auto* box = std::get_if<BoxShape>(&obj.shape))
    {
      offset = Vec2(rng.uniform(-0.5, 0.5) * box->half_extents.x(), rng.uniform(-0.5, 0.5) * box->half_extents.y());
    }
    else
    {
      const double r = 0.5 * std::get<CylinderShape>(obj.shape).radius * std::sqrt(rng.uniform());
      const double a = rng.uniform(-kPi, kPi);
      offset = Vec2(r * std::cos(a), r * std::sin(a));
    }
    const double psi = rng.uniform(-kPi, kPi);
    g.pose = Pose3(Vec3(offset.x(), offset.y(), hz), grasp_frame(-Vec3::UnitZ(), Vec3(std::cos(psi), std::sin(psi), 0)));
    return g;
  }

  // Side45: the gripper travels along `heading` (object frame) and 45 degrees
  // downward, meeting the face that looks back toward where it comes from.
  const double heading = rng.uniform(-kPi, kPi);
  const Vec2 travel(std::cos(heading), std::sin(heading));
  const Vec2 toward_gripper = -travel;
  double reach;
  if (const auto* box = std::get_if<BoxShape>(&obj.shape))
  {
    const double sx = std::abs(toward_gripper.x()) > 1e-12 ? box->half_extents.x() / std::abs(toward_gripper.x())
                                                           : std::numeric_limits<double>::infinity();
    const double sy = std::abs(toward_gripper.y()) > 1e-12 ? box->half_extents.y() / std::abs(toward_gripper.y())
                                                           : std::numeric_limits<double>::infinity();
    reach = std::min(sx, sy);
  }
  else
  {
    reach = std::get<CylinderShape>(obj.shape).radius;
  }
  const Vec3 contact(reach * toward_gripper.x(), reach * toward_gripper.y(), 0.5 * hz);
  const double c45 = std::sqrt(0.5);
  const Vec3 approach(c45 * travel.x(), c45 * travel.y(), -c45);
  g.pose = Pose3(contact, grasp_frame(approach, Vec3(-travel.y(), travel.x(), 0.0)));
  return g;
}
}  // namespace

Scene generate_scene(ScenarioKind kind, bool hard_grasps, std::uint64_t seed, const SceneParams& params)
{
  Rng rng = Rng::derive(seed, {0x5CE4E});
  Scene scene;
  scene.kind = kind;
  scene.hard_grasps = hard_grasps;
  scene.seed = seed;

  const Vec2 arena_half = 0.5 * (scene.arena.max - scene.arena.min);
  scene.primitives.push_back(
    make_box(Vec3(0, 0, -0.05), Vec3(arena_half.x(), arena_half.y(), 0.05), 0.0, PrimitiveTag::Floor));
  const double th = params.table_half;
  scene.primitives.push_back(make_box(Vec3(0, 0, 0.5 * params.table_height),
                                      Vec3(th, th, 0.5 * params.table_height), 0.0, PrimitiveTag::Table));

  const int n_objects = kind == ScenarioKind::Simple ? 4 : 6;
  scene.target_id = rng.uniform_int(0, n_objects - 1);
  scene.approach_bearing = rng.uniform(-kPi, kPi);

  // Target first, the rest by rejection sampling around it or anywhere on
  // the table.
  std::vector<int> order{scene.target_id};
  for (int i = 0; i < n_objects; ++i)
  {
    if (i != scene.target_id)
    {
      order.push_back(i);
    }
  }

  int attempts = 0;
  std::vector<Primitive> objects;
  Vec2 target_xy = Vec2::Zero();
  double target_radius = 0.0;
  for (const int id : order)
  {
    bool placed = false;
    while (!placed)
    {
      if (++attempts > params.max_attempts)
      {
        throw SceneGenFailure("object placement exceeded " + std::to_string(params.max_attempts) + " attempts");
      }
      Primitive obj = sample_object(rng, params, id);
      const double r = obj.footprint_radius();
      const double lim = th - r - 0.01;
      Vec2 xy;
      if (id != scene.target_id && rng.bernoulli(params.clutter_near_target))
      {
        const double a = rng.uniform(-kPi, kPi);
        const double d = target_radius + r + rng.uniform(0.01, 0.08);
        xy = target_xy + d * Vec2(std::cos(a), std::sin(a));
      }
      else
      {
        xy = Vec2(rng.uniform(-lim, lim), rng.uniform(-lim, lim));
      }
      if (std::abs(xy.x()) > lim || std::abs(xy.y()) > lim)
      {
        continue;
      }
      bool clear = true;
      for (const auto& other : objects)
      {
        const Vec2 oxy = other.pose.position.head<2>();
        if ((oxy - xy).norm() < r + other.footprint_radius() + 0.005)
        {
          clear = false;
          break;
        }
      }
      if (!clear)
      {
        continue;
      }
      obj.pose.position.x() = xy.x();
      obj.pose.position.y() = xy.y();
      if (id == scene.target_id)
      {
        target_xy = xy;
        target_radius = r;
      }
      objects.push_back(obj);
      placed = true;
    }
  }
  std::sort(objects.begin(), objects.end(),
            [](const Primitive& a, const Primitive& b) { return a.object_id < b.object_id; });
  for (const auto& o : objects)
  {
    scene.primitives.push_back(o);
  }

  if (kind == ScenarioKind::Complex)
  {
    const double b = scene.approach_bearing;
    const Vec2 dir(std::cos(b), std::sin(b));
    const Vec2 lateral(-dir.y(), dir.x());
    const double edge = th / std::max(std::abs(dir.x()), std::abs(dir.y()));
    while (true)
    {
      if (++attempts > params.max_attempts)
      {
        throw SceneGenFailure("obstacle placement exceeded attempt budget");
      }
      const Vec3 half(rng.uniform(0.15, 0.3), rng.uniform(0.15, 0.3), 0.5 * rng.uniform(0.5, 1.0));
      const double gap = rng.uniform(0.5, 1.2);
      const Vec2 c = (edge + gap + half.x()) * dir + rng.uniform(-0.15, 0.15) * lateral;
      Primitive obstacle = make_box(Vec3(c.x(), c.y(), half.z()), half, b, PrimitiveTag::Obstacle);
      const Aabb box = obstacle.world_aabb();
      if (box.min.x() < scene.arena.min.x() + 0.1 || box.min.y() < scene.arena.min.y() + 0.1 ||
          box.max.x() > scene.arena.max.x() - 0.1 || box.max.y() > scene.arena.max.y() - 0.1)
      {
        continue;
      }
      scene.primitives.push_back(obstacle);
      break;
    }
  }

  const Primitive& target = scene.target();
  const Aabb target_box = target.world_aabb();
  scene.target_center = target_box.center();
  scene.target_bbox = target_box.inflated(params.bbox_margin);

  for (const auto& o : objects)
  {
    const int n = rng.uniform_int(params.min_grasps, params.max_grasps);
    for (int k = 0; k < n; ++k)
    {
      scene.truth_grasps.push_back(sample_grasp(rng, o, params, hard_grasps));
    }
  }
  return scene;
}

Vec3 CameraIntrinsics::pixel_direction(int u, int v) const
{
  const double f = focal();
  return Vec3((u + 0.5 - 0.5 * width) / f, (v + 0.5 - 0.5 * height) / f, 1.0).normalized();
}

std::optional<std::pair<int, int>> CameraIntrinsics::project(const Vec3& p) const
{
  if (p.z() <= 1e-9)
  {
    return std::nullopt;
  }
  const double f = focal();
  const double uf = f * p.x() / p.z() + 0.5 * width;
  const double vf = f * p.y() / p.z() + 0.5 * height;
  if (!(uf >= 0.0 && vf >= 0.0 && uf < width && vf < height))
  {
    return std::nullopt;
  }
  return std::make_pair(static_cast<int>(uf), static_cast<int>(vf));
}

CameraIntrinsics CameraIntrinsics::downsampled(int factor) const
{
  CameraIntrinsics c = *this;
  c.width = width / factor;
  c.height = height / factor;
  return c;
}

void CameraIntrinsics::validate() const
{
  if (width < 16 || height < 16)
  {
    throw std::invalid_argument("camera intrinsics: width and height must be >= 16");
  }
  if (!(vertical_fov > 0.0 && vertical_fov < kPi))
  {
    throw std::invalid_argument("camera intrinsics: vertical_fov must be in (0, pi)");
  }
  if (!(max_range > 0.0))
  {
    throw std::invalid_argument("camera intrinsics: max_range must be positive");
  }
}

DepthImage render_depth(const std::vector<Primitive>& primitives, const Pose3& cam, const CameraIntrinsics& intr)
{
  intr.validate();
  DepthImage img;
  img.intrinsics = intr;
  img.depths.assign(static_cast<std::size_t>(intr.width) * intr.height, std::numeric_limits<double>::quiet_NaN());
  const Mat3 rot = cam.orientation.toRotationMatrix();
  for (int v = 0; v < intr.height; ++v)
  {
    for (int u = 0; u < intr.width; ++u)
    {
      const Ray ray(cam.position, rot * intr.pixel_direction(u, v));
      double best = std::numeric_limits<double>::infinity();
      for (const auto& p : primitives)
      {
        if (const auto t = p.intersect(ray, intr.max_range))
        {
          best = std::min(best, *t);
        }
      }
      if (best <= intr.max_range)
      {
        img.depths[static_cast<std::size_t>(v) * intr.width + u] = best;
      }
    }
  }
  return img;
}

DepthImage render_depth(const Scene& scene, const Pose3& cam, const CameraIntrinsics& intr)
{
  return render_depth(scene.primitives, cam, intr);
}

bool base_collides(const Scene& scene, const Vec2& p, double radius)
{
  for (const auto& prim : scene.primitives)
  {
    if (prim.tag == PrimitiveTag::Floor)
    {
      continue;
    }
    if (prim.footprint_distance(p) < radius)
    {
      return true;
    }
  }
  return false;
}

Pose2 sample_start_pose(const Scene& scene, std::uint64_t seed, double min_distance)
{
  Rng rng = Rng::derive(seed, {0x57A27});
  const Vec2 target = scene.target_center.head<2>();
  for (int attempt = 0; attempt < 1000; ++attempt)
  {
    const double bearing = scene.approach_bearing + rng.uniform(-deg2rad(45.0), deg2rad(45.0));
    const double r = rng.uniform(min_distance, 2.0);
    const Vec2 p = target + r * Vec2(std::cos(bearing), std::sin(bearing));
    if (p.x() - kBaseRadius < scene.arena.min.x() || p.y() - kBaseRadius < scene.arena.min.y() ||
        p.x() + kBaseRadius > scene.arena.max.x() || p.y() + kBaseRadius > scene.arena.max.y())
    {
      continue;
    }
    if (base_collides(scene, p))
    {
      continue;
    }
    return Pose2::facing(p, target);
  }
  throw SceneGenFailure("start pose sampling exceeded 1000 attempts");
}

}  // namespace actpermoma
