#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance binary. None of them share code paths with the library routine
// they check.

#include "actpermoma/grasping.hpp"
#include "actpermoma/perception.hpp"
#include "actpermoma/planning.hpp"
#include "actpermoma/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <set>
#include <utility>
#include <vector>

namespace oracle
{

using namespace actpermoma;

// Exact parametric overlap of a ray with a box by the slab method.
inline std::optional<std::pair<double, double>> slab(const Vec3& lo, const Vec3& hi, const Vec3& o, const Vec3& d,
                                                     double t0, double t1)
{
  for (int a = 0; a < 3; ++a)
  {
    if (d[a] == 0.0)
    {
      if (o[a] < lo[a] || o[a] > hi[a])
      {
        return std::nullopt;
      }
      continue;
    }
    double ta = (lo[a] - o[a]) / d[a];
    double tb = (hi[a] - o[a]) / d[a];
    if (ta > tb)
    {
      std::swap(ta, tb);
    }
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t1 <= t0)
  {
    return std::nullopt;
  }
  return std::make_pair(t0, t1);
}

struct VoxelHit
{
  Index3 index;
  double t_enter = 0.0;
  double t_exit = 0.0;
};

// Every voxel whose interior the segment [0, max_range] crosses, sorted by
// entry parameter. Overlaps shorter than `min_overlap` are treated as grazing.
inline std::vector<VoxelHit> slab_traversal(const GridGeometry& g, const Ray& ray, double max_range,
                                            double min_overlap = 1e-12)
{
  std::vector<VoxelHit> hits;
  const double vs = g.voxel_size();
  for (int z = 0; z < g.dims().z; ++z)
  {
    for (int y = 0; y < g.dims().y; ++y)
    {
      for (int x = 0; x < g.dims().x; ++x)
      {
        const Vec3 lo = g.origin() + vs * Vec3(x, y, z);
        const Vec3 hi = lo + Vec3::Constant(vs);
        if (auto iv = slab(lo, hi, ray.origin, ray.direction, 0.0, max_range); iv && iv->second - iv->first > min_overlap)
        {
          hits.push_back({{x, y, z}, iv->first, iv->second});
        }
      }
    }
  }
  std::sort(hits.begin(), hits.end(), [](const VoxelHit& a, const VoxelHit& b) { return a.t_enter < b.t_enter; });
  return hits;
}

// Voxels containing points sampled every `dt` along the segment.
inline std::set<Index3> sampled_traversal(const GridGeometry& g, const Ray& ray, double max_range, double dt)
{
  std::set<Index3> out;
  const double vs = g.voxel_size();
  for (double t = 0.5 * dt; t < max_range; t += dt)
  {
    const Vec3 local = (ray.at(t) - g.origin()) / vs;
    const Index3 i{static_cast<int>(std::floor(local.x())), static_cast<int>(std::floor(local.y())),
                   static_cast<int>(std::floor(local.z()))};
    if (g.in_bounds(i))
    {
      out.insert(i);
    }
  }
  return out;
}

// Plain Dijkstra over the same move model as the A* planner: 8-connected, no
// corner cutting, Unknown destinations cost `unknown_cost` times the step.
inline std::optional<double> dijkstra_cost(const OccupancyGrid2& occ, const std::vector<bool>& usable, Index2 s,
                                           Index2 g, double unknown_cost)
{
  const int nx = occ.nx();
  const int ny = occ.ny();
  const auto id = [nx](int x, int y) { return static_cast<std::size_t>(y) * nx + x; };
  const auto ok = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < nx && y < ny && (Index2{x, y} == s || Index2{x, y} == g || usable[id(x, y)]);
  };
  std::vector<double> dist(static_cast<std::size_t>(nx) * ny, std::numeric_limits<double>::infinity());
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
  dist[id(s.x, s.y)] = 0.0;
  pq.emplace(0.0, id(s.x, s.y));
  while (!pq.empty())
  {
    const auto [d, n] = pq.top();
    pq.pop();
    if (d > dist[n])
    {
      continue;
    }
    const int x = static_cast<int>(n % nx);
    const int y = static_cast<int>(n / nx);
    for (int dy = -1; dy <= 1; ++dy)
    {
      for (int dx = -1; dx <= 1; ++dx)
      {
        if ((dx == 0 && dy == 0) || !ok(x + dx, y + dy))
        {
          continue;
        }
        if (dx != 0 && dy != 0 && (!ok(x + dx, y) || !ok(x, y + dy)))
        {
          continue;
        }
        double w = occ.cell_size() * ((dx != 0 && dy != 0) ? std::sqrt(2.0) : 1.0);
        if (occ.at({x + dx, y + dy}) == CellState::Unknown)
        {
          w *= unknown_cost;
        }
        const std::size_t m = id(x + dx, y + dy);
        if (d + w < dist[m])
        {
          dist[m] = d + w;
          pq.emplace(dist[m], m);
        }
      }
    }
  }
  const double c = dist[id(g.x, g.y)];
  if (!std::isfinite(c))
  {
    return std::nullopt;
  }
  return c;
}

// Rear-side IG by enumeration: for every pixel ray, every voxel of the grid is
// intersected by slabs; the first OccupiedSurface voxel along the ray closes
// the ray and the Unknown voxels inside the box entered before it count.
inline long rear_side_ig_brute(const TsdfGrid& tsdf, const Pose3& cam, const CameraIntrinsics& intr,
                               const Aabb& box)
{
  const GridGeometry& g = tsdf.geometry();
  std::set<Index3> counted;
  const Mat3 rot = cam.orientation.toRotationMatrix();
  for (int v = 0; v < intr.height; ++v)
  {
    for (int u = 0; u < intr.width; ++u)
    {
      const Ray ray(cam.position, rot * intr.pixel_direction(u, v));
      const auto hits = slab_traversal(g, ray, intr.max_range);
      double t_surface = std::numeric_limits<double>::infinity();
      for (const auto& h : hits)
      {
        if (tsdf.state(h.index) == VoxelState::OccupiedSurface)
        {
          t_surface = std::min(t_surface, h.t_enter);
        }
      }
      if (!std::isfinite(t_surface))
      {
        continue;
      }
      for (const auto& h : hits)
      {
        if (h.t_enter < t_surface && tsdf.state(h.index) == VoxelState::Unknown &&
            box.contains(g.index_to_world_center(h.index)))
        {
          counted.insert(h.index);
        }
      }
    }
  }
  return static_cast<long>(counted.size());
}

// A 6^3 grid of unit-ish voxels with random states, and a box aligned to voxel
// faces so that every voxel whose center is inside lies fully inside.
struct IgFixture
{
  TsdfGrid tsdf;
  Aabb box;
  Pose3 cam;
  CameraIntrinsics intr;
};

inline IgFixture make_ig_fixture(std::uint64_t seed)
{
  Rng rng(seed);
  const double vs = 0.1;
  IgFixture f;
  f.tsdf = TsdfGrid(GridGeometry(Vec3::Zero(), vs, {6, 6, 6}), 0.4);
  for (auto& c : f.tsdf.grid().cells())
  {
    const double r = rng.uniform();
    if (r < 0.45)
    {
      c = {0.0f, 0.0f};
    }
    else if (r < 0.8)
    {
      c = {0.5f, 1.0f};
    }
    else
    {
      c = {-0.5f, 1.0f};
    }
  }
  std::array<int, 3> lo{};
  std::array<int, 3> hi{};
  for (int a = 0; a < 3; ++a)
  {
    lo[a] = rng.uniform_int(0, 2);
    hi[a] = rng.uniform_int(lo[a] + 1, 6);
  }
  f.box = {vs * Vec3(lo[0], lo[1], lo[2]), vs * Vec3(hi[0], hi[1], hi[2])};
  const Vec3 center = Vec3::Constant(0.3);
  const double az = rng.uniform(-kPi, kPi);
  const double el = rng.uniform(-1.2, 1.2);
  const double r = rng.uniform(0.8, 1.5);
  const Vec3 eye = center + r * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
  const Vec3 aim = center + Vec3(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
  f.cam = Pose3::look_at(eye, aim);
  f.intr = CameraIntrinsics{16, 16, deg2rad(rng.uniform(20.0, 50.0)), 3.0};
  return f;
}

// Distance-weighted path IG recomputed term by term from single-view IG calls.
inline double path_ig_terms(const TsdfGrid& tsdf, const CandidatePath& path, const CameraIntrinsics& intr,
                            const Aabb& box, bool weighted)
{
  double sum = 0.0;
  for (const auto& wp : path.waypoints)
  {
    const double ig = static_cast<double>(rear_side_ig(tsdf, wp.cam, intr, box).rear_side_count);
    const double d = weighted ? std::max(wp.arc_length, 0.1) : 1.0;
    sum += ig / (d * d);
  }
  return sum;
}

// Grasp executability utility by exhaustive search over grasps and both arms.
inline double exec_utility_terms(const std::vector<Grasp>& grasps, const CandidatePath& path,
                                 const ReachabilityMaps& maps, bool weighted)
{
  double best = 0.0;
  for (const auto& g : grasps)
  {
    const RelativeGrasp rel = relative_grasp(g.pose, path.goal);
    best = std::max({best, maps.left.score(rel), maps.right.score(rel)});
  }
  const double len = weighted ? std::max(path.length, 0.1) : 1.0;
  return best / len;
}

// A random scoring fixture: a target volume with random voxel states, a few
// candidate paths with camera waypoints and a handful of grasps.
struct ScoreFixture
{
  TsdfGrid tsdf;
  Aabb box;
  std::vector<CandidatePath> paths;
  std::vector<Grasp> grasps;
  CameraIntrinsics intr{16, 16, deg2rad(25.0), 3.0};
};

inline ScoreFixture make_score_fixture(std::uint64_t seed)
{
  Rng rng(seed);
  ScoreFixture f;
  const Vec3 target(0.0, 0.0, 0.8);
  f.tsdf = TsdfGrid::target_volume(target, 0.6, 12);
  for (auto& c : f.tsdf.grid().cells())
  {
    const double r = rng.uniform();
    c = r < 0.5 ? TsdfCell{0.0f, 0.0f} : (r < 0.85 ? TsdfCell{0.6f, 2.0f} : TsdfCell{-0.3f, 2.0f});
  }
  f.box = {target - Vec3::Constant(0.15), target + Vec3::Constant(0.15)};
  const int n_paths = rng.uniform_int(1, 5);
  for (int p = 0; p < n_paths; ++p)
  {
    CandidatePath path;
    path.goal_id = p;
    const int n_wp = rng.uniform_int(1, 5);
    double arc = rng.uniform(0.0, 0.3);
    for (int w = 0; w < n_wp; ++w)
    {
      const double a = rng.uniform(-kPi, kPi);
      const double r = rng.uniform(0.6, 2.0);
      PathWaypoint wp;
      wp.base = Pose2::facing(r * Vec2(std::cos(a), std::sin(a)), target.head<2>());
      wp.cam = Pose3::look_at(Vec3(wp.base.x, wp.base.y, rng.uniform(1.1, 1.3)), target);
      wp.arc_length = arc;
      arc += rng.uniform(0.2, 0.8);
      path.waypoints.push_back(wp);
    }
    path.goal = path.waypoints.back().base;
    path.length = path.waypoints.back().arc_length;
    path.base_path = {path.waypoints.front().base.position(), path.goal.position()};
    f.paths.push_back(path);
  }
  const int n_grasps = rng.uniform_int(0, 4);
  for (int i = 0; i < n_grasps; ++i)
  {
    Grasp g;
    const Vec3 pos = target + Vec3(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05));
    const Vec3 approach = rng.bernoulli(0.5) ? Vec3(0, 0, -1)
                                             : Vec3(std::cos(rng.uniform(-kPi, kPi)), 0.3, -1.0).normalized();
    g.pose = Pose3::look_at(pos - 0.1 * approach, pos);
    g.pose.position = pos;
    g.quality = rng.uniform(0.8, 1.0);
    g.voxel = f.tsdf.geometry().world_to_index(pos);
    f.grasps.push_back(g);
  }
  return f;
}

}  // namespace oracle
