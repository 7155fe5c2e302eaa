#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <compare>
#include <cstdint>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace actpermoma
{

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;
using Mat3 = Eigen::Matrix3d;

constexpr double kPi = std::numbers::pi;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }

// Wraps into (-pi, pi].
double wrap_angle(double a);

struct Pose2
{
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose2() = default;
  Pose2(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}

  static Pose2 identity() { return {}; }
  static Pose2 facing(const Vec2& position, const Vec2& look_at);

  Vec2 position() const { return {x, y}; }
  Pose2 inverse() const;
  // Maps a point from this pose's frame into the parent frame.
  Vec2 transform(const Vec2& p) const;
  Vec2 inverse_transform(const Vec2& p) const;
};

Pose2 compose(const Pose2& a, const Pose2& b);
double distance(const Pose2& a, const Pose2& b);

struct Pose3
{
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();

  Pose3() = default;
  Pose3(const Vec3& p, const Quat& q) : position(p), orientation(q.normalized()) {}

  static Pose3 identity() { return {}; }
  // Camera convention: +z optical axis, +x right, +y down. Roll keeps +y
  // pointing toward world -z. When looking straight up or down the world +x
  // axis replaces world up.
  static Pose3 look_at(const Vec3& eye, const Vec3& target);
  static Pose3 from_pose2(const Pose2& p, double z = 0.0);

  Pose3 inverse() const;
  Vec3 transform(const Vec3& p) const { return orientation * p + position; }
  Vec3 inverse_transform(const Vec3& p) const { return orientation.conjugate() * (p - position); }
  Vec3 rotate(const Vec3& v) const { return orientation * v; }
  Vec3 forward() const { return orientation * Vec3::UnitZ(); }
};

Pose3 compose(const Pose3& a, const Pose3& b);

struct Ray
{
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();

  Ray() = default;
  Ray(const Vec3& o, const Vec3& d) : origin(o), direction(d.normalized()) {}

  Vec3 at(double t) const { return origin + t * direction; }
};

struct Aabb
{
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool contains(const Vec3& p) const
  {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Aabb inflated(double margin) const
  {
    return {min - Vec3::Constant(margin), max + Vec3::Constant(margin)};
  }
  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
  // Parametric overlap of the ray with the box, clipped to [t_lo, t_hi].
  bool clip(const Ray& ray, double& t_lo, double& t_hi) const;
};

struct Index3
{
  int x = 0;
  int y = 0;
  int z = 0;

  auto operator<=>(const Index3&) const = default;
};

// Geometry of a dense voxel grid. Voxel (i,j,k) spans
// [origin + i*size, origin + (i+1)*size) along each axis.
class GridGeometry
{
public:
  GridGeometry() = default;
  GridGeometry(const Vec3& origin, double voxel_size, const Index3& dims);

  const Vec3& origin() const { return origin_; }
  double voxel_size() const { return voxel_size_; }
  const Index3& dims() const { return dims_; }
  std::size_t size() const
  {
    return static_cast<std::size_t>(dims_.x) * static_cast<std::size_t>(dims_.y) *
           static_cast<std::size_t>(dims_.z);
  }

  bool in_bounds(const Index3& i) const
  {
    return i.x >= 0 && i.y >= 0 && i.z >= 0 && i.x < dims_.x && i.y < dims_.y && i.z < dims_.z;
  }
  // Row-major, x fastest.
  std::size_t linear(const Index3& i) const
  {
    return static_cast<std::size_t>(i.x) +
           static_cast<std::size_t>(dims_.x) *
             (static_cast<std::size_t>(i.y) + static_cast<std::size_t>(dims_.y) * static_cast<std::size_t>(i.z));
  }
  Index3 unlinear(std::size_t n) const;

  Index3 world_to_index(const Vec3& p) const;
  Vec3 index_to_world_center(const Index3& i) const;
  Aabb bounds() const { return {origin_, origin_ + voxel_size_ * Vec3(dims_.x, dims_.y, dims_.z)}; }
  Aabb voxel_bounds(const Index3& i) const;

private:
  Vec3 origin_ = Vec3::Zero();
  double voxel_size_ = 1.0;
  Index3 dims_{1, 1, 1};
};

template <class Cell>
class VoxelGrid3
{
public:
  VoxelGrid3() = default;
  explicit VoxelGrid3(const GridGeometry& geometry, const Cell& fill = Cell{})
    : geometry_(geometry), cells_(geometry.size(), fill)
  {
  }

  const GridGeometry& geometry() const { return geometry_; }
  std::size_t size() const { return cells_.size(); }

  Cell& at(const Index3& i) { return cells_[geometry_.linear(i)]; }
  const Cell& at(const Index3& i) const { return cells_[geometry_.linear(i)]; }
  Cell& operator[](std::size_t n) { return cells_[n]; }
  const Cell& operator[](std::size_t n) const { return cells_[n]; }

  std::vector<Cell>& cells() { return cells_; }
  const std::vector<Cell>& cells() const { return cells_; }

  bool operator==(const VoxelGrid3& other) const
  {
    return geometry_.origin() == other.geometry_.origin() &&
           geometry_.voxel_size() == other.geometry_.voxel_size() &&
           geometry_.dims() == other.geometry_.dims() && cells_ == other.cells_;
  }

private:
  GridGeometry geometry_;
  std::vector<Cell> cells_;
};

enum class CellState : std::uint8_t
{
  Free,
  Occupied,
  Unknown
};

struct Index2
{
  int x = 0;
  int y = 0;

  auto operator<=>(const Index2&) const = default;
};

class OccupancyGrid2
{
public:
  OccupancyGrid2() = default;
  OccupancyGrid2(const Vec2& origin, double cell_size, int nx, int ny, CellState fill = CellState::Unknown);

  const Vec2& origin() const { return origin_; }
  double cell_size() const { return cell_size_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }

  bool in_bounds(const Index2& c) const { return c.x >= 0 && c.y >= 0 && c.x < nx_ && c.y < ny_; }
  std::size_t linear(const Index2& c) const
  {
    return static_cast<std::size_t>(c.x) + static_cast<std::size_t>(nx_) * static_cast<std::size_t>(c.y);
  }
  CellState at(const Index2& c) const { return cells_[linear(c)]; }
  void set(const Index2& c, CellState s) { cells_[linear(c)] = s; }

  Index2 world_to_cell(const Vec2& p) const;
  Vec2 cell_center(const Index2& c) const;
  bool contains(const Vec2& p) const { return in_bounds(world_to_cell(p)); }

  // True when a disc of `radius` around `p` overlaps any Occupied cell square
  // or leaves the grid.
  bool disc_hits_occupied(const Vec2& p, double radius) const;

  const std::vector<CellState>& cells() const { return cells_; }
  std::vector<CellState>& cells() { return cells_; }

  bool operator==(const OccupancyGrid2&) const = default;

private:
  Vec2 origin_ = Vec2::Zero();
  double cell_size_ = 1.0;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<CellState> cells_;
};

// Exact voxel traversal (Amanatides & Woo). `visit(index, t_enter, t_exit)` is
// called for every voxel whose interior the segment [0, max_range] of the ray
// crosses, in hit order, and stops the walk when it returns false. A ray lying
// exactly on a voxel face is assigned to the voxel on the +direction side.
template <class Visit>
void traverse_ray(const GridGeometry& grid, const Ray& ray, double max_range, Visit&& visit)
{
  if (!(max_range > 0.0))
  {
    return;
  }
  double t0 = 0.0;
  double t1 = max_range;
  if (!grid.bounds().clip(ray, t0, t1) || !(t1 > t0))
  {
    return;
  }

  const double vs = grid.voxel_size();
  const Index3& dims = grid.dims();
  const Vec3 entry = ray.at(t0);
  const std::array<int, 3> n{dims.x, dims.y, dims.z};
  std::array<int, 3> idx{};
  std::array<int, 3> step{};
  std::array<double, 3> t_max{};
  std::array<double, 3> t_delta{};

  for (int a = 0; a < 3; ++a)
  {
    const double d = ray.direction[a];
    const double local = (entry[a] - grid.origin()[a]) / vs;
    int i = static_cast<int>(std::floor(local));
    // On an exact face the negative-going ray belongs to the lower voxel.
    if (d < 0.0 && static_cast<double>(i) == local)
    {
      --i;
    }
    idx[a] = std::clamp(i, 0, n[a] - 1);
    if (d > 0.0)
    {
      step[a] = 1;
      const double boundary = grid.origin()[a] + (idx[a] + 1) * vs;
      t_max[a] = (boundary - ray.origin[a]) / d;
      t_delta[a] = vs / d;
    }
    else if (d < 0.0)
    {
      step[a] = -1;
      const double boundary = grid.origin()[a] + idx[a] * vs;
      t_max[a] = (boundary - ray.origin[a]) / d;
      t_delta[a] = -vs / d;
    }
    else
    {
      step[a] = 0;
      t_max[a] = std::numeric_limits<double>::infinity();
      t_delta[a] = std::numeric_limits<double>::infinity();
    }
  }

  double t_enter = t0;
  while (true)
  {
    const double t_next = std::min({t_max[0], t_max[1], t_max[2]});
    const double t_leave = std::min(t_next, t1);
    if (!visit(Index3{idx[0], idx[1], idx[2]}, t_enter, t_leave))
    {
      return;
    }
    if (t_next >= t1)
    {
      return;
    }
    // Axes crossed at the same parameter advance together (edge/corner hits).
    for (int a = 0; a < 3; ++a)
    {
      if (t_max[a] == t_next)
      {
        idx[a] += step[a];
        t_max[a] += t_delta[a];
        if (idx[a] < 0 || idx[a] >= n[a])
        {
          return;
        }
      }
    }
    t_enter = t_next;
  }
}

std::vector<Index3> traverse_ray(const GridGeometry& grid, const Ray& ray, double max_range);

// Binary grid dump: little-endian header (3 x u32 dims, f32 voxel_size,
// 3 x f32 origin) followed by the raw cells. Cells must be packed floats.
namespace detail
{
void write_grid_header(std::ostream& out, const GridGeometry& g);
GridGeometry read_grid_header(std::istream& in);
}  // namespace detail

template <class Cell>
void write_grid(std::ostream& out, const VoxelGrid3<Cell>& grid)
{
  static_assert(std::is_trivially_copyable_v<Cell>);
  static_assert(sizeof(Cell) % sizeof(float) == 0);
  static_assert(std::endian::native == std::endian::little, "grid dump assumes a little-endian host");
  detail::write_grid_header(out, grid.geometry());
  out.write(reinterpret_cast<const char*>(grid.cells().data()),
            static_cast<std::streamsize>(grid.cells().size() * sizeof(Cell)));
  if (!out)
  {
    throw std::runtime_error("grid dump: write failed");
  }
}

template <class Cell>
VoxelGrid3<Cell> read_grid(std::istream& in)
{
  static_assert(std::is_trivially_copyable_v<Cell>);
  static_assert(std::endian::native == std::endian::little, "grid dump assumes a little-endian host");
  VoxelGrid3<Cell> grid(detail::read_grid_header(in));
  in.read(reinterpret_cast<char*>(grid.cells().data()),
          static_cast<std::streamsize>(grid.cells().size() * sizeof(Cell)));
  if (!in)
  {
    throw std::runtime_error("grid dump: truncated cell block");
  }
  return grid;
}

}  // namespace actpermoma
