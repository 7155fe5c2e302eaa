#include "actpermoma/geom.hpp"

#include <cstring>

namespace actpermoma
{

double wrap_angle(double a)
{
  if (!std::isfinite(a))
  {
    return a;
  }
  double r = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  if (r <= -kPi)
  {
    r += 2.0 * kPi;
  }
  return r;
}

Pose2 Pose2::facing(const Vec2& position, const Vec2& look_at)
{
  const Vec2 d = look_at - position;
  return {position.x(), position.y(), std::atan2(d.y(), d.x())};
}

Pose2 Pose2::inverse() const
{
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {-(c * x + s * y), -(-s * x + c * y), -theta};
}

Vec2 Pose2::transform(const Vec2& p) const
{
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c * p.x() - s * p.y() + x, s * p.x() + c * p.y() + y};
}

Vec2 Pose2::inverse_transform(const Vec2& p) const
{
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double dx = p.x() - x;
  const double dy = p.y() - y;
  return {c * dx + s * dy, -s * dx + c * dy};
}

Pose2 compose(const Pose2& a, const Pose2& b)
{
  const Vec2 t = a.transform(b.position());
  return {t.x(), t.y(), a.theta + b.theta};
}

double distance(const Pose2& a, const Pose2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

Pose3 Pose3::look_at(const Vec3& eye, const Vec3& target)
{
  Vec3 forward = target - eye;
  const double n = forward.norm();
  if (n < 1e-12)
  {
    return {eye, Quat::Identity()};
  }
  forward /= n;
  Vec3 right = forward.cross(Vec3::UnitZ());
  if (right.norm() < 1e-9)
  {
    right = forward.cross(Vec3::UnitX());
  }
  right.normalize();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return {eye, Quat(r)};
}

Pose3 Pose3::from_pose2(const Pose2& p, double z)
{
  return {Vec3(p.x, p.y, z), Quat(Eigen::AngleAxisd(p.theta, Vec3::UnitZ()))};
}

Pose3 Pose3::inverse() const
{
  const Quat qi = orientation.conjugate();
  return {qi * (-position), qi};
}

Pose3 compose(const Pose3& a, const Pose3& b)
{
  return {a.orientation * b.position + a.position, a.orientation * b.orientation};
}

bool Aabb::clip(const Ray& ray, double& t_lo, double& t_hi) const
{
  for (int a = 0; a < 3; ++a)
  {
    const double d = ray.direction[a];
    const double o = ray.origin[a];
    if (d == 0.0)
    {
      if (o < min[a] || o > max[a])
      {
        return false;
      }
      continue;
    }
    double ta = (min[a] - o) / d;
    double tb = (max[a] - o) / d;
    if (ta > tb)
    {
      std::swap(ta, tb);
    }
    t_lo = std::max(t_lo, ta);
    t_hi = std::min(t_hi, tb);
    if (t_lo > t_hi)
    {
      return false;
    }
  }
  return true;
}

GridGeometry::GridGeometry(const Vec3& origin, double voxel_size, const Index3& dims)
  : origin_(origin), voxel_size_(voxel_size), dims_(dims)
{
  if (!(voxel_size > 0.0) || dims.x <= 0 || dims.y <= 0 || dims.z <= 0)
  {
    throw std::invalid_argument("GridGeometry: voxel size and dims must be positive");
  }
}

Index3 GridGeometry::unlinear(std::size_t n) const
{
  const auto nx = static_cast<std::size_t>(dims_.x);
  const auto ny = static_cast<std::size_t>(dims_.y);
  return {static_cast<int>(n % nx), static_cast<int>((n / nx) % ny), static_cast<int>(n / (nx * ny))};
}

Index3 GridGeometry::world_to_index(const Vec3& p) const
{
  const Vec3 l = (p - origin_) / voxel_size_;
  return {static_cast<int>(std::floor(l.x())), static_cast<int>(std::floor(l.y())),
          static_cast<int>(std::floor(l.z()))};
}

Vec3 GridGeometry::index_to_world_center(const Index3& i) const
{
  return origin_ + voxel_size_ * Vec3(i.x + 0.5, i.y + 0.5, i.z + 0.5);
}

Aabb GridGeometry::voxel_bounds(const Index3& i) const
{
  const Vec3 lo = origin_ + voxel_size_ * Vec3(i.x, i.y, i.z);
  return {lo, lo + Vec3::Constant(voxel_size_)};
}

std::vector<Index3> traverse_ray(const GridGeometry& grid, const Ray& ray, double max_range)
{
  std::vector<Index3> out;
  traverse_ray(grid, ray, max_range, [&](const Index3& i, double, double) {
    out.push_back(i);
    return true;
  });
  return out;
}

OccupancyGrid2::OccupancyGrid2(const Vec2& origin, double cell_size, int nx, int ny, CellState fill)
  : origin_(origin), cell_size_(cell_size), nx_(nx), ny_(ny),
    cells_(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), fill)
{
  if (!(cell_size > 0.0) || nx <= 0 || ny <= 0)
  {
    throw std::invalid_argument("OccupancyGrid2: cell size and dims must be positive");
  }
}

Index2 OccupancyGrid2::world_to_cell(const Vec2& p) const
{
  const Vec2 l = (p - origin_) / cell_size_;
  return {static_cast<int>(std::floor(l.x())), static_cast<int>(std::floor(l.y()))};
}

Vec2 OccupancyGrid2::cell_center(const Index2& c) const
{
  return origin_ + cell_size_ * Vec2(c.x + 0.5, c.y + 0.5);
}

bool OccupancyGrid2::disc_hits_occupied(const Vec2& p, double radius) const
{
  const Vec2 lo = origin_;
  const Vec2 hi = origin_ + cell_size_ * Vec2(nx_, ny_);
  if (p.x() - radius < lo.x() || p.y() - radius < lo.y() || p.x() + radius > hi.x() || p.y() + radius > hi.y())
  {
    return true;
  }
  const Index2 c0 = world_to_cell(p - Vec2::Constant(radius));
  const Index2 c1 = world_to_cell(p + Vec2::Constant(radius));
  const double r2 = radius * radius;
  for (int y = std::max(0, c0.y); y <= std::min(ny_ - 1, c1.y); ++y)
  {
    for (int x = std::max(0, c0.x); x <= std::min(nx_ - 1, c1.x); ++x)
    {
      if (cells_[linear({x, y})] != CellState::Occupied)
      {
        continue;
      }
      const double x0 = origin_.x() + x * cell_size_;
      const double y0 = origin_.y() + y * cell_size_;
      const double dx = std::max({x0 - p.x(), 0.0, p.x() - (x0 + cell_size_)});
      const double dy = std::max({y0 - p.y(), 0.0, p.y() - (y0 + cell_size_)});
      if (dx * dx + dy * dy < r2)
      {
        return true;
      }
    }
  }
  return false;
}

namespace detail
{
namespace
{
void put_u32(std::ostream& out, std::uint32_t v)
{
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(b, 4);
}

void put_f32(std::ostream& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t get_u32(std::istream& in)
{
  unsigned char b[4] = {};
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in)
  {
    throw std::runtime_error("grid dump: truncated header");
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

float get_f32(std::istream& in) { return std::bit_cast<float>(get_u32(in)); }
}  // namespace

void write_grid_header(std::ostream& out, const GridGeometry& g)
{
  put_u32(out, static_cast<std::uint32_t>(g.dims().x));
  put_u32(out, static_cast<std::uint32_t>(g.dims().y));
  put_u32(out, static_cast<std::uint32_t>(g.dims().z));
  put_f32(out, static_cast<float>(g.voxel_size()));
  for (int a = 0; a < 3; ++a)
  {
    put_f32(out, static_cast<float>(g.origin()[a]));
  }
}

GridGeometry read_grid_header(std::istream& in)
{
  Index3 dims;
  dims.x = static_cast<int>(get_u32(in));
  dims.y = static_cast<int>(get_u32(in));
  dims.z = static_cast<int>(get_u32(in));
  const double vs = get_f32(in);
  Vec3 origin;
  for (int a = 0; a < 3; ++a)
  {
    origin[a] = get_f32(in);
  }
  return {origin, vs, dims};
}
}  // namespace detail

}  // namespace actpermoma
