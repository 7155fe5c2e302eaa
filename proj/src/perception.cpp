#include "actpermoma/perception.hpp"

#include <json.hpp>

#include <fstream>

namespace actpermoma
{

double polyline_length(const std::vector<Vec2>& points)
{
  double len = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i)
  {
    len += (points[i] - points[i - 1]).norm();
  }
  return len;
}

TsdfGrid::TsdfGrid(const GridGeometry& geometry, double truncation)
  : grid_(geometry), truncation_(truncation), occlusion_band_(3.0 * geometry.voxel_size())
{
  if (!(truncation > 0.0))
  {
    throw std::invalid_argument("TsdfGrid: truncation must be positive");
  }
}

TsdfGrid TsdfGrid::target_volume(const Vec3& center, double size, int resolution)
{
  const double vs = size / resolution;
  const GridGeometry g(center - Vec3::Constant(0.5 * size), vs, {resolution, resolution, resolution});
  return {g, 4.0 * vs};
}

TsdfGrid TsdfGrid::navigation_volume(const Arena& arena, double voxel_size, double height)
{
  const Vec2 extent = arena.max - arena.min;
  const Index3 dims{static_cast<int>(std::lround(extent.x() / voxel_size)),
                    static_cast<int>(std::lround(extent.y() / voxel_size)),
                    static_cast<int>(std::lround(height / voxel_size))};
  const GridGeometry g(Vec3(arena.min.x(), arena.min.y(), 0.0), voxel_size, dims);
  return {g, 4.0 * voxel_size};
}

void integrate_depth(TsdfGrid& tsdf, const DepthImage& depth, const Pose3& cam)
{
  const CameraIntrinsics& intr = depth.intrinsics;
  const double f = intr.focal();
  const double cx = 0.5 * intr.width;
  const double cy = 0.5 * intr.height;
  const Mat3 rt = cam.orientation.toRotationMatrix().transpose();
  const Vec3 t = -(rt * cam.position);
  const double trunc = tsdf.truncation();
  const double band = tsdf.occlusion_band();

  auto& grid = tsdf.grid();
  const GridGeometry& g = grid.geometry();
  const Index3 dims = g.dims();
  std::size_t n = 0;
  for (int z = 0; z < dims.z; ++z)
  {
    for (int y = 0; y < dims.y; ++y)
    {
      for (int x = 0; x < dims.x; ++x, ++n)
      {
        const Vec3 pc = rt * g.index_to_world_center({x, y, z}) + t;
        if (pc.z() <= 1e-9)
        {
          continue;
        }
        const double uf = f * pc.x() / pc.z() + cx;
        const double vf = f * pc.y() / pc.z() + cy;
        if (!(uf >= 0.0 && vf >= 0.0 && uf < intr.width && vf < intr.height))
        {
          continue;
        }
        const double range = pc.norm();
        const double d = depth.at(static_cast<int>(uf), static_cast<int>(vf));
        double value;
        if (std::isnan(d))
        {
          if (range > intr.max_range)
          {
            continue;
          }
          value = 1.0;
        }
        else
        {
          const double sdf = d - range;
          if (sdf < -band)
          {
            continue;
          }
          value = std::clamp(sdf / trunc, -1.0, 1.0);
        }
        TsdfCell& c = grid[n];
        const double w = c.weight;
        c.tsdf = static_cast<float>((c.tsdf * w + value) / (w + 1.0));
        c.weight = std::min(c.weight + 1.0f, TsdfGrid::kWeightCap);
      }
    }
  }
}

IgResult rear_side_ig(const TsdfGrid& tsdf, const Pose3& cam, const CameraIntrinsics& intr, const Aabb& target_bbox)
{
  IgResult result;
  const GridGeometry& g = tsdf.geometry();
  const double vs = g.voxel_size();

  // Index range of voxels whose centers lie in the box.
  const std::array<int, 3> dims{g.dims().x, g.dims().y, g.dims().z};
  std::array<int, 3> lo{};
  std::array<int, 3> hi{};
  for (int a = 0; a < 3; ++a)
  {
    lo[a] = std::max(0, static_cast<int>(std::ceil((target_bbox.min[a] - g.origin()[a]) / vs - 0.5)));
    hi[a] = std::min(dims[a] - 1, static_cast<int>(std::floor((target_bbox.max[a] - g.origin()[a]) / vs - 0.5)));
  }
  result.rays_cast = static_cast<long>(intr.width) * intr.height;
  if (lo[0] > hi[0] || lo[1] > hi[1] || lo[2] > hi[2])
  {
    return result;
  }
  const auto in_box = [&](const Index3& i) {
    return i.x >= lo[0] && i.x <= hi[0] && i.y >= lo[1] && i.y <= hi[1] && i.z >= lo[2] && i.z <= hi[2];
  };

  std::vector<std::uint8_t> counted(g.size(), 0);
  std::vector<std::size_t> pending;
  const Mat3 rot = cam.orientation.toRotationMatrix();
  const auto& cells = tsdf.grid();
  for (int v = 0; v < intr.height; ++v)
  {
    for (int u = 0; u < intr.width; ++u)
    {
      const Ray ray(cam.position, rot * intr.pixel_direction(u, v));
      double tb0 = 0.0;
      double tb1 = intr.max_range;
      if (!target_bbox.clip(ray, tb0, tb1))
      {
        continue;
      }
      pending.clear();
      bool hit = false;
      traverse_ray(g, ray, intr.max_range, [&](const Index3& i, double, double t_exit) {
        const std::size_t n = g.linear(i);
        const VoxelState s = TsdfGrid::state(cells[n]);
        if (s == VoxelState::OccupiedSurface)
        {
          hit = true;
          return false;
        }
        if (s == VoxelState::Unknown && in_box(i))
        {
          pending.push_back(n);
        }
        // Past the box with nothing pending, no later voxel can count.
        return !(t_exit > tb1 && pending.empty());
      });
      if (!hit)
      {
        continue;
      }
      for (const auto n : pending)
      {
        if (!counted[n])
        {
          counted[n] = 1;
          ++result.rear_side_count;
        }
      }
    }
  }
  return result;
}

double path_ig(const TsdfGrid& tsdf, const CandidatePath& path, const CameraIntrinsics& intr,
               const Aabb& target_bbox, bool weighted, std::vector<PathIgTerm>* terms)
{
  double total = 0.0;
  for (const auto& wp : path.waypoints)
  {
    const long ig = rear_side_ig(tsdf, wp.cam, intr, target_bbox).rear_side_count;
    const double dist = weighted ? std::max(wp.arc_length, kDistEpsilon) : 1.0;
    total += static_cast<double>(ig) / (dist * dist);
    if (terms)
    {
      terms->push_back({ig, dist});
    }
  }
  return total;
}

OccupancyGrid2 project_occupancy(const TsdfGrid& tsdf, double band_lo, double band_hi)
{
  const GridGeometry& g = tsdf.geometry();
  const Index3 dims = g.dims();
  OccupancyGrid2 occ(g.origin().head<2>(), g.voxel_size(), dims.x, dims.y, CellState::Unknown);
  std::vector<int> layers;
  for (int z = 0; z < dims.z; ++z)
  {
    const double zc = g.origin().z() + (z + 0.5) * g.voxel_size();
    if (zc >= band_lo && zc <= band_hi)
    {
      layers.push_back(z);
    }
  }
  for (int y = 0; y < dims.y; ++y)
  {
    for (int x = 0; x < dims.x; ++x)
    {
      bool occupied = false;
      bool all_free = !layers.empty();
      for (const int z : layers)
      {
        const VoxelState s = tsdf.state({x, y, z});
        if (s == VoxelState::OccupiedSurface)
        {
          occupied = true;
          break;
        }
        if (s != VoxelState::Free)
        {
          all_free = false;
        }
      }
      occ.set({x, y}, occupied ? CellState::Occupied : (all_free ? CellState::Free : CellState::Unknown));
    }
  }
  return occ;
}

void save_tsdf(const TsdfGrid& tsdf, const std::filesystem::path& path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
  {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  write_grid(out, tsdf.grid());
  const GridGeometry& g = tsdf.geometry();
  const Vec3 c = g.bounds().center();
  const nlohmann::json side = {{"truncation", tsdf.truncation()},
                               {"occlusion_band", tsdf.occlusion_band()},
                               {"center", {c.x(), c.y(), c.z()}},
                               {"origin", {g.origin().x(), g.origin().y(), g.origin().z()}},
                               {"voxel_size", g.voxel_size()}};
  std::ofstream sj(path.string() + ".json");
  if (!sj)
  {
    throw std::runtime_error("cannot write sidecar for " + path.string());
  }
  sj << side.dump(2) << '\n';
}

TsdfGrid load_tsdf(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw std::runtime_error("cannot open " + path.string());
  }
  auto cells = read_grid<TsdfCell>(in);
  std::ifstream sj(path.string() + ".json");
  if (!sj)
  {
    throw std::runtime_error("missing sidecar " + path.string() + ".json");
  }
  const auto side = nlohmann::json::parse(sj);
  // The binary header stores the geometry as f32; the sidecar keeps the
  // exact doubles.
  const auto& o = side.at("origin");
  const GridGeometry g(Vec3(o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()),
                       side.at("voxel_size").get<double>(), cells.geometry().dims());
  TsdfGrid tsdf(g, side.at("truncation").get<double>());
  tsdf.set_occlusion_band(side.at("occlusion_band").get<double>());
  tsdf.grid().cells() = std::move(cells.cells());
  return tsdf;
}

}  // namespace actpermoma
