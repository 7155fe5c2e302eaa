#pragma once

#include "actpermoma/candidate_path.hpp"
#include "actpermoma/geom.hpp"
#include "actpermoma/scene.hpp"

#include <filesystem>

namespace actpermoma
{

struct TsdfCell
{
  float tsdf = 0.0f;    // normalized signed distance in [-1, 1]
  float weight = 0.0f;  // 0 = never observed

  bool operator==(const TsdfCell&) const = default;
};

enum class VoxelState : std::uint8_t
{
  Unknown,
  Free,
  OccupiedSurface
};

class TsdfGrid
{
public:
  static constexpr float kWeightCap = 64.0f;

  TsdfGrid() = default;
  TsdfGrid(const GridGeometry& geometry, double truncation);

  // Cube of `size` meters centered on `center`, `resolution` voxels per side,
  // truncation of four voxels.
  static TsdfGrid target_volume(const Vec3& center, double size = 0.6, int resolution = 40);
  // Coarse volume over the whole arena for navigation.
  static TsdfGrid navigation_volume(const Arena& arena, double voxel_size = 0.1, double height = 2.0);

  const GridGeometry& geometry() const { return grid_.geometry(); }
  const VoxelGrid3<TsdfCell>& grid() const { return grid_; }
  VoxelGrid3<TsdfCell>& grid() { return grid_; }
  double truncation() const { return truncation_; }
  // Voxels more than this far behind the measured depth (three voxels by
  // default) are left untouched, so the back of objects stays unknown.
  double occlusion_band() const { return occlusion_band_; }
  void set_occlusion_band(double band) { occlusion_band_ = band; }

  VoxelState state(const Index3& i) const { return state(grid_.at(i)); }
  static VoxelState state(const TsdfCell& c)
  {
    if (c.weight <= 0.0f)
    {
      return VoxelState::Unknown;
    }
    return c.tsdf > 0.0f ? VoxelState::Free : VoxelState::OccupiedSurface;
  }

  bool operator==(const TsdfGrid& other) const = default;

private:
  VoxelGrid3<TsdfCell> grid_;
  double truncation_ = 0.0;
  double occlusion_band_ = 0.0;
};

// Weighted-average projective fusion of one depth image taken from `cam`.
void integrate_depth(TsdfGrid& tsdf, const DepthImage& depth, const Pose3& cam);

inline VoxelState voxel_state(const TsdfGrid& tsdf, const Index3& i) { return tsdf.state(i); }

struct IgResult
{
  long rear_side_count = 0;
  long rays_cast = 0;
};

// Rear-side voxel information gain of a virtual camera at `cam`: each ray walks
// the grid until it meets an observed surface and the Unknown voxels inside
// `target_bbox` that it crossed on the way (the hidden rear side of what has
// been seen) are counted, each voxel at most once.
IgResult rear_side_ig(const TsdfGrid& tsdf, const Pose3& cam, const CameraIntrinsics& intr, const Aabb& target_bbox);

// Per-view terms of the path information gain.
struct PathIgTerm
{
  long ig = 0;
  double dist = 0.0;  // after clamping, 1 when unweighted
};

constexpr double kDistEpsilon = 0.1;

// Sum over path views of IG_rear / dist^2, dist being the along-path distance
// clamped below at kDistEpsilon. `weighted = false` forces dist = 1.
double path_ig(const TsdfGrid& tsdf, const CandidatePath& path, const CameraIntrinsics& intr,
               const Aabb& target_bbox, bool weighted = true, std::vector<PathIgTerm>* terms = nullptr);

// Column reduction over voxels whose centers lie inside [band_lo, band_hi].
OccupancyGrid2 project_occupancy(const TsdfGrid& tsdf, double band_lo, double band_hi);

// Binary grid dump plus a JSON sidecar `<path>.json` with the truncation and
// volume center.
void save_tsdf(const TsdfGrid& tsdf, const std::filesystem::path& path);
TsdfGrid load_tsdf(const std::filesystem::path& path);

}  // namespace actpermoma
