#include "actpermoma/perception.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>

using namespace actpermoma;

namespace
{
Primitive cube(const Vec3& c, double half)
{
  Primitive p;
  p.shape = BoxShape{Vec3::Constant(half)};
  p.pose = Pose3(c, Quat::Identity());
  return p;
}
}  // namespace

TEST_CASE("rear_side_ig equals brute-force enumeration on 6^3 fixtures")
{
  long total = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed)
  {
    const auto f = oracle::make_ig_fixture(seed);
    const long got = rear_side_ig(f.tsdf, f.cam, f.intr, f.box).rear_side_count;
    const long want = oracle::rear_side_ig_brute(f.tsdf, f.cam, f.intr, f.box);
    CHECK_MESSAGE(got == want, "seed " << seed);
    total += want;
  }
  CHECK(total > 0);
}

TEST_CASE("rear_side_ig on hand-made grids")
{
  // One row of voxels along x: unknown, unknown, surface. A camera looking
  // down +x counts the two unknowns only when the box covers them.
  TsdfGrid t(GridGeometry(Vec3::Zero(), 1.0, {3, 1, 1}), 4.0);
  t.grid().at({2, 0, 0}) = {-0.5f, 1.0f};
  const CameraIntrinsics intr{16, 16, deg2rad(1.0), 10.0};
  const Pose3 cam = Pose3::look_at(Vec3(-2.0, 0.5, 0.5), Vec3(3.0, 0.5, 0.5));
  CHECK(rear_side_ig(t, cam, intr, {Vec3::Zero(), Vec3(3, 1, 1)}).rear_side_count == 2);
  CHECK(rear_side_ig(t, cam, intr, {Vec3::Zero(), Vec3(1, 1, 1)}).rear_side_count == 1);
  // Without a surface behind them unknown voxels do not count.
  t.grid().at({2, 0, 0}) = {0.0f, 0.0f};
  CHECK(rear_side_ig(t, cam, intr, {Vec3::Zero(), Vec3(3, 1, 1)}).rear_side_count == 0);
  // A free voxel in front of the surface is not counted.
  t.grid().at({2, 0, 0}) = {-0.5f, 1.0f};
  t.grid().at({1, 0, 0}) = {0.5f, 1.0f};
  CHECK(rear_side_ig(t, cam, intr, {Vec3::Zero(), Vec3(3, 1, 1)}).rear_side_count == 1);
}

TEST_CASE("integration carves free space and leaves the far side unknown")
{
  const Vec3 c(0.0, 0.0, 0.8);
  TsdfGrid t = TsdfGrid::target_volume(c, 0.6, 40);
  const std::vector<Primitive> prims{cube(c, 0.1)};
  const Pose3 cam = Pose3::look_at(Vec3(-1.0, 0.0, 0.8), c);
  integrate_depth(t, render_depth(prims, cam, CameraIntrinsics{}), cam);
  const GridGeometry& g = t.geometry();
  CHECK(t.state(g.world_to_index(Vec3(-0.25, 0.0, 0.8))) == VoxelState::Free);
  CHECK(t.state(g.world_to_index(Vec3(-0.1 + 0.003, 0.0, 0.8))) == VoxelState::OccupiedSurface);
  CHECK(t.state(g.world_to_index(Vec3(0.05, 0.0, 0.8))) == VoxelState::Unknown);
  CHECK(t.state(g.world_to_index(Vec3(0.25, 0.0, 0.8))) == VoxelState::Unknown);
  for (const auto& cell : t.grid().cells())
  {
    CHECK(cell.weight <= TsdfGrid::kWeightCap);
    CHECK(cell.tsdf >= -1.0f);
    CHECK(cell.tsdf <= 1.0f);
  }
}

// An empty grid has no observed surface and so zero IG everywhere; the
// property is checked once a first view is in.
TEST_CASE("IG is non-negative and does not grow after integrating its own view")
{
  for (std::uint64_t seed = 0; seed < 10; ++seed)
  {
    const Scene scene = generate_scene(ScenarioKind::Complex, false, seed);
    TsdfGrid t = TsdfGrid::target_volume(scene.target_center, 0.6, 40);
    Rng rng(seed);
    const CameraIntrinsics ig{32, 32, deg2rad(25.0), 3.0};
    const Pose3 first = Pose3::look_at(scene.target_center + Vec3(1.2, 0.0, 0.4), scene.target_center);
    integrate_depth(t, render_depth(scene, first, CameraIntrinsics{}), first);
    for (int k = 0; k < 8; ++k)
    {
      const double a = rng.uniform(-kPi, kPi);
      const Pose3 cam = Pose3::look_at(
        scene.target_center + Vec3(std::cos(a), std::sin(a), 0.0) * rng.uniform(0.7, 1.5) + Vec3(0, 0, 0.4),
        scene.target_center);
      const long before = rear_side_ig(t, cam, ig, scene.target_bbox).rear_side_count;
      CHECK(before >= 0);
      integrate_depth(t, render_depth(scene, cam, CameraIntrinsics{}), cam);
      const long after = rear_side_ig(t, cam, ig, scene.target_bbox).rear_side_count;
      CHECK(after >= 0);
      CHECK_MESSAGE(after <= before, "seed " << seed << " k " << k << " " << before << " -> " << after);
    }
  }
}

TEST_CASE("path_ig is the sum of its per-view terms")
{
  for (std::uint64_t seed = 0; seed < 20; ++seed)
  {
    const auto f = oracle::make_score_fixture(seed);
    for (const auto& p : f.paths)
    {
      for (const bool weighted : {true, false})
      {
        std::vector<PathIgTerm> terms;
        const double got = path_ig(f.tsdf, p, f.intr, f.box, weighted, &terms);
        CHECK(got == doctest::Approx(oracle::path_ig_terms(f.tsdf, p, f.intr, f.box, weighted)).epsilon(1e-12));
        REQUIRE(terms.size() == p.waypoints.size());
        for (std::size_t k = 0; k < terms.size(); ++k)
        {
          CHECK(terms[k].dist == (weighted ? std::max(p.waypoints[k].arc_length, kDistEpsilon) : 1.0));
        }
      }
    }
  }
}

TEST_CASE("two equal-IG views at different distances weigh by inverse square")
{
  const auto f = oracle::make_ig_fixture(3);
  CandidatePath p;
  PathWaypoint a;
  a.cam = f.cam;
  a.arc_length = 1.0;
  PathWaypoint b = a;
  b.arc_length = 3.0;
  p.waypoints = {a, b};
  const double ig = static_cast<double>(rear_side_ig(f.tsdf, f.cam, f.intr, f.box).rear_side_count);
  CHECK(path_ig(f.tsdf, p, f.intr, f.box, true) == doctest::Approx(ig + ig / 9.0));
  CHECK(path_ig(f.tsdf, p, f.intr, f.box, false) == doctest::Approx(2.0 * ig));
}

TEST_CASE("occupancy projection")
{
  TsdfGrid t(GridGeometry(Vec3::Zero(), 0.1, {3, 1, 4}), 0.4);
  // Column 0: free in the band. Column 1: surface in the band. Column 2:
  // surface only below the band.
  for (int z = 0; z < 4; ++z)
  {
    t.grid().at({0, 0, z}) = {0.5f, 1.0f};
    t.grid().at({1, 0, z}) = {z == 2 ? -0.2f : 0.5f, 1.0f};
    t.grid().at({2, 0, z}) = {z == 0 ? -0.2f : 0.5f, 1.0f};
  }
  const auto occ = project_occupancy(t, 0.1, 0.4);
  CHECK(occ.at({0, 0}) == CellState::Free);
  CHECK(occ.at({1, 0}) == CellState::Occupied);
  CHECK(occ.at({2, 0}) == CellState::Free);
  t.grid().at({0, 0, 3}) = {0.0f, 0.0f};
  CHECK(project_occupancy(t, 0.1, 0.4).at({0, 0}) == CellState::Unknown);
}

TEST_CASE("TSDF save and load round trip")
{
  const auto f = oracle::make_ig_fixture(8);
  TsdfGrid t = f.tsdf;
  t.set_occlusion_band(0.07);
  const auto dir = std::filesystem::temp_directory_path() / "actpermoma_tsdf_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "grid.bin";
  save_tsdf(t, path);
  CHECK(load_tsdf(path) == t);
  std::filesystem::remove_all(dir);
  CHECK_THROWS(load_tsdf(dir / "missing.bin"));
}
