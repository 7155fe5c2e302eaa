#include "actpermoma/grasping.hpp"

#include "actpermoma/rng.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <map>

namespace actpermoma
{

std::string to_string(Arm a) { return a == Arm::Left ? "left" : "right"; }

std::string to_string(FailureReason r)
{
  switch (r)
  {
    case FailureReason::None:
      return "none";
    case FailureReason::NoMatchingTruthGrasp:
      return "no_matching_truth_grasp";
    case FailureReason::LowIntrinsicQuality:
      return "low_intrinsic_quality";
    case FailureReason::Unreachable:
      return "unreachable";
    case FailureReason::LowCoverage:
      return "low_coverage";
  }
  return "unknown";
}

double smoothstep(double x, double edge0, double edge1)
{
  const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

namespace
{
// Visits in-bounds voxels whose centers lie inside `box`.
template <class F>
void for_each_voxel_in(const GridGeometry& g, const Aabb& box, F&& f)
{
  const double vs = g.voxel_size();
  const std::array<int, 3> dims{g.dims().x, g.dims().y, g.dims().z};
  std::array<int, 3> lo{};
  std::array<int, 3> hi{};
  for (int a = 0; a < 3; ++a)
  {
    lo[a] = std::max(0, static_cast<int>(std::ceil((box.min[a] - g.origin()[a]) / vs - 0.5)));
    hi[a] = std::min(dims[a] - 1, static_cast<int>(std::floor((box.max[a] - g.origin()[a]) / vs - 0.5)));
  }
  for (int z = lo[2]; z <= hi[2]; ++z)
  {
    for (int y = lo[1]; y <= hi[1]; ++y)
    {
      for (int x = lo[0]; x <= hi[0]; ++x)
      {
        const Index3 i{x, y, z};
        f(i, g.index_to_world_center(i));
      }
    }
  }
}
}  // namespace

double surface_coverage(const TsdfGrid& tsdf, const Primitive& obj, const Vec3& center, double radius)
{
  const GridGeometry& g = tsdf.geometry();
  const double shell = g.voxel_size();
  long total = 0;
  long seen = 0;
  const Aabb ball{center - Vec3::Constant(radius), center + Vec3::Constant(radius)};
  for_each_voxel_in(g, ball, [&](const Index3& i, const Vec3& c) {
    if ((c - center).norm() > radius || !obj.in_visible_shell(c, shell))
    {
      return;
    }
    ++total;
    if (tsdf.state(i) == VoxelState::OccupiedSurface)
    {
      ++seen;
    }
  });
  return total > 0 ? static_cast<double>(seen) / static_cast<double>(total) : 0.0;
}

double object_coverage(const TsdfGrid& tsdf, const Primitive& obj)
{
  const GridGeometry& g = tsdf.geometry();
  const double shell = g.voxel_size();
  long total = 0;
  long seen = 0;
  for_each_voxel_in(g, obj.world_aabb(), [&](const Index3& i, const Vec3& c) {
    if (!obj.in_visible_shell(c, shell))
    {
      return;
    }
    ++total;
    if (tsdf.state(i) == VoxelState::OccupiedSurface)
    {
      ++seen;
    }
  });
  return total > 0 ? static_cast<double>(seen) / static_cast<double>(total) : 0.0;
}

std::vector<Grasp> detect_grasps(const TsdfGrid& tsdf, const Scene& scene, double q_th, std::uint64_t seed,
                                 int step, const DetectionParams& params)
{
  const GridGeometry& g = tsdf.geometry();
  const Primitive& target = scene.target();
  const double radius = params.ball_voxels * g.voxel_size();
  std::map<std::size_t, Grasp> best;
  std::uint64_t k = 0;
  for (const auto& truth : scene.truth_grasps)
  {
    const std::uint64_t id = k++;
    if (truth.object_id != scene.target_id)
    {
      continue;
    }
    const Pose3 world = scene.grasp_world_pose(truth);
    const double cov = surface_coverage(tsdf, target, world.position, radius);
    double q = truth.intrinsic_quality * smoothstep(cov, params.coverage_lo, params.coverage_hi);
    if (params.noise > 0.0)
    {
      Rng rng = Rng::derive(seed, {0x96A5, static_cast<std::uint64_t>(step), id});
      q += rng.uniform(-params.noise, params.noise);
    }
    q = std::clamp(q, 0.0, 1.0);
    if (q < q_th)
    {
      continue;
    }
    const Index3 voxel = g.world_to_index(world.position);
    if (!g.in_bounds(voxel))
    {
      continue;
    }
    const std::size_t n = g.linear(voxel);
    const auto it = best.find(n);
    if (it != best.end() && it->second.quality >= q)
    {
      continue;
    }
    Grasp grasp;
    grasp.pose = Pose3(g.index_to_world_center(voxel), world.orientation);
    grasp.quality = q;
    grasp.voxel = voxel;
    best[n] = grasp;
  }
  std::vector<Grasp> out;
  out.reserve(best.size());
  for (auto& [n, grasp] : best)
  {
    out.push_back(grasp);
  }
  return out;
}

StabilityResult filter_stable(const std::vector<Grasp>& prev, const std::vector<Grasp>& detected, int n_stab)
{
  if (n_stab < 1)
  {
    throw std::invalid_argument("filter_stable: n_stab must be >= 1");
  }
  StabilityResult r;
  r.tracked.reserve(detected.size());
  for (Grasp g : detected)
  {
    g.stable_for = 1;
    for (const auto& p : prev)
    {
      if (p.voxel == g.voxel)
      {
        g.stable_for = p.stable_for + 1;
        break;
      }
    }
    r.tracked.push_back(g);
    if (g.stable_for >= n_stab)
    {
      r.stable.push_back(g);
    }
  }
  return r;
}

RelativeGrasp relative_grasp(const Pose3& grasp, const Pose2& base)
{
  RelativeGrasp r;
  const Vec2 p = base.inverse_transform(grasp.position.head<2>());
  r.distance = p.norm();
  r.height = grasp.position.z();
  const Vec3 approach = grasp.forward();
  const double c = std::cos(base.theta);
  const double s = std::sin(base.theta);
  const Vec2 a(c * approach.x() + s * approach.y(), -s * approach.x() + c * approach.y());
  r.yaw = a.norm() > 1e-6 ? std::atan2(a.y(), a.x()) : std::atan2(p.y(), p.x());
  r.pitch = approach.z() < -0.9 ? PitchClass::TopDown : PitchClass::Side45;
  return r;
}

namespace
{
double tri(double x, double lo, double peak, double hi)
{
  if (x <= lo || x >= hi)
  {
    return 0.0;
  }
  return std::min(1.0, x <= peak ? (x - lo) / (peak - lo) : (hi - x) / (hi - peak));
}

double cos_falloff(double angle, double cutoff)
{
  const double a = std::abs(angle);
  return a >= cutoff ? 0.0 : std::cos(0.5 * kPi * a / cutoff);
}

double yaw_center(int k) { return wrap_angle(deg2rad(10.0 * k)); }

constexpr char kMapMagic[8] = {'A', 'P', 'M', 'R', 'M', 'A', 'P', '1'};
}  // namespace

double reachability_surrogate(double d, double h, double yaw, PitchClass pitch, double arm_offset)
{
  const double s = tri(d, 0.35, 0.65, 1.05) * tri(h, 0.4, 0.8, 1.2) *
                   cos_falloff(wrap_angle(yaw - arm_offset), deg2rad(100.0));
  return pitch == PitchClass::Side45 ? 0.7 * s : s;
}

ReachabilityMap ReachabilityMap::build(Arm arm)
{
  ReachabilityMap m;
  m.arm_ = arm;
  m.arm_offset_ = arm == Arm::Left ? deg2rad(30.0) : deg2rad(-30.0);
  m.scores_.assign(static_cast<std::size_t>(kDistBins) * kHeightBins * kYawBins * kPitchClasses, 0.0f);
  for (int p = 0; p < kPitchClasses; ++p)
  {
    for (int y = 0; y < kYawBins; ++y)
    {
      for (int h = 0; h < kHeightBins; ++h)
      {
        for (int d = 0; d < kDistBins; ++d)
        {
          m.scores_[index(d, h, y, p)] = static_cast<float>(reachability_surrogate(
            d * kDistStep, h * kHeightStep, yaw_center(y), static_cast<PitchClass>(p), m.arm_offset_));
        }
      }
    }
  }
  return m;
}

double ReachabilityMap::score(const RelativeGrasp& g) const
{
  const long d = std::lround(g.distance / kDistStep);
  const long h = std::lround(g.height / kHeightStep);
  if (d < 0 || d >= kDistBins || h < 0 || h >= kHeightBins || !std::isfinite(g.yaw))
  {
    return 0.0;
  }
  double turns = g.yaw / (2.0 * kPi);
  turns -= std::floor(turns);
  const long y = std::lround(turns * kYawBins) % kYawBins;
  return scores_[index(static_cast<int>(d), static_cast<int>(h), static_cast<int>(y), static_cast<int>(g.pitch))];
}

void ReachabilityMap::save(const std::filesystem::path& path) const
{
  static_assert(std::endian::native == std::endian::little, "map files assume a little-endian host");
  const nlohmann::json header = {{"arm", to_string(arm_)},
                                 {"arm_offset", arm_offset_},
                                 {"dist_step", kDistStep},
                                 {"dist_bins", kDistBins},
                                 {"height_step", kHeightStep},
                                 {"height_bins", kHeightBins},
                                 {"yaw_bins", kYawBins},
                                 {"pitch_classes", {"TopDown", "Side45"}},
                                 {"layout", "dist fastest, then height, yaw, pitch"}};
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out)
  {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  out.write(kMapMagic, sizeof kMapMagic);
  const auto len = static_cast<std::uint32_t>(text.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(scores_.data()), static_cast<std::streamsize>(scores_.size() * sizeof(float)));
  if (!out)
  {
    throw std::runtime_error("write failed: " + path.string());
  }
}

ReachabilityMap ReachabilityMap::load(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw std::runtime_error("cannot open " + path.string());
  }
  char magic[sizeof kMapMagic] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMapMagic, sizeof magic) != 0)
  {
    throw std::runtime_error(path.string() + ": not a reachability map");
  }
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string text(len, '\0');
  in.read(text.data(), len);
  if (!in)
  {
    throw std::runtime_error(path.string() + ": truncated header");
  }
  const auto header = nlohmann::json::parse(text);
  if (header.at("dist_bins").get<int>() != kDistBins || header.at("height_bins").get<int>() != kHeightBins ||
      header.at("yaw_bins").get<int>() != kYawBins || header.at("dist_step").get<double>() != kDistStep ||
      header.at("height_step").get<double>() != kHeightStep)
  {
    throw std::runtime_error(path.string() + ": unsupported map discretization");
  }
  ReachabilityMap m;
  m.arm_ = header.at("arm").get<std::string>() == "left" ? Arm::Left : Arm::Right;
  m.arm_offset_ = header.at("arm_offset").get<double>();
  m.scores_.resize(static_cast<std::size_t>(kDistBins) * kHeightBins * kYawBins * kPitchClasses);
  in.read(reinterpret_cast<char*>(m.scores_.data()), static_cast<std::streamsize>(m.scores_.size() * sizeof(float)));
  if (!in)
  {
    throw std::runtime_error(path.string() + ": truncated score block");
  }
  return m;
}

ReachQuery reachability(const ReachabilityMaps& maps, const Pose3& grasp, const Pose2& base)
{
  const RelativeGrasp rel = relative_grasp(grasp, base);
  const double l = maps.left.score(rel);
  const double r = maps.right.score(rel);
  return r > l ? ReachQuery{r, Arm::Right} : ReachQuery{l, Arm::Left};
}

ExecUtility exec_utility(const std::vector<Grasp>& grasps, const CandidatePath& path, const ReachabilityMaps& maps,
                         bool weighted)
{
  ExecUtility u;
  for (std::size_t i = 0; i < grasps.size(); ++i)
  {
    const ReachQuery q = reachability(maps, grasps[i].pose, path.goal);
    if (u.grasp_index < 0 || q.score > u.reach.score)
    {
      u.grasp_index = static_cast<int>(i);
      u.reach = q;
    }
  }
  if (u.grasp_index >= 0)
  {
    u.value = u.reach.score / (weighted ? std::max(path.length, kLenEpsilon) : 1.0);
  }
  return u;
}

ExecutionResult execute_grasp(const Scene& scene, const TsdfGrid& tsdf, const Grasp& grasp, const Pose2& base,
                              const ReachabilityMaps& maps, const ExecutionParams& params)
{
  ExecutionResult r;
  const double tol = params.match_voxels * tsdf.geometry().voxel_size();
  const GroundTruthGrasp* match = nullptr;
  double best = std::numeric_limits<double>::infinity();
  for (const auto* truth : scene.target_grasps())
  {
    const double d = (scene.grasp_world_pose(*truth).position - grasp.pose.position).norm();
    if (d <= tol && d < best)
    {
      best = d;
      match = truth;
    }
  }
  if (!match)
  {
    r.reason = FailureReason::NoMatchingTruthGrasp;
    return r;
  }
  r.intrinsic_quality = match->intrinsic_quality;
  r.reach = reachability(maps, grasp.pose, base).score;
  r.coverage = object_coverage(tsdf, scene.target());
  if (r.intrinsic_quality < params.min_intrinsic)
  {
    r.reason = FailureReason::LowIntrinsicQuality;
  }
  else if (r.reach < params.min_reachability)
  {
    r.reason = FailureReason::Unreachable;
  }
  else if (r.coverage < params.min_coverage)
  {
    r.reason = FailureReason::LowCoverage;
  }
  else
  {
    r.outcome = ExecutionOutcome::Succeeded;
  }
  return r;
}

}  // namespace actpermoma
