#include "actpermoma/serialization.hpp"

namespace actpermoma
{

using nlohmann::json;

json to_json(const Vec2& v) { return json::array({v.x(), v.y()}); }
json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json to_json(const Pose2& p) { return json{{"x", p.x}, {"y", p.y}, {"theta", p.theta}}; }

json to_json(const Pose3& p)
{
  const Quat& q = p.orientation;
  return json{{"position", to_json(p.position)}, {"orientation", json::array({q.w(), q.x(), q.y(), q.z()})}};
}

json to_json(const Aabb& b) { return json{{"min", to_json(b.min)}, {"max", to_json(b.max)}}; }
json to_json(const Index3& i) { return json::array({i.x, i.y, i.z}); }

namespace
{
const char* tag_name(PrimitiveTag t)
{
  switch (t)
  {
    case PrimitiveTag::Floor:
      return "floor";
    case PrimitiveTag::Table:
      return "table";
    case PrimitiveTag::Object:
      return "object";
    case PrimitiveTag::Obstacle:
      return "obstacle";
  }
  return "object";
}

PrimitiveTag tag_from_name(const std::string& s)
{
  if (s == "floor")
  {
    return PrimitiveTag::Floor;
  }
  if (s == "table")
  {
    return PrimitiveTag::Table;
  }
  if (s == "object")
  {
    return PrimitiveTag::Object;
  }
  if (s == "obstacle")
  {
    return PrimitiveTag::Obstacle;
  }
  throw std::invalid_argument("unknown primitive tag '" + s + "'");
}
}  // namespace

json to_json(const Primitive& p)
{
  json j{{"pose", to_json(p.pose)}, {"tag", tag_name(p.tag)}, {"object_id", p.object_id}};
  if (const auto* box = std::get_if<BoxShape>(&p.shape))
  {
    j["shape"] = "box";
    j["half_extents"] = to_json(box->half_extents);
  }
  else
  {
    const auto& cyl = std::get<CylinderShape>(p.shape);
    j["shape"] = "cylinder";
    j["radius"] = cyl.radius;
    j["height"] = cyl.height;
  }
  return j;
}

json to_json(const Scene& s)
{
  json prims = json::array();
  for (const auto& p : s.primitives)
  {
    prims.push_back(to_json(p));
  }
  json grasps = json::array();
  for (const auto& g : s.truth_grasps)
  {
    grasps.push_back({{"object_id", g.object_id},
                      {"pose", to_json(g.pose)},
                      {"intrinsic_quality", g.intrinsic_quality},
                      {"approach", to_string(g.approach)}});
  }
  return json{{"kind", to_string(s.kind)},
              {"hard_grasps", s.hard_grasps},
              {"seed", s.seed},
              {"primitives", prims},
              {"target_id", s.target_id},
              {"target_center", to_json(s.target_center)},
              {"target_bbox", to_json(s.target_bbox)},
              {"arena", {{"min", to_json(s.arena.min)}, {"max", to_json(s.arena.max)}}},
              {"approach_bearing", s.approach_bearing},
              {"truth_grasps", grasps}};
}

json to_json(const Grasp& g, int step)
{
  return json{{"step", step},
              {"voxel", to_json(g.voxel)},
              {"quality", g.quality},
              {"stable_for", g.stable_for},
              {"position", to_json(g.pose.position)}};
}

json to_json(const OccupancyGrid2& occ)
{
  std::string cells;
  cells.reserve(occ.cells().size());
  for (const auto c : occ.cells())
  {
    cells.push_back(c == CellState::Free ? 'F' : (c == CellState::Occupied ? 'O' : 'U'));
  }
  return json{{"origin", to_json(occ.origin())},
              {"cell_size", occ.cell_size()},
              {"nx", occ.nx()},
              {"ny", occ.ny()},
              {"cells", cells}};
}

Vec2 vec2_from_json(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }
Vec3 vec3_from_json(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

Pose2 pose2_from_json(const json& j)
{
  return {j.at("x").get<double>(), j.at("y").get<double>(), j.at("theta").get<double>()};
}

Pose3 pose3_from_json(const json& j)
{
  // Assigned without renormalizing so a round trip is bit-exact.
  Pose3 p;
  p.position = vec3_from_json(j.at("position"));
  const auto& q = j.at("orientation");
  p.orientation = Quat(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(), q.at(3).get<double>());
  return p;
}

Aabb aabb_from_json(const json& j) { return {vec3_from_json(j.at("min")), vec3_from_json(j.at("max"))}; }

Primitive primitive_from_json(const json& j)
{
  Primitive p;
  const auto shape = j.at("shape").get<std::string>();
  if (shape == "box")
  {
    p.shape = BoxShape{vec3_from_json(j.at("half_extents"))};
  }
  else if (shape == "cylinder")
  {
    p.shape = CylinderShape{j.at("radius").get<double>(), j.at("height").get<double>()};
  }
  else
  {
    throw std::invalid_argument("unknown primitive shape '" + shape + "'");
  }
  p.pose = pose3_from_json(j.at("pose"));
  p.tag = tag_from_name(j.at("tag").get<std::string>());
  p.object_id = j.at("object_id").get<int>();
  return p;
}

Scene scene_from_json(const json& j)
{
  Scene s;
  s.kind = scenario_from_string(j.at("kind").get<std::string>());
  s.hard_grasps = j.at("hard_grasps").get<bool>();
  s.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& p : j.at("primitives"))
  {
    s.primitives.push_back(primitive_from_json(p));
  }
  s.target_id = j.at("target_id").get<int>();
  s.target_center = vec3_from_json(j.at("target_center"));
  s.target_bbox = aabb_from_json(j.at("target_bbox"));
  s.arena.min = vec2_from_json(j.at("arena").at("min"));
  s.arena.max = vec2_from_json(j.at("arena").at("max"));
  s.approach_bearing = j.at("approach_bearing").get<double>();
  for (const auto& g : j.at("truth_grasps"))
  {
    GroundTruthGrasp t;
    t.object_id = g.at("object_id").get<int>();
    t.pose = pose3_from_json(g.at("pose"));
    t.intrinsic_quality = g.at("intrinsic_quality").get<double>();
    t.approach = g.at("approach").get<std::string>() == "TopDown" ? GraspApproach::TopDown : GraspApproach::Side45;
    s.truth_grasps.push_back(t);
  }
  return s;
}

OccupancyGrid2 occupancy_from_json(const json& j)
{
  OccupancyGrid2 occ(vec2_from_json(j.at("origin")), j.at("cell_size").get<double>(), j.at("nx").get<int>(),
                     j.at("ny").get<int>());
  const auto cells = j.at("cells").get<std::string>();
  if (cells.size() != occ.cells().size())
  {
    throw std::invalid_argument("occupancy snapshot: cell count mismatch");
  }
  for (std::size_t i = 0; i < cells.size(); ++i)
  {
    occ.cells()[i] = cells[i] == 'F' ? CellState::Free : (cells[i] == 'O' ? CellState::Occupied : CellState::Unknown);
  }
  return occ;
}

}  // namespace actpermoma
