#pragma once

#include "actpermoma/geom.hpp"
#include "actpermoma/grasping.hpp"
#include "actpermoma/scene.hpp"

#include <json.hpp>

namespace actpermoma
{

nlohmann::json to_json(const Vec2& v);
nlohmann::json to_json(const Vec3& v);
nlohmann::json to_json(const Pose2& p);
nlohmann::json to_json(const Pose3& p);
nlohmann::json to_json(const Aabb& b);
nlohmann::json to_json(const Index3& i);
nlohmann::json to_json(const Primitive& p);
nlohmann::json to_json(const Scene& s);
nlohmann::json to_json(const Grasp& g, int step);
nlohmann::json to_json(const OccupancyGrid2& occ);

Vec2 vec2_from_json(const nlohmann::json& j);
Vec3 vec3_from_json(const nlohmann::json& j);
Pose2 pose2_from_json(const nlohmann::json& j);
Pose3 pose3_from_json(const nlohmann::json& j);
Aabb aabb_from_json(const nlohmann::json& j);
Primitive primitive_from_json(const nlohmann::json& j);
Scene scene_from_json(const nlohmann::json& j);
OccupancyGrid2 occupancy_from_json(const nlohmann::json& j);

}  // namespace actpermoma
