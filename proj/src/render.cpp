#include "actpermoma/harness.hpp"

#include "actpermoma/serialization.hpp"

#include <cstdio>
#include <fstream>

namespace actpermoma
{

using nlohmann::json;

namespace
{
constexpr double kPixelsPerMeter = 100.0;

class Svg
{
public:
  Svg(const Vec2& lo, const Vec2& hi) : lo_(lo), hi_(hi)
  {
    const double w = (hi.x() - lo.x()) * kPixelsPerMeter;
    const double h = (hi.y() - lo.y()) * kPixelsPerMeter;
    append("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n", w,
           h, w, h);
    append("<rect x=\"0\" y=\"0\" width=\"%.0f\" height=\"%.0f\" fill=\"#ffffff\"/>\n", w, h);
  }

  // World x right, world y up.
  double px(double x) const { return (x - lo_.x()) * kPixelsPerMeter; }
  double py(double y) const { return (hi_.y() - y) * kPixelsPerMeter; }

  void rect(const Vec2& min, const Vec2& max, const char* fill, double opacity)
  {
    append("<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"%s\" fill-opacity=\"%.2f\"/>\n",
           px(min.x()), py(max.y()), (max.x() - min.x()) * kPixelsPerMeter, (max.y() - min.y()) * kPixelsPerMeter,
           fill, opacity);
  }

  void polygon(const std::vector<Vec2>& pts, const char* fill, const char* stroke)
  {
    text_ += "<polygon points=\"";
    points(pts);
    append("\" fill=\"%s\" stroke=\"%s\" stroke-width=\"1\"/>\n", fill, stroke);
  }

  void circle(const Vec2& c, double r_m, const char* fill, const char* stroke)
  {
    append("<circle cx=\"%.2f\" cy=\"%.2f\" r=\"%.2f\" fill=\"%s\" stroke=\"%s\" stroke-width=\"1\"/>\n", px(c.x()),
           py(c.y()), r_m * kPixelsPerMeter, fill, stroke);
  }

  void polyline(const std::vector<Vec2>& pts, const char* stroke, double width, const char* cls)
  {
    append("<polyline class=\"%s\" points=\"", cls);
    points(pts);
    append("\" fill=\"none\" stroke=\"%s\" stroke-width=\"%.1f\"/>\n", stroke, width);
  }

  void marker(const Vec2& c, const char* color)
  {
    const double x = px(c.x());
    const double y = py(c.y());
    append("<path d=\"M%.2f %.2fL%.2f %.2fM%.2f %.2fL%.2f %.2f\" stroke=\"%s\" stroke-width=\"2\"/>\n", x - 4, y - 4,
           x + 4, y + 4, x - 4, y + 4, x + 4, y - 4, color);
  }

  std::string finish()
  {
    text_ += "</svg>\n";
    return text_;
  }

private:
  template <class... Args>
  void append(const char* fmt, Args... args)
  {
    char buf[512];
    std::snprintf(buf, sizeof(buf), fmt, args...);
    text_ += buf;
  }

  void points(const std::vector<Vec2>& pts)
  {
    for (std::size_t i = 0; i < pts.size(); ++i)
    {
      append(i == 0 ? "%.2f,%.2f" : " %.2f,%.2f", px(pts[i].x()), py(pts[i].y()));
    }
  }

  Vec2 lo_;
  Vec2 hi_;
  std::string text_;
};

void draw_primitive(Svg& svg, const Primitive& p)
{
  if (p.tag == PrimitiveTag::Floor)
  {
    return;
  }
  const char* fill = "#9e9e9e";
  if (p.tag == PrimitiveTag::Table)
  {
    fill = "#d7ccc8";
  }
  else if (p.tag == PrimitiveTag::Obstacle)
  {
    fill = "#5d4037";
  }
  const Vec2 c = p.pose.position.head<2>();
  if (const auto* box = std::get_if<BoxShape>(&p.shape))
  {
    const Mat3 r = p.pose.orientation.toRotationMatrix();
    const Vec2 ex = r.block<2, 1>(0, 0) * box->half_extents.x();
    const Vec2 ey = r.block<2, 1>(0, 1) * box->half_extents.y();
    svg.polygon({c + ex + ey, c - ex + ey, c - ex - ey, c + ex - ey}, fill, "#424242");
  }
  else
  {
    svg.circle(c, std::get<CylinderShape>(p.shape).radius, fill, "#424242");
  }
}
}  // namespace

std::string render_topdown_svg(const std::vector<json>& records)
{
  if (records.empty())
  {
    throw IoError("render: empty trace");
  }
  const json* header = nullptr;
  const json* result = nullptr;
  std::vector<const json*> steps;
  for (const auto& r : records)
  {
    const auto type = r.value("type", "");
    if (type == "header")
    {
      header = &r;
    }
    else if (type == "result")
    {
      result = &r;
    }
    else if (type == "step")
    {
      steps.push_back(&r);
    }
  }
  if (!header)
  {
    throw IoError("render: trace has no header record");
  }

  Arena arena;
  std::optional<Scene> scene;
  if (header->contains("scene"))
  {
    scene = scene_from_json(header->at("scene"));
    arena = scene->arena;
  }
  Svg svg(arena.min, arena.max);

  if (result && result->contains("occupancy"))
  {
    const auto occ = occupancy_from_json(result->at("occupancy"));
    const Vec2 half = Vec2::Constant(0.5 * occ.cell_size());
    for (int y = 0; y < occ.ny(); ++y)
    {
      for (int x = 0; x < occ.nx(); ++x)
      {
        const Index2 c{x, y};
        const CellState s = occ.at(c);
        if (s == CellState::Free)
        {
          continue;
        }
        const Vec2 center = occ.cell_center(c);
        svg.rect(center - half, center + half, s == CellState::Occupied ? "#e57373" : "#cfd8dc",
                 s == CellState::Occupied ? 0.6 : 0.5);
      }
    }
  }

  if (scene)
  {
    for (const auto& p : scene->primitives)
    {
      draw_primitive(svg, p);
    }
    svg.marker(scene->target_center.head<2>(), "#d32f2f");
  }

  if (!steps.empty())
  {
    const auto& planner = steps.back()->at("planner");
    for (const auto& g : planner.at("goals"))
    {
      const Pose2 p = pose2_from_json(g.at("pose"));
      svg.circle(p.position(), 0.03, "#fff176", "#f9a825");
    }
    std::vector<Vec2> selected;
    for (const auto& p : planner.at("selected_path"))
    {
      selected.push_back(vec2_from_json(p));
    }
    if (!selected.empty())
    {
      svg.polyline(selected, "#43a047", 1.5, "selected");
    }
  }

  if (header->contains("start"))
  {
    std::vector<Vec2> trajectory{pose2_from_json(header->at("start")).position()};
    std::vector<Vec2> views;
    for (const auto* s : steps)
    {
      const Vec2 p = pose2_from_json(s->at("robot_after")).position();
      trajectory.push_back(p);
      if (s->at("view").get<bool>())
      {
        views.push_back(p);
      }
    }
    svg.polyline(trajectory, "#1e88e5", 2.0, "trajectory");
    svg.circle(trajectory.front(), kBaseRadius, "none", "#1e88e5");
    svg.circle(trajectory.back(), kBaseRadius, "none", "#0d47a1");
    for (const auto* s : steps)
    {
      if (s->contains("execution"))
      {
        const auto& e = s->at("execution");
        const Vec3 g = vec3_from_json(e.at("grasp").at("position"));
        svg.marker(g.head<2>(), e.at("outcome") == "Succeeded" ? "#2e7d32" : "#000000");
      }
    }
  }
  return svg.finish();
}

void render_topdown(const std::filesystem::path& trace, const std::filesystem::path& out)
{
  std::ifstream in(trace);
  if (!in)
  {
    throw IoError("cannot open trace " + trace.string());
  }
  std::vector<json> records;
  std::string line;
  while (std::getline(in, line))
  {
    if (line.empty())
    {
      continue;
    }
    try
    {
      records.push_back(json::parse(line));
    }
    catch (const json::exception& e)
    {
      throw IoError("malformed trace " + trace.string() + ": " + e.what());
    }
  }
  const std::string svg = render_topdown_svg(records);
  if (out.has_parent_path())
  {
    std::filesystem::create_directories(out.parent_path());
  }
  std::ofstream f(out, std::ios::binary);
  if (!f)
  {
    throw IoError("cannot write " + out.string());
  }
  f << svg;
  if (!f)
  {
    throw IoError("write failed for " + out.string());
  }
}

}  // namespace actpermoma
