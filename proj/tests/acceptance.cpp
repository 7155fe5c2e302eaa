// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
#include "actpermoma/harness.hpp"
#include "actpermoma/perception.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

using namespace actpermoma;

namespace
{
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Criterion
{
  int id;
  std::string name;
  bool pass;
  std::string detail;
};

std::vector<Criterion> g_report;

void report(int id, const std::string& name, bool pass, const std::string& detail)
{
  std::printf("%s %d %s | %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  g_report.push_back({id, name, pass, detail});
}

std::string fmt(const char* f, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// Every episode run by the gate, for the invariant checks.
struct Runs
{
  std::map<std::string, std::vector<EpisodeResult>> cells;
  std::map<std::string, double> wall;

  const std::vector<EpisodeResult>& get(const std::string& key, const RunConfig& cfg)
  {
    auto it = cells.find(key);
    if (it == cells.end())
    {
      const auto t0 = Clock::now();
      auto r = run_episodes(cfg);
      wall[key] = seconds_since(t0);
      const auto m = summarize(r);
      std::printf("  run %-28s SR %5.1f AR %5.1f GFR %5.1f d %.2f v %.1f (%.1f s)\n", key.c_str(), m.sr, m.ar,
                  m.gfr, m.d_mean, m.v_mean, wall[key]);
      std::fflush(stdout);
      it = cells.emplace(key, std::move(r)).first;
    }
    return it->second;
  }
};

RunConfig cell(PolicyKind policy, ScenarioKind scenario, bool hard = false)
{
  RunConfig cfg;
  cfg.policy = policy;
  cfg.scenario = scenario;
  cfg.hard_grasps = hard;
  cfg.episodes = 100;
  return cfg;
}

Ray random_ray(Rng& rng, const GridGeometry& g)
{
  const Aabb b = g.bounds();
  const Vec3 origin = b.center() + b.extent().maxCoeff() *
                                     Vec3(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
  const Vec3 aim = b.min + b.extent().cwiseProduct(Vec3(rng.uniform(), rng.uniform(), rng.uniform()));
  Vec3 d = aim - origin;
  if (d.norm() < 1e-6)
  {
    d = Vec3::UnitX();
  }
  return {origin, d};
}

bool close(double a, double b, double rel = 1e-12) { return std::abs(a - b) <= rel * std::max(1.0, std::abs(b)); }

void criterion_oracles()
{
  const auto t0 = Clock::now();
  const ReachabilityMaps maps;

  int ray_bad = 0;
  Rng rng(2024);
  for (int c = 0; c < 1000; ++c)
  {
    const GridGeometry g(Vec3::Zero(), 0.1, {8, 8, 8});
    const Ray ray = random_ray(rng, g);
    const double max_range = rng.uniform(0.2, 3.0);
    const double dt = 1e-4;
    const auto got = traverse_ray(g, ray, max_range);
    const auto exact = oracle::slab_traversal(g, ray, max_range);
    bool ok = got.size() == exact.size();
    for (std::size_t k = 0; ok && k < got.size(); ++k)
    {
      ok = got[k] == exact[k].index;
    }
    const std::set<Index3> visited(got.begin(), got.end());
    for (const auto& i : oracle::sampled_traversal(g, ray, max_range, dt))
    {
      ok = ok && visited.contains(i);
    }
    ray_bad += !ok;
  }

  int astar_bad = 0;
  Rng grid_rng(77);
  for (int trial = 0; trial < 200; ++trial)
  {
    OccupancyGrid2 occ(Vec2::Zero(), 1.0, 20, 20, CellState::Free);
    const double p_occ = grid_rng.uniform(0.1, 0.35);
    const double p_unknown = grid_rng.uniform(0.0, 0.3);
    for (auto& c : occ.cells())
    {
      const double r = grid_rng.uniform();
      c = r < p_occ ? CellState::Occupied : (r < p_occ + p_unknown ? CellState::Unknown : CellState::Free);
    }
    const Index2 s{grid_rng.uniform_int(0, 19), grid_rng.uniform_int(0, 19)};
    const Index2 g{grid_rng.uniform_int(0, 19), grid_rng.uniform_int(0, 19)};
    occ.set(s, CellState::Free);
    occ.set(g, CellState::Free);
    const TraversabilityMap nav(occ, 0.01);
    std::vector<bool> usable(occ.cells().size());
    for (std::size_t n = 0; n < usable.size(); ++n)
    {
      usable[n] = occ.cells()[n] != CellState::Occupied;
    }
    const double unknown_cost = grid_rng.bernoulli(0.5) ? 1.05 : grid_rng.uniform(1.0, 3.0);
    const auto got = plan_path(nav, Pose2(s.x + 0.5, s.y + 0.5, 0.0), Pose2(g.x + 0.5, g.y + 0.5, 0.0), unknown_cost);
    const auto want = oracle::dijkstra_cost(occ, usable, s, g, unknown_cost);
    astar_bad += got.has_value() != want.has_value() || (got && !close(got->cost, *want));
  }

  int ig_bad = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed)
  {
    const auto f = oracle::make_ig_fixture(seed);
    ig_bad += rear_side_ig(f.tsdf, f.cam, f.intr, f.box).rear_side_count !=
              oracle::rear_side_ig_brute(f.tsdf, f.cam, f.intr, f.box);
  }

  int score_bad = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed)
  {
    const auto f = oracle::make_score_fixture(seed);
    for (const bool weighted : {true, false})
    {
      const auto scores = score_paths(f.paths, f.tsdf, f.grasps, maps, f.intr, f.box, weighted);
      for (std::size_t i = 0; i < f.paths.size(); ++i)
      {
        score_bad += !close(scores[i].j_ig, oracle::path_ig_terms(f.tsdf, f.paths[i], f.intr, f.box, weighted)) ||
                     !close(scores[i].j_exec, oracle::exec_utility_terms(f.grasps, f.paths[i], maps, weighted));
      }
    }
  }

  const double t = seconds_since(t0);
  report(1, "oracle equivalences",
         ray_bad == 0 && astar_bad == 0 && ig_bad == 0 && score_bad == 0 && t < 30.0,
         fmt("mismatches: traversal %d/1000, A* %d/200, rear-side IG %d/200, path scores %d/100 fixtures; %.1f s "
             "(limit 30 s)",
             ray_bad, astar_bad, ig_bad, score_bad, t));
}

void criterion_summarize()
{
  std::vector<EpisodeResult> r;
  r.insert(r.end(), 477, EpisodeResult{Outcome::Success});
  r.insert(r.end(), 7, EpisodeResult{Outcome::Abort});
  r.insert(r.end(), 16, EpisodeResult{Outcome::GraspFailure});
  const auto m = summarize(r);
  report(2, "metric arithmetic",
         close(m.sr, 95.4, 1e-12) && close(m.ar, 1.4, 1e-12) && close(m.gfr, 3.2, 1e-12),
         fmt("summarize(477, 7, 16) = SR %.12g AR %.12g GFR %.12g (want 95.4 / 1.4 / 3.2)", m.sr, m.ar, m.gfr));
}

void criterion_ablation(Runs& runs)
{
  const auto& full = runs.get("complex ActPerMoMa", cell(PolicyKind::ActPerMoMa, ScenarioKind::Complex));
  const auto& nw = runs.get("complex no-weights", cell(PolicyKind::ActPerMoMaNoWeights, ScenarioKind::Complex));
  const auto sr = compare(full, nw, Metric::Sr);
  const auto d = compare(full, nw, Metric::D);
  const bool sr_ok = sr.a_value - sr.b_value >= 20.0 && sr.verdict == Verdict::ABetter;
  const bool d_ok = d.b_value > d.a_value && d.verdict == Verdict::ABetter;
  report(3, "ablation ordering (weights)", sr_ok && d_ok,
         fmt("SR %.1f vs no-weights %.1f (need +20, p %.3g) %s; d_mean %.2f vs no-weights %.2f m (p %.3g) %s",
             sr.a_value, sr.b_value, sr.p_value, sr_ok ? "ok" : "NOT MET", d.a_value, d.b_value, d.p_value,
             d_ok ? "ok" : "NOT MET"));
}

void criterion_hard(Runs& runs)
{
  const auto& full = runs.get("hard ActPerMoMa", cell(PolicyKind::ActPerMoMa, ScenarioKind::Complex, true));
  const auto& breyer = runs.get("hard Breyer", cell(PolicyKind::BreyerNbv, ScenarioKind::Complex, true));
  const auto& random = runs.get("hard Random", cell(PolicyKind::Random, ScenarioKind::Complex, true));
  const auto vb = compare(full, breyer, Metric::Ar);
  const auto vr = compare(full, random, Metric::Ar);
  const bool ok_b = vb.a_value < vb.b_value && vb.verdict == Verdict::ABetter;
  const bool ok_r = vr.a_value < vr.b_value && vr.verdict == Verdict::ABetter;
  report(4, "hard-grasp abort ordering", ok_b && ok_r,
         fmt("AR %.1f vs Breyer %.1f (p %.3g) %s; vs Random %.1f (p %.3g) %s", vb.a_value, vb.b_value, vb.p_value,
             ok_b ? "ok" : "NOT MET", vr.b_value, vr.p_value, ok_r ? "ok" : "NOT MET"));
}

void criterion_momentum(Runs& runs)
{
  RunConfig m800 = cell(PolicyKind::ActPerMoMa, ScenarioKind::Complex);
  m800.planner.momentum = 800.0;
  RunConfig m0 = m800;
  m0.planner.momentum = 0.0;
  const auto a = summarize(runs.get("complex ActPerMoMa", m800));
  const auto b = summarize(runs.get("complex momentum 0", m0));
  const bool d_ok = a.d_mean <= b.d_mean;
  const bool sr_ok = a.sr >= b.sr;
  report(5, "momentum effect", d_ok && sr_ok,
         fmt("momentum 800: d_mean %.3f m, SR %.1f; momentum 0: d_mean %.3f m, SR %.1f; d %s, SR %s", a.d_mean, a.sr,
             b.d_mean, b.sr, d_ok ? "ok" : "NOT MET", sr_ok ? "ok" : "NOT MET"));
}

void criterion_naive(Runs& runs)
{
  const auto simple = summarize(runs.get("simple Naive", cell(PolicyKind::Naive, ScenarioKind::Simple)));
  const auto complex = summarize(runs.get("complex Naive", cell(PolicyKind::Naive, ScenarioKind::Complex)));
  const bool drop_ok = simple.sr - complex.sr >= 5.0;
  std::string others;
  bool smallest = true;
  for (const auto k : all_policies())
  {
    if (k == PolicyKind::Naive)
    {
      continue;
    }
    const auto m = summarize(runs.get("simple " + to_string(k), cell(k, ScenarioKind::Simple)));
    smallest = smallest && simple.d_mean < m.d_mean;
    others += fmt(" %s %.2f", to_string(k).c_str(), m.d_mean);
  }
  report(6, "naive degradation", drop_ok && smallest,
         fmt("Naive SR simple %.1f - complex %.1f = %.1f (need 5) %s; simple d_mean Naive %.2f vs%s %s", simple.sr,
             complex.sr, simple.sr - complex.sr, drop_ok ? "ok" : "NOT MET", simple.d_mean, others.c_str(),
             smallest ? "ok" : "NOT MET"));
}

void criterion_invariants(Runs& runs)
{
  // IG non-negative, and non-increasing once the first view is integrated.
  int ig_bad = 0;
  int ig_checks = 0;
  const CameraIntrinsics ig{32, 32, deg2rad(25.0), 3.0};
  for (std::uint64_t seed = 0; seed < 10; ++seed)
  {
    const Scene scene = generate_scene(ScenarioKind::Complex, false, seed);
    TsdfGrid t = TsdfGrid::target_volume(scene.target_center, 0.6, 40);
    Rng rng(seed);
    const Pose3 first = Pose3::look_at(scene.target_center + Vec3(1.2, 0.0, 0.4), scene.target_center);
    integrate_depth(t, render_depth(scene, first, CameraIntrinsics{}), first);
    for (int k = 0; k < 8; ++k)
    {
      const double a = rng.uniform(-kPi, kPi);
      const Pose3 cam = Pose3::look_at(
        scene.target_center + Vec3(std::cos(a), std::sin(a), 0.0) * rng.uniform(0.7, 1.5) + Vec3(0, 0, 0.4),
        scene.target_center);
      const long before = rear_side_ig(t, cam, ig, scene.target_bbox).rear_side_count;
      integrate_depth(t, render_depth(scene, cam, CameraIntrinsics{}), cam);
      const long after = rear_side_ig(t, cam, ig, scene.target_bbox).rear_side_count;
      ig_bad += before < 0 || after < 0 || after > before;
      ++ig_checks;
    }
  }

  int rate_bad = 0;
  int safety = 0;
  long episodes = 0;
  for (const auto& [key, r] : runs.cells)
  {
    const auto m = summarize(r);
    rate_bad += !close(m.sr + m.ar + m.gfr, 100.0, 1e-9);
    for (const auto& e : r)
    {
      safety += e.safety_violations;
    }
    episodes += static_cast<long>(r.size());
  }

  RunConfig det = cell(PolicyKind::ActPerMoMa, ScenarioKind::Complex);
  det.episodes = 10;
  const bool parallel_ok = run_episodes(det, 1) == run_episodes(det, 4);
  int trace_bad = 0;
  for (int e = 0; e < 3; ++e)
  {
    std::ostringstream a;
    std::ostringstream b;
    run_episode(det, e, &a);
    run_episode(det, e, &b);
    trace_bad += a.str() != b.str();
  }
  const bool rerun_ok = run_episodes(det, 1) == std::vector<EpisodeResult>(runs.cells.at("complex ActPerMoMa").begin(),
                                                                          runs.cells.at("complex ActPerMoMa").begin() + 10);

  int argmax_bad = 0;
  PlannerConfig cfg;
  cfg.momentum = 0.0;
  Rng rng(123);
  for (int trial = 0; trial < 300; ++trial)
  {
    const int n = rng.uniform_int(1, 8);
    std::vector<CandidatePath> paths(n);
    std::vector<PathScore> scores(n);
    for (int i = 0; i < n; ++i)
    {
      const double len = rng.uniform(0.1, 3.0);
      paths[i].base_path = {Vec2::Zero(), Vec2(len, 0.0)};
      paths[i].length = len;
      paths[i].goal = Pose2(len, 0.0, 0.0);
      paths[i].goal_id = i;
      scores[i].goal_id = i;
      scores[i].j_ig = std::floor(rng.uniform(0.0, 4.0)) * 100.0;
      scores[i].j_exec = std::floor(rng.uniform(0.0, 3.0)) * 0.1;
    }
    const bool grasp = rng.bernoulli(0.5);
    const double w = grasp ? cfg.w_ig : 1.0;
    int best = 0;
    for (int i = 1; i < n; ++i)
    {
      const double ui = w * scores[i].j_ig + cfg.w_exec * cfg.exec_scale * scores[i].j_exec;
      const double ub = w * scores[best].j_ig + cfg.w_exec * cfg.exec_scale * scores[best].j_exec;
      if (ui > ub || (ui == ub && paths[i].length < paths[best].length))
      {
        best = i;
      }
    }
    argmax_bad += select_path(paths, scores, cfg, PlannerState{}, grasp).index != best;
  }

  const bool ok = ig_bad == 0 && rate_bad == 0 && parallel_ok && trace_bad == 0 && rerun_ok && safety == 0 &&
                  argmax_bad == 0;
  report(7, "invariants", ok,
         fmt("IG violations %d/%d; rate sums off %d/%zu cells; serial==parallel %s; rerun identical %s, traces "
             "differing %d/3; safety violations %d over %ld episodes; argmax mismatches %d/300",
             ig_bad, ig_checks, rate_bad, runs.cells.size(), parallel_ok ? "yes" : "no", rerun_ok ? "yes" : "no",
             trace_bad, safety, episodes, argmax_bad));
}

void criterion_timing(Runs& runs)
{
  RunConfig cfg = cell(PolicyKind::ActPerMoMa, ScenarioKind::Complex);
  double worst = 0.0;
  int worst_steps = 0;
  for (int e = 0; e < 10; ++e)
  {
    const auto t0 = Clock::now();
    const auto r = run_episode(cfg, e);
    const double t = seconds_since(t0);
    if (t > worst)
    {
      worst = t;
      worst_steps = r.steps;
    }
  }
  runs.get("complex ActPerMoMa", cfg);
  const double batch = runs.wall.at("complex ActPerMoMa");
  report(8, "performance budget", worst < 5.0 && batch < 180.0,
         fmt("worst single complex episode %.2f s (%d steps, limit 5 s); 100 complex episodes %.1f s on %d "
             "threads (limit 180 s)",
             worst, worst_steps, batch, worker_count()));
}
}  // namespace

int main()
{
  const auto t0 = Clock::now();
  Runs runs;
  criterion_oracles();
  criterion_summarize();
  criterion_ablation(runs);
  criterion_hard(runs);
  criterion_momentum(runs);
  criterion_naive(runs);
  criterion_invariants(runs);
  criterion_timing(runs);

  int failed = 0;
  for (const auto& c : g_report)
  {
    failed += !c.pass;
  }
  std::printf("acceptance: %zu criteria, %d failed, %.0f s\n", g_report.size(), failed, seconds_since(t0));
  return failed == 0 ? 0 : 1;
}
