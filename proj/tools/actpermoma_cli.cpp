#include "actpermoma/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace actpermoma;

namespace
{
struct CommonOptions
{
  std::string config;
  std::optional<int> episodes;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 0;
  bool no_traces = false;
};

void add_common(CLI::App* cmd, CommonOptions& o)
{
  cmd->add_option("--config", o.config, "JSON config mirroring RunConfig")->check(CLI::ExistingFile);
  cmd->add_option("--episodes", o.episodes, "Episodes per cell")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Base seed; episode i uses seed + i");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--threads", o.threads, "Worker threads (default: ACTPERMOMA_THREADS or all cores)");
  cmd->add_flag("--no-traces", o.no_traces, "Skip per-episode JSONL traces");
}

RunConfig resolve(const CommonOptions& o)
{
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (o.episodes)
  {
    cfg.episodes = *o.episodes;
  }
  if (o.seed)
  {
    cfg.base_seed = *o.seed;
  }
  if (!o.out.empty())
  {
    cfg.output_dir = o.out;
  }
  return cfg;
}

void print_summary(const std::string& label, const MetricsSummary& m)
{
  std::printf("%-32s SR %6.2f  AR %6.2f  GFR %6.2f  d %6.2f +- %5.2f m  v %6.1f +- %5.1f\n", label.c_str(), m.sr, m.ar,
              m.gfr, m.d_mean, m.d_std, m.v_mean, m.v_std);
}
}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Active perception for mobile manipulation: surrogate simulator and experiment harness"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  std::string policy;
  std::string scenario;
  bool hard = false;
  auto* run = app.add_subcommand("run", "Run episodes of one policy and write metrics");
  run->add_option("--policy", policy, "ActPerMoMa, ActPerMoMaIgOnly, ActPerMoMaNoWeights, Naive, Random or BreyerNbv");
  run->add_option("--scenario", scenario, "simple or complex");
  run->add_flag("--hard-grasps", hard, "Restrict grasps to 45 degree side approaches");
  add_common(run, run_opts);

  std::string dir_a;
  std::string dir_b;
  std::string metric = "sr";
  double alpha = 0.05;
  auto* cmp = app.add_subcommand("compare", "Significance test between two result directories");
  cmp->add_option("--a", dir_a, "First run directory")->required();
  cmp->add_option("--b", dir_b, "Second run directory")->required();
  cmp->add_option("--metric", metric, "sr, ar, gfr, d or v");
  cmp->add_option("--alpha", alpha, "Significance level")->check(CLI::Range(0.0, 1.0));

  CommonOptions ablate_opts;
  std::string preset;
  auto* ablate = app.add_subcommand("ablate", "Run an ablation table preset");
  ablate->add_option("--preset", preset, "table1 (simple scenes) or table2 (complex scenes)")->required();
  add_common(ablate, ablate_opts);

  std::string trace;
  std::string image;
  auto* render = app.add_subcommand("render", "Top-down SVG of an episode trace");
  render->add_option("--trace", trace, "Episode JSONL trace")->required()->check(CLI::ExistingFile);
  render->add_option("--out", image, "Output SVG path")->required();

  CLI11_PARSE(app, argc, argv);

  try
  {
    if (*run)
    {
      RunConfig cfg = resolve(run_opts);
      if (!policy.empty())
      {
        cfg.policy = policy_from_string(policy);
      }
      if (!scenario.empty())
      {
        cfg.scenario = scenario_from_string(scenario);
      }
      if (hard)
      {
        cfg.hard_grasps = true;
      }
      cfg.validate();
      const auto m = run_and_write(cfg, run_opts.threads, !run_opts.no_traces);
      print_summary(to_string(cfg.policy) + " " + to_string(cfg.scenario) + (cfg.hard_grasps ? " hard" : ""), m);
      std::printf("wrote %s\n", cfg.output_dir.string().c_str());
    }
    else if (*cmp)
    {
      const auto a = load_results(dir_a);
      const auto b = load_results(dir_b);
      const Metric which = metric_from_string(metric);
      const auto c = compare(a, b, which, alpha);
      std::printf("%s: a %.4f  b %.4f  statistic %.4f  p %.4g  -> %s\n", to_string(which).c_str(), c.a_value,
                  c.b_value, c.statistic, c.p_value, to_string(c.verdict).c_str());
    }
    else if (*ablate)
    {
      RunConfig base = resolve(ablate_opts);
      if (ablate_opts.out.empty())
      {
        base.output_dir = "out/" + preset;
      }
      base.validate();
      const auto cells = experiment_preset(preset, base);
      const auto results = run_experiment(cells, base.output_dir, ablate_opts.threads, !ablate_opts.no_traces);
      for (std::size_t i = 0; i < cells.size(); ++i)
      {
        if (results[i])
        {
          print_summary(cells[i].label, *results[i]);
        }
        else
        {
          std::printf("%-32s failed\n", cells[i].label.c_str());
        }
      }
      std::printf("wrote %s\n", (base.output_dir / "metrics.csv").string().c_str());
    }
    else if (*render)
    {
      render_topdown(trace, image);
      std::printf("wrote %s\n", image.c_str());
    }
  }
  catch (const std::exception& e)
  {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
