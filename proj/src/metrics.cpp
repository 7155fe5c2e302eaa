#include "actpermoma/harness.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>

namespace actpermoma
{

namespace
{
constexpr std::size_t kMinSamples = 30;

struct MeanStd
{
  double mean = 0.0;
  double var = 0.0;  // sample variance
};

template <class F>
MeanStd mean_var(const std::vector<EpisodeResult>& results, F value)
{
  MeanStd m;
  const double n = static_cast<double>(results.size());
  for (const auto& r : results)
  {
    m.mean += value(r);
  }
  m.mean /= n;
  if (results.size() > 1)
  {
    for (const auto& r : results)
    {
      const double d = value(r) - m.mean;
      m.var += d * d;
    }
    m.var /= n - 1.0;
  }
  return m;
}

Outcome rate_outcome(Metric m)
{
  switch (m)
  {
    case Metric::Sr:
      return Outcome::Success;
    case Metric::Ar:
      return Outcome::Abort;
    default:
      return Outcome::GraspFailure;
  }
}

long count(const std::vector<EpisodeResult>& results, Outcome o)
{
  return std::count_if(results.begin(), results.end(), [o](const EpisodeResult& r) { return r.outcome == o; });
}
}  // namespace

MetricsSummary summarize(const std::vector<EpisodeResult>& results)
{
  if (results.empty())
  {
    throw InsufficientSamples("summarize: no episodes");
  }
  MetricsSummary m;
  m.episodes = static_cast<int>(results.size());
  const double n = static_cast<double>(results.size());
  const long s = count(results, Outcome::Success);
  const long a = count(results, Outcome::Abort);
  const long g = count(results, Outcome::GraspFailure);
  m.sr = 100.0 * static_cast<double>(s) / n;
  m.ar = 100.0 * static_cast<double>(a) / n;
  m.gfr = 100.0 * static_cast<double>(g) / n;
  const auto d = mean_var(results, [](const EpisodeResult& r) { return r.d_total; });
  const auto v = mean_var(results, [](const EpisodeResult& r) { return static_cast<double>(r.v_total); });
  m.d_mean = d.mean;
  m.d_std = std::sqrt(d.var);
  m.v_mean = v.mean;
  m.v_std = std::sqrt(v.var);
  return m;
}

Metric metric_from_string(const std::string& s)
{
  for (const auto m : {Metric::Sr, Metric::Ar, Metric::Gfr, Metric::D, Metric::V})
  {
    if (s == to_string(m))
    {
      return m;
    }
  }
  throw std::invalid_argument("unknown metric '" + s + "' (expected sr, ar, gfr, d or v)");
}

std::string to_string(Metric m)
{
  switch (m)
  {
    case Metric::Sr:
      return "sr";
    case Metric::Ar:
      return "ar";
    case Metric::Gfr:
      return "gfr";
    case Metric::D:
      return "d";
    case Metric::V:
      return "v";
  }
  return "sr";
}

std::string to_string(Verdict v)
{
  switch (v)
  {
    case Verdict::ABetter:
      return "a_better";
    case Verdict::BBetter:
      return "b_better";
    case Verdict::Inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

Comparison compare(const std::vector<EpisodeResult>& a, const std::vector<EpisodeResult>& b, Metric metric,
                   double alpha)
{
  if (a.size() < kMinSamples || b.size() < kMinSamples)
  {
    throw InsufficientSamples("compare: need at least 30 episodes per side, got " + std::to_string(a.size()) +
                              " and " + std::to_string(b.size()));
  }
  Comparison c;
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  bool higher_is_better = false;

  if (metric == Metric::Sr || metric == Metric::Ar || metric == Metric::Gfr)
  {
    const Outcome o = rate_outcome(metric);
    const double xa = static_cast<double>(count(a, o));
    const double xb = static_cast<double>(count(b, o));
    const double pa = xa / na;
    const double pb = xb / nb;
    c.a_value = 100.0 * pa;
    c.b_value = 100.0 * pb;
    higher_is_better = metric == Metric::Sr;
    const double pooled = (xa + xb) / (na + nb);
    const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb));
    const double diff = pa - pb;
    const double correction = 0.5 * (1.0 / na + 1.0 / nb);
    const double corrected = std::max(0.0, std::abs(diff) - correction);
    if (se > 0.0)
    {
      c.statistic = std::copysign(corrected / se, diff);
      const boost::math::normal_distribution<> normal;
      c.p_value = 2.0 * boost::math::cdf(boost::math::complement(normal, corrected / se));
    }
  }
  else
  {
    const auto value = [metric](const EpisodeResult& r) {
      return metric == Metric::D ? r.d_total : static_cast<double>(r.v_total);
    };
    const auto ma = mean_var(a, value);
    const auto mb = mean_var(b, value);
    c.a_value = ma.mean;
    c.b_value = mb.mean;
    const double qa = ma.var / na;
    const double qb = mb.var / nb;
    const double se = std::sqrt(qa + qb);
    if (se > 0.0)
    {
      c.statistic = (ma.mean - mb.mean) / se;
      const double dof = (qa + qb) * (qa + qb) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
      const boost::math::students_t_distribution<> t(dof);
      c.p_value = 2.0 * boost::math::cdf(boost::math::complement(t, std::abs(c.statistic)));
    }
  }

  if (c.p_value < alpha && c.statistic != 0.0)
  {
    const bool a_higher = c.statistic > 0.0;
    c.verdict = a_higher == higher_is_better ? Verdict::ABetter : Verdict::BBetter;
  }
  return c;
}

}  // namespace actpermoma
