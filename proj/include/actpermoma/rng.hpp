#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace actpermoma
{

// Seeded generator with cheap deterministic splitting. Every random draw in
// the library goes through one of these; there is no global RNG. Floating
// draws are built from raw engine bits so results do not depend on the
// standard library's distribution implementations.
class Rng
{
public:
  explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

  // Child stream identified by `seed` and a path of stream ids.
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> streams)
  {
    std::uint64_t h = mix(seed);
    for (const auto s : streams)
    {
      h = mix(h ^ mix(s + 0x9E3779B97F4A7C15ULL));
    }
    return Rng(h);
  }

  Rng split(std::uint64_t stream) { return derive(engine_(), {stream}); }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi)
  {
    const auto span = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo + 1);
    return lo + static_cast<int>(engine_() % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  static std::uint64_t mix(std::uint64_t x)
  {
    // splitmix64 finalizer
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace actpermoma
