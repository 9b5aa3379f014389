#pragma once

#include <cstdint>
#include <random>

namespace poprl {

/// Purpose tags for deriving independent, reproducible RNG streams from one
/// run seed. Every randomized component draws from its own stream so results
/// do not depend on thread scheduling or call interleaving.
enum class Stream : std::uint64_t {
  NetInit = 1,
  PopSample = 2,
  Rollout = 3,
  Learner = 4,
  BatchSample = 5,
  Eval = 6,
  EvalPop = 7,
  Adversarial = 8,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derive a stream seed from (run_seed, purpose, a, b), e.g.
/// (seed, Rollout, iteration, worker_id).
inline std::uint64_t mix_seed(std::uint64_t run_seed, Stream purpose,
                              std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = splitmix64(run_seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return h;
}

inline std::mt19937_64 make_rng(std::uint64_t run_seed, Stream purpose,
                                std::uint64_t a = 0, std::uint64_t b = 0) {
  return std::mt19937_64(mix_seed(run_seed, purpose, a, b));
}

}  // namespace poprl
