#pragma once

#include <cstddef>
#include <filesystem>
#include <random>
#include <vector>

#include "poprl/common.hpp"
#include "poprl/env.hpp"

namespace poprl {

/// A sampled minibatch in column-major struct-of-arrays form; column i of
/// each matrix belongs to the same transition.
struct Batch {
  Mat states;       // state_dim x B
  Mat actions;      // action_dim x B
  Vec rewards;      // B
  Mat next_states;  // state_dim x B
  Vec done;         // B, 1.0 where terminal
  std::vector<Origin> origins;

  int size() const { return static_cast<int>(rewards.size()); }
  int target_count() const;
};

/// Bounded FIFO transition store with uniform with-replacement sampling.
class ReplayStore {
 public:
  ReplayStore(std::size_t capacity, int state_dim, int action_dim);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size() < capacity_
                                        ? entries_.size()
                                        : capacity_; }
  bool empty() const { return entries_.empty(); }

  /// Oldest entry first; index 0 is the next eviction candidate.
  const Transition& at(std::size_t i) const;

  void push(Transition t);

 private:
  friend Batch sample(const ReplayStore&, int, std::mt19937_64&);
  friend void save_snapshot(const ReplayStore&, const std::filesystem::path&);

  std::size_t capacity_;
  int state_dim_;
  int action_dim_;
  std::vector<Transition> entries_;  // ring once full
  std::size_t head_ = 0;             // next write position once full
};

/// Uniform i.i.d. draws with replacement. Empty store is a not-ready error.
Batch sample(const ReplayStore& store, int batch_size, std::mt19937_64& rng);

/// Separate stores for target-actor data and population data, sampled as a
/// fixed-ratio mixture: a fraction `mix_ratio` of every batch comes from the
/// target store.
class DualReplayStore {
 public:
  DualReplayStore(std::size_t capacity_each, int state_dim, int action_dim,
                  double mix_ratio);

  ReplayStore& target_store() { return target_store_; }
  ReplayStore& pop_store() { return pop_store_; }
  const ReplayStore& target_store() const { return target_store_; }
  const ReplayStore& pop_store() const { return pop_store_; }
  double mix_ratio() const { return mix_ratio_; }

  /// Routes by origin tag: target transitions to the target store,
  /// population transitions to the population store.
  void push(Transition t);

 private:
  ReplayStore target_store_;
  ReplayStore pop_store_;
  double mix_ratio_;
};

/// Number of target-store entries in a mixed batch of size `batch_size`:
/// round(m * B) with half-up rounding.
int mixed_target_count(double mix_ratio, int batch_size);

/// Exact-count mixture draw: round(m*B) entries from the target store, the
/// rest from the population store, order-shuffled. Either store empty is a
/// not-ready error.
Batch sample_mixed(const DualReplayStore& dual, int batch_size,
                   std::mt19937_64& rng);

/// Binary snapshot for run resume. Versioned header, little-endian payload.
void save_snapshot(const ReplayStore& store, const std::filesystem::path& path);
ReplayStore load_snapshot(const std::filesystem::path& path);

}  // namespace poprl
