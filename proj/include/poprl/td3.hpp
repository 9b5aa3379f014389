#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "poprl/common.hpp"
#include "poprl/env.hpp"
#include "poprl/mlp.hpp"
#include "poprl/replay.hpp"

namespace poprl {

struct Td3Config {
  double gamma = 0.99;
  double tau = 5e-3;  // target network update rate
  int policy_delay = 2;
  double smoothing_noise_std = 0.2;
  double smoothing_clip = 0.5;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  int batch_size = 256;

  void validate() const;
};

/// Twin-critic deterministic actor-critic learner. Target networks start as
/// exact copies of their live counterparts.
struct Learner {
  NetworkSpec actor_spec;
  NetworkSpec critic_spec;
  Vec actor, actor_target;
  Vec critic1, critic2, critic1_target, critic2_target;
  AdamState actor_opt, critic1_opt, critic2_opt;
  long update_counter = 0;  // critic update count; the training-step clock
  Td3Config cfg;
  Vec action_low, action_high;
  std::mt19937_64 noise_rng;  // target-action smoothing noise
};

Learner make_learner(int state_dim, int action_dim,
                     const std::vector<int>& hidden_dims, const Td3Config& cfg,
                     Vec action_low, Vec action_high, std::uint64_t seed);

/// Deterministic policy closure over a parameter snapshot.
PolicyFn make_policy(const NetworkSpec& spec, Vec params);

/// Clipped-double-Q regression targets: r + gamma (1-done) min(Q1',Q2') at
/// the smoothed target action. Draws smoothing noise from the learner's
/// noise stream.
Vec td_targets(Learner& learner, const Batch& batch);

/// Regress both critics once toward the clipped-double-Q Bellman target.
/// Returns the summed mean squared error of the two critics.
double critic_update(Learner& learner, const Batch& batch);

/// One ascent step on the batch-mean first-critic value of the actor's own
/// actions; the gradient reaches the actor through the critic's action input.
/// Returns the batch objective.
double actor_update(Learner& learner, const Batch& batch);

/// target <- tau * live + (1 - tau) * target for all three target networks.
void polyak_sync(Learner& learner);

/// Abstraction over the two buffer layouts the learner can train from.
class ReplaySource {
 public:
  virtual ~ReplaySource() = default;
  virtual void push(Transition t) = 0;
  virtual bool ready(int batch_size) const = 0;
  virtual Batch sample_batch(int batch_size, std::mt19937_64& rng) = 0;
  virtual std::size_t stored() const = 0;
};

class SingleBuffer : public ReplaySource {
 public:
  SingleBuffer(std::size_t capacity, int state_dim, int action_dim)
      : store_(capacity, state_dim, action_dim) {}

  void push(Transition t) override { store_.push(std::move(t)); }
  bool ready(int batch_size) const override {
    return store_.size() >= static_cast<std::size_t>(batch_size);
  }
  Batch sample_batch(int batch_size, std::mt19937_64& rng) override {
    return sample(store_, batch_size, rng);
  }
  std::size_t stored() const override { return store_.size(); }

  ReplayStore& store() { return store_; }
  const ReplayStore& store() const { return store_; }

 private:
  ReplayStore store_;
};

class DualBuffer : public ReplaySource {
 public:
  DualBuffer(std::size_t capacity_each, int state_dim, int action_dim,
             double mix_ratio)
      : dual_(capacity_each, state_dim, action_dim, mix_ratio) {}

  void push(Transition t) override { dual_.push(std::move(t)); }
  bool ready(int batch_size) const override {
    return dual_.target_store().size() >=
               static_cast<std::size_t>(batch_size) &&
           dual_.pop_store().size() >= static_cast<std::size_t>(batch_size);
  }
  Batch sample_batch(int batch_size, std::mt19937_64& rng) override {
    return sample_mixed(dual_, batch_size, rng);
  }
  std::size_t stored() const override {
    return dual_.target_store().size() + dual_.pop_store().size();
  }

  DualReplayStore& dual() { return dual_; }
  const DualReplayStore& dual() const { return dual_; }

 private:
  DualReplayStore dual_;
};

struct UpdateReport {
  long steps = 0;
  long actor_updates = 0;
  double mean_critic_loss = 0.0;
  double mean_actor_objective = 0.0;
  long batch_target_count = 0;  // summed over the performed batches
  long batch_pop_count = 0;
};

/// Run `n_steps` training steps: one critic update per step, actor update and
/// target sync every `policy_delay` steps. If the source is not ready under
/// the warm-up rule, performs zero steps and reports it.
UpdateReport train_steps(Learner& learner, ReplaySource& source, long n_steps,
                         std::mt19937_64& sample_rng);

}  // namespace poprl
