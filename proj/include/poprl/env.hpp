#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "poprl/common.hpp"

namespace poprl {

enum class ResetPolicy { FixedReset, SeededRandomReset };

struct EnvSpec {
  std::string name;
  int state_dim = 0;
  int action_dim = 0;
  Vec action_low;
  Vec action_high;
  int max_episode_steps = 0;
  ResetPolicy reset_policy = ResetPolicy::FixedReset;

  void validate() const;
};

enum class OriginKind { Target, Population };

/// Which policy produced a transition; population transitions carry the
/// individual's index.
struct Origin {
  OriginKind kind = OriginKind::Target;
  int index = -1;

  static Origin target() { return {OriginKind::Target, -1}; }
  static Origin population(int i) { return {OriginKind::Population, i}; }
  bool is_target() const { return kind == OriginKind::Target; }
};

struct Transition {
  Vec state;
  Vec action;
  double reward = 0.0;
  Vec next_state;
  bool done = false;
  Origin origin;
};

struct Trajectory {
  std::vector<Transition> transitions;
  double episodic_return = 0.0;  // plain undiscounted sum of rewards
  int clipped_actions = 0;       // count of steps where clipping changed the action

  int length() const { return static_cast<int>(transitions.size()); }
};

struct StepResult {
  Vec next_state;
  double reward = 0.0;
  bool done = false;
};

/// Deterministic continuous-control environment. Instances are stateless;
/// the caller threads the state and step index through, which keeps
/// concurrent rollouts on shared instances safe.
class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;

  /// Initial state; deterministic in `seed` (ignored under FixedReset).
  virtual Vec reset(std::uint64_t seed) const = 0;

  /// One transition. `step_index` is the zero-based index of this step in
  /// the episode; the step cap forces done when it runs out.
  virtual StepResult step(const Vec& state, const Vec& action,
                          int step_index) const = 0;
};

/// Double integrator on the plane: state (x, y, vx, vy), force action in
/// [-1,1]^2, reward = -distance(position, goal) per step. Terminates inside
/// the goal radius or at the step cap.
class PointMass2D : public Env {
 public:
  explicit PointMass2D(ResetPolicy reset_policy = ResetPolicy::SeededRandomReset);
  const EnvSpec& spec() const override { return spec_; }
  Vec reset(std::uint64_t seed) const override;
  StepResult step(const Vec& state, const Vec& action,
                  int step_index) const override;

  Vec goal() const;

 private:
  EnvSpec spec_;
};

/// One-dimensional hill task: position state, displacement action. The reward
/// profile has a low plateau near the start and a higher peak farther out,
/// separated by a flat valley. The `fail_term` variant ends the episode when
/// the agent walks off either edge.
class Ridge1D : public Env {
 public:
  explicit Ridge1D(bool failure_termination = false);
  const EnvSpec& spec() const override { return spec_; }
  Vec reset(std::uint64_t seed) const override;
  StepResult step(const Vec& state, const Vec& action,
                  int step_index) const override;

  double reward_profile(double x) const;

 private:
  EnvSpec spec_;
  bool failure_termination_;
};

/// Environment registry keyed by the name used in run configurations.
/// Known names: pointmass-2d, pointmass-2d-fixed, ridge-1d, ridge-1d-failterm.
std::unique_ptr<Env> make_env(const std::string& name);
std::vector<std::string> env_names();

using PolicyFn = std::function<Vec(const Vec&)>;

/// Policy drawing each action uniformly from the action box; deterministic
/// in `seed` and call order.
PolicyFn uniform_random_policy(const EnvSpec& spec, std::uint64_t seed);

/// Run one full episode. Gaussian noise with std `noise_std` is added to each
/// action before clipping to the action bounds. Deterministic given `seed`.
Trajectory rollout(const Env& env, const PolicyFn& policy, double noise_std,
                   std::uint64_t seed, Origin origin);

}  // namespace poprl
