#include "poprl/env.hpp"

#include <cmath>
#include <random>

#include "poprl/error.hpp"
#include "poprl/rng.hpp"

namespace poprl {

void EnvSpec::validate() const {
  if (state_dim < 1 || action_dim < 1)
    fail(ErrorCategory::Config, "environment dimensions must be >= 1");
  if (max_episode_steps < 1)
    fail(ErrorCategory::Config, "max_episode_steps must be >= 1");
  if (action_low.size() != action_dim || action_high.size() != action_dim)
    fail(ErrorCategory::Config, "action bound dimensions mismatch");
  if (!action_low.allFinite() || !action_high.allFinite())
    fail(ErrorCategory::Config, "action bounds must be finite");
}

namespace {

constexpr double kPmDt = 0.2;
constexpr double kPmDrag = 0.2;
constexpr double kPmGoalRadius = 0.1;
constexpr double kPmStart[2] = {-0.5, -0.5};
constexpr double kPmGoal[2] = {0.5, 0.5};
constexpr double kPmResetJitter = 0.2;
constexpr double kPmWall = 2.0;  // position clamp; impact zeroes the velocity

constexpr double kRidgeDt = 0.1;
constexpr double kRidgeEdge = 2.5;
constexpr int kRidgeSteps = 100;

}  // namespace

PointMass2D::PointMass2D(ResetPolicy reset_policy) {
  spec_.name = reset_policy == ResetPolicy::FixedReset ? "pointmass-2d-fixed"
                                                       : "pointmass-2d";
  spec_.state_dim = 4;
  spec_.action_dim = 2;
  spec_.action_low = Vec::Constant(2, -1.0);
  spec_.action_high = Vec::Constant(2, 1.0);
  spec_.max_episode_steps = 200;
  spec_.reset_policy = reset_policy;
}

Vec PointMass2D::goal() const {
  Vec g(2);
  g << kPmGoal[0], kPmGoal[1];
  return g;
}

Vec PointMass2D::reset(std::uint64_t seed) const {
  Vec s = Vec::Zero(4);
  s[0] = kPmStart[0];
  s[1] = kPmStart[1];
  if (spec_.reset_policy == ResetPolicy::SeededRandomReset) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-kPmResetJitter,
                                                  kPmResetJitter);
    s[0] += jitter(rng);
    s[1] += jitter(rng);
  }
  return s;
}

StepResult PointMass2D::step(const Vec& state, const Vec& action,
                             int step_index) const {
  if (state.size() != 4 || action.size() != 2)
    fail(ErrorCategory::Config, "pointmass-2d dimension mismatch");
  if (!action.allFinite())
    fail(ErrorCategory::Numeric, "non-finite action passed to step");
  Vec a = clip(action, spec_.action_low, spec_.action_high);

  StepResult r;
  r.next_state = Vec(4);
  r.next_state[2] = (1.0 - kPmDrag) * state[2] + kPmDt * a[0];
  r.next_state[3] = (1.0 - kPmDrag) * state[3] + kPmDt * a[1];
  r.next_state[0] = state[0] + kPmDt * r.next_state[2];
  r.next_state[1] = state[1] + kPmDt * r.next_state[3];
  for (int axis = 0; axis < 2; ++axis) {
    if (std::abs(r.next_state[axis]) > kPmWall) {
      r.next_state[axis] = r.next_state[axis] > 0.0 ? kPmWall : -kPmWall;
      r.next_state[axis + 2] = 0.0;
    }
  }

  const double dx = r.next_state[0] - kPmGoal[0];
  const double dy = r.next_state[1] - kPmGoal[1];
  const double dist = std::sqrt(dx * dx + dy * dy);
  r.reward = -dist;
  r.done = dist <= kPmGoalRadius || step_index + 1 >= spec_.max_episode_steps;
  return r;
}

Ridge1D::Ridge1D(bool failure_termination)
    : failure_termination_(failure_termination) {
  spec_.name = failure_termination ? "ridge-1d-failterm" : "ridge-1d";
  spec_.state_dim = 1;
  spec_.action_dim = 1;
  spec_.action_low = Vec::Constant(1, -1.0);
  spec_.action_high = Vec::Constant(1, 1.0);
  spec_.max_episode_steps = kRidgeSteps;
  spec_.reset_policy = ResetPolicy::SeededRandomReset;
}

double Ridge1D::reward_profile(double x) const {
  const double plateau = 0.5 * std::exp(-0.5 * std::pow((x - 0.3) / 0.15, 2));
  const double peak = 1.2 * std::exp(-0.5 * std::pow((x - 1.8) / 0.25, 2));
  return plateau + peak;
}

Vec Ridge1D::reset(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  return Vec::Constant(1, jitter(rng));
}

StepResult Ridge1D::step(const Vec& state, const Vec& action,
                         int step_index) const {
  if (state.size() != 1 || action.size() != 1)
    fail(ErrorCategory::Config, "ridge-1d dimension mismatch");
  if (!action.allFinite())
    fail(ErrorCategory::Numeric, "non-finite action passed to step");
  const double a = clip(action[0], -1.0, 1.0);

  StepResult r;
  r.next_state = Vec::Constant(1, state[0] + kRidgeDt * a);
  r.reward = reward_profile(r.next_state[0]);
  const bool off_edge = std::abs(r.next_state[0]) > kRidgeEdge;
  r.done = (failure_termination_ && off_edge) ||
           step_index + 1 >= spec_.max_episode_steps;
  return r;
}

std::unique_ptr<Env> make_env(const std::string& name) {
  if (name == "pointmass-2d")
    return std::make_unique<PointMass2D>(ResetPolicy::SeededRandomReset);
  if (name == "pointmass-2d-fixed")
    return std::make_unique<PointMass2D>(ResetPolicy::FixedReset);
  if (name == "ridge-1d") return std::make_unique<Ridge1D>(false);
  if (name == "ridge-1d-failterm") return std::make_unique<Ridge1D>(true);
  fail(ErrorCategory::Config, "unknown environment: " + name);
}

std::vector<std::string> env_names() {
  return {"pointmass-2d", "pointmass-2d-fixed", "ridge-1d",
          "ridge-1d-failterm"};
}

PolicyFn uniform_random_policy(const EnvSpec& spec, std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [rng, low = spec.action_low, high = spec.action_high](const Vec&) {
    Vec a(low.size());
    for (Eigen::Index d = 0; d < low.size(); ++d) {
      std::uniform_real_distribution<double> u(low[d], high[d]);
      a[d] = u(*rng);
    }
    return a;
  };
}

Trajectory rollout(const Env& env, const PolicyFn& policy, double noise_std,
                   std::uint64_t seed, Origin origin) {
  if (noise_std < 0.0)
    fail(ErrorCategory::Config, "noise_std must be nonnegative");
  const EnvSpec& spec = env.spec();

  std::mt19937_64 rng(seed);
  const std::uint64_t reset_seed = rng();
  std::normal_distribution<double> noise(0.0, 1.0);

  Trajectory traj;
  Vec state = env.reset(reset_seed);
  for (int t = 0; t < spec.max_episode_steps; ++t) {
    Vec action = policy(state);
    if (action.size() != spec.action_dim)
      fail(ErrorCategory::Config,
           "policy produced action of dimension " +
               std::to_string(action.size()) + ", expected " +
               std::to_string(spec.action_dim));
    if (noise_std > 0.0)
      for (Eigen::Index i = 0; i < action.size(); ++i)
        action[i] += noise_std * noise(rng);
    Vec executed = clip(action, spec.action_low, spec.action_high);
    if (executed != action) traj.clipped_actions += 1;

    StepResult sr = env.step(state, executed, t);
    traj.transitions.push_back(
        {state, executed, sr.reward, sr.next_state, sr.done, origin});
    traj.episodic_return += sr.reward;
    state = std::move(sr.next_state);
    if (sr.done) break;
  }
  return traj;
}

}  // namespace poprl
