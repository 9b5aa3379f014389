#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "poprl/error.hpp"
#include "poprl/rng.hpp"
#include "poprl/td3.hpp"

using namespace poprl;

namespace {

Learner small_learner(Td3Config cfg = {}, int state_dim = 2,
                      int action_dim = 1, std::uint64_t seed = 5) {
  return make_learner(state_dim, action_dim, {6, 6}, cfg,
                      Vec::Constant(action_dim, -1.0),
                      Vec::Constant(action_dim, 1.0), seed);
}

Batch single_transition_batch(double reward, bool done, int state_dim = 2,
                              int action_dim = 1) {
  Batch b;
  b.states = Mat::Constant(state_dim, 1, 0.3);
  b.actions = Mat::Constant(action_dim, 1, 0.2);
  b.rewards = Vec::Constant(1, reward);
  b.next_states = Mat::Constant(state_dim, 1, -0.4);
  b.done = Vec::Constant(1, done ? 1.0 : 0.0);
  b.origins = {Origin::target()};
  return b;
}

Batch random_batch(std::mt19937_64& rng, int n, int state_dim = 2,
                   int action_dim = 1) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Batch b;
  b.states.resize(state_dim, n);
  b.actions.resize(action_dim, n);
  b.rewards.resize(n);
  b.next_states.resize(state_dim, n);
  b.done.resize(n);
  b.origins.assign(static_cast<size_t>(n), Origin::target());
  for (int i = 0; i < n; ++i) {
    for (int s = 0; s < state_dim; ++s) {
      b.states(s, i) = gauss(rng);
      b.next_states(s, i) = gauss(rng);
    }
    for (int a = 0; a < action_dim; ++a) b.actions(a, i) = u(rng);
    b.rewards[i] = gauss(rng);
    b.done[i] = i % 4 == 0 ? 1.0 : 0.0;
  }
  return b;
}

}  // namespace

TEST_CASE("learner construction: targets start as exact copies") {
  const Learner l = small_learner();
  CHECK(l.actor == l.actor_target);
  CHECK(l.critic1 == l.critic1_target);
  CHECK(l.critic2 == l.critic2_target);
  CHECK(l.update_counter == 0);
  CHECK(l.actor_spec.layer_norm);
  CHECK(!l.critic_spec.layer_norm);
  CHECK(l.critic_spec.input_dim == 3);  // state + action
}

TEST_CASE("td targets: gamma=0 reduces to the reward") {
  Td3Config cfg;
  cfg.gamma = 0.0;
  Learner l = small_learner(cfg);
  const Vec y = td_targets(l, single_transition_batch(1.7, false));
  CHECK(y.size() == 1);
  CHECK(y[0] == 1.7);  // exact: the bootstrap term is multiplied by zero
}

TEST_CASE("td targets: terminal transitions drop the bootstrap") {
  Learner l = small_learner();
  const Vec y = td_targets(l, single_transition_batch(-0.25, true));
  CHECK(y[0] == -0.25);
}

TEST_CASE("td targets never exceed either target critic's estimate") {
  Td3Config cfg;
  cfg.smoothing_noise_std = 0.0;  // deterministic target action
  Learner l = small_learner(cfg);
  auto rng = make_rng(7, Stream::BatchSample);
  const Batch batch = random_batch(rng, 64);
  const Vec y = td_targets(l, batch);

  // Recompute both target-critic estimates independently.
  Mat a_next = forward_batch(l.actor_spec, l.actor_target, batch.next_states);
  for (Eigen::Index j = 0; j < a_next.cols(); ++j)
    a_next.col(j) = clip(Vec(a_next.col(j)), l.action_low, l.action_high);
  Mat x_next(3, batch.size());
  x_next.topRows(2) = batch.next_states;
  x_next.bottomRows(1) = a_next;
  const Mat q1n = forward_batch(l.critic_spec, l.critic1_target, x_next);
  const Mat q2n = forward_batch(l.critic_spec, l.critic2_target, x_next);

  for (int i = 0; i < batch.size(); ++i) {
    const double bootstrap = l.cfg.gamma * (1.0 - batch.done[i]);
    CHECK(y[i] <= batch.rewards[i] + bootstrap * q1n(0, i) + 1e-12);
    CHECK(y[i] <= batch.rewards[i] + bootstrap * q2n(0, i) + 1e-12);
    const double expected =
        batch.rewards[i] + bootstrap * std::min(q1n(0, i), q2n(0, i));
    CHECK(y[i] == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("smoothing noise is clipped before the action bounds clamp") {
  Td3Config cfg;
  cfg.smoothing_noise_std = 5000.0;  // clipped noise is +-0.5 almost surely
  cfg.smoothing_clip = 0.5;
  Learner l = small_learner(cfg);
  auto rng = make_rng(9, Stream::BatchSample);
  const Batch batch = random_batch(rng, 256);

  // With saturated noise the perturbed action is exactly
  // clip(mu'(s') +- 0.5, bounds), so each bootstrap must match one of the
  // two endpoint evaluations.
  const Mat base =
      forward_batch(l.actor_spec, l.actor_target, batch.next_states);
  const Vec y = td_targets(l, batch);
  for (int i = 0; i < batch.size(); ++i) {
    if (batch.done[i] != 0.0) {
      CHECK(y[i] == batch.rewards[i]);
      continue;
    }
    Mat x(3, 2);
    x.col(0) << batch.next_states(0, i), batch.next_states(1, i),
        clip(base(0, i) - 0.5, -1.0, 1.0);
    x.col(1) << batch.next_states(0, i), batch.next_states(1, i),
        clip(base(0, i) + 0.5, -1.0, 1.0);
    const Mat q1 = forward_batch(l.critic_spec, l.critic1_target, x);
    const Mat q2 = forward_batch(l.critic_spec, l.critic2_target, x);
    const double lo_val =
        batch.rewards[i] + l.cfg.gamma * std::min(q1(0, 0), q2(0, 0));
    const double hi_val =
        batch.rewards[i] + l.cfg.gamma * std::min(q1(0, 1), q2(0, 1));
    const bool matches = std::abs(y[i] - lo_val) <= 1e-12 ||
                         std::abs(y[i] - hi_val) <= 1e-12;
    CHECK(matches);
  }
}

TEST_CASE("polyak sync") {
  SUBCASE("tau=1 copies the live networks") {
    Td3Config cfg;
    cfg.tau = 1.0;
    Learner l = small_learner(cfg);
    auto rng = make_rng(11, Stream::BatchSample);
    const Batch batch = random_batch(rng, 8);
    critic_update(l, batch);  // moves the live critics off the targets
    CHECK(l.critic1 != l.critic1_target);
    polyak_sync(l);
    CHECK(l.actor == l.actor_target);
    CHECK(l.critic1 == l.critic1_target);
    CHECK(l.critic2 == l.critic2_target);
  }
  SUBCASE("live == target is a fixed point") {
    Learner l = small_learner();
    const Vec actor_before = l.actor_target;
    polyak_sync(l);
    CHECK((l.actor_target - actor_before).cwiseAbs().maxCoeff() <= 1e-15);
  }
  SUBCASE("default rate interpolates by 5e-3") {
    Learner l = small_learner();
    CHECK(l.cfg.tau == 5e-3);
    const Vec target_before = l.critic1_target;
    l.critic1 = l.critic1.array() + 1.0;  // shift live by +1
    polyak_sync(l);
    CHECK(((l.critic1_target - target_before).array() - 5e-3).abs().maxCoeff()
          <= 1e-12);
  }
}

TEST_CASE("repeated critic regression reaches a gamma=0 target") {
  Td3Config cfg;
  cfg.gamma = 0.0;
  cfg.critic_lr = 1e-2;
  cfg.batch_size = 1;
  Learner l = small_learner(cfg);
  const Batch batch = single_transition_batch(0.9, false);
  for (int i = 0; i < 800; ++i) critic_update(l, batch);

  Mat x(3, 1);
  x << 0.3, 0.3, 0.2;
  CHECK(forward_batch(l.critic_spec, l.critic1, x)(0, 0) ==
        doctest::Approx(0.9).epsilon(1e-3));
  CHECK(forward_batch(l.critic_spec, l.critic2, x)(0, 0) ==
        doctest::Approx(0.9).epsilon(1e-3));
}

TEST_CASE("actor ascends a frozen critic toward its known optimum") {
  // Hand-built critic Q(s,a) = -|a - a*|: first layer computes
  // relu(a - a*) and relu(a* - a), output sums them negatively.
  const double a_star = 0.6;
  Td3Config cfg;
  cfg.actor_lr = 8e-4;
  Learner l = small_learner(cfg, 2, 1, 21);
  l.critic_spec = NetworkSpec{3, {2}, 1, OutputActivation::Identity, false};
  Vec critic(l.critic_spec.param_count());
  critic.setZero();
  // layer 0: 2x3 weights (state ignored), then bias
  // unit 0: +a - a*, unit 1: -a + a*
  critic[4] = 1.0;   // W(0,2): action column, unit 0
  critic[5] = -1.0;  // W(1,2): action column, unit 1
  critic[6] = -a_star;
  critic[7] = a_star;
  // layer 1: 1x2 weights, bias
  critic[8] = -1.0;
  critic[9] = -1.0;
  critic[10] = 0.0;
  l.critic1 = critic;

  Batch batch;
  batch.states = Mat::Constant(2, 1, 0.1);  // a single training state
  batch.actions = Mat::Constant(1, 1, 0.0);
  batch.rewards = Vec::Zero(1);
  batch.next_states = Mat::Constant(2, 1, 0.1);
  batch.done = Vec::Zero(1);
  batch.origins = {Origin::target()};

  auto mu = [&] {
    return forward(l.actor_spec, l.actor, Vec::Constant(2, 0.1))[0];
  };
  const double initial_gap = std::abs(mu() - a_star);
  double gap = initial_gap;
  CHECK(gap > 0.3);  // start well away from the optimum
  for (int i = 0; i < 100; ++i) {
    actor_update(l, batch);
    const double next_gap = std::abs(mu() - a_star);
    CHECK(next_gap < gap);  // monotone approach
    gap = next_gap;
  }
  CHECK(gap < 0.5 * initial_gap);
}

TEST_CASE("actor gradient matches finite differences of the batch objective") {
  auto rng = make_rng(23, Stream::BatchSample);
  int checked = 0;
  for (int attempt = 0; attempt < 60 && checked < 6; ++attempt) {
    Learner l = small_learner({}, 2, 1,
                              static_cast<std::uint64_t>(400 + attempt));
    const Batch batch = random_batch(rng, 5);

    auto objective = [&](const Vec& actor_params) {
      const Mat actions =
          forward_batch(l.actor_spec, actor_params, batch.states);
      Mat x(3, batch.size());
      x.topRows(2) = batch.states;
      x.bottomRows(1) = actions;
      return forward_batch(l.critic_spec, l.critic1, x).row(0).mean();
    };

    // Keep clear of ReLU kinks in both networks along the probe.
    MlpTrace at, ct;
    const Mat actions = forward_batch(l.actor_spec, l.actor, batch.states, &at);
    Mat x(3, batch.size());
    x.topRows(2) = batch.states;
    x.bottomRows(1) = actions;
    forward_batch(l.critic_spec, l.critic1, x, &ct);
    bool clean = true;
    for (const MlpTrace* t : {&at, &ct})
      for (size_t lvl = 0; lvl + 1 < t->inputs.size(); ++lvl)
        if (t->relu_in[lvl].cwiseAbs().minCoeff() < 1e-3) clean = false;
    if (!clean) continue;

    // Analytic gradient via the actor-update chain.
    MlpTrace actor_trace;
    forward_batch(l.actor_spec, l.actor, batch.states, &actor_trace);
    MlpTrace critic_trace;
    forward_batch(l.critic_spec, l.critic1, x, &critic_trace);
    const Mat upstream = Mat::Constant(1, batch.size(), 1.0 / batch.size());
    const BackwardResult cb =
        backward_batch(l.critic_spec, l.critic1, critic_trace, upstream);
    const BackwardResult ab = backward_batch(
        l.actor_spec, l.actor, actor_trace, cb.input_grad.bottomRows(1));

    const Vec fd = oracle::central_diff(objective, l.actor, 1e-6);
    CHECK(oracle::gradients_close(ab.param_grad, fd, 1e-4, 1e-7));
    ++checked;
  }
  CHECK(checked >= 6);
}

TEST_CASE("a policy already on a critic plateau receives no update") {
  // Critic -relu(a - 0.5) is flat left of 0.5; a zero-output actor sits on
  // the plateau, so its gradient and Adam step are exactly zero.
  Learner l = small_learner();
  l.critic_spec = NetworkSpec{3, {1}, 1, OutputActivation::Identity, false};
  Vec critic = Vec::Zero(l.critic_spec.param_count());
  critic[2] = 1.0;   // weight on the action input
  critic[3] = -0.5;  // bias: kink at a = 0.5
  critic[4] = -1.0;  // output weight
  l.critic1 = critic;

  // Zero actor parameters produce exactly mu(s) = tanh(0) = 0 < 0.5.
  l.actor.setZero();
  const Vec before = l.actor;
  Batch batch = single_transition_batch(0.0, false);
  actor_update(l, batch);
  CHECK(l.actor == before);
}

TEST_CASE("train_steps cadence and warm-up") {
  Td3Config cfg;
  cfg.batch_size = 8;
  Learner l = small_learner(cfg);
  SingleBuffer buffer(64, 2, 1);
  auto rng = make_rng(29, Stream::BatchSample);

  SUBCASE("a source below batch size performs zero steps") {
    for (int i = 0; i < 7; ++i) {
      Transition t;
      t.state = Vec::Zero(2);
      t.action = Vec::Zero(1);
      t.reward = 0.0;
      t.next_state = Vec::Zero(2);
      t.done = false;
      t.origin = Origin::target();
      buffer.push(t);
    }
    const Vec actor_before = l.actor;
    const UpdateReport rep = train_steps(l, buffer, 10, rng);
    CHECK(rep.steps == 0);
    CHECK(l.update_counter == 0);
    CHECK(l.actor == actor_before);
  }

  SUBCASE("n=0 performs nothing even when ready") {
    for (int i = 0; i < 8; ++i) {
      Transition t;
      t.state = Vec::Zero(2);
      t.action = Vec::Zero(1);
      t.reward = 0.0;
      t.next_state = Vec::Zero(2);
      t.done = false;
      t.origin = Origin::target();
      buffer.push(t);
    }
    const UpdateReport rep = train_steps(l, buffer, 0, rng);
    CHECK(rep.steps == 0);
  }

  SUBCASE("actor updates run at half the critic cadence") {
    for (int i = 0; i < 8; ++i) {
      Transition t;
      t.state = Vec::Zero(2);
      t.action = Vec::Zero(1);
      t.reward = 0.1;
      t.next_state = Vec::Zero(2);
      t.done = false;
      t.origin = Origin::target();
      buffer.push(t);
    }
    const UpdateReport a = train_steps(l, buffer, 4, rng);
    CHECK(a.steps == 4);
    CHECK(a.actor_updates == 2);
    CHECK(l.update_counter == 4);

    const UpdateReport b = train_steps(l, buffer, 3, rng);
    CHECK(b.actor_updates == 1);  // counters 5,6,7 -> actor at 6
    CHECK(l.update_counter == 7);

    const UpdateReport c = train_steps(l, buffer, 1, rng);
    CHECK(c.actor_updates == 1);  // counter 8
  }
}

TEST_CASE("train_steps accounts batch origin composition") {
  Td3Config cfg;
  cfg.batch_size = 16;
  Learner l = small_learner(cfg);
  DualBuffer buffer(128, 2, 1, 0.25);
  for (int i = 0; i < 32; ++i) {
    Transition t;
    t.state = Vec::Zero(2);
    t.action = Vec::Zero(1);
    t.reward = 0.0;
    t.next_state = Vec::Zero(2);
    t.done = false;
    t.origin = i % 2 == 0 ? Origin::target() : Origin::population(0);
    buffer.push(t);
  }
  auto rng = make_rng(31, Stream::BatchSample);
  const UpdateReport rep = train_steps(l, buffer, 5, rng);
  CHECK(rep.steps == 5);
  CHECK(rep.batch_target_count == 5 * mixed_target_count(0.25, 16));
  CHECK(rep.batch_pop_count == 5 * (16 - mixed_target_count(0.25, 16)));
}
