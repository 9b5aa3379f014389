#include "poprl/td3.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "poprl/error.hpp"
#include "poprl/rng.hpp"

namespace poprl {

void Td3Config::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    fail(ErrorCategory::Config, "gamma must lie in [0,1]");
  if (!(tau > 0.0 && tau <= 1.0))
    fail(ErrorCategory::Config, "tau must lie in (0,1]");
  if (policy_delay < 1)
    fail(ErrorCategory::Config, "policy_delay must be >= 1");
  if (smoothing_noise_std < 0.0 || smoothing_clip < 0.0)
    fail(ErrorCategory::Config, "smoothing parameters must be nonnegative");
  if (actor_lr <= 0.0 || critic_lr <= 0.0)
    fail(ErrorCategory::Config, "learning rates must be positive");
  if (batch_size < 1) fail(ErrorCategory::Config, "batch_size must be >= 1");
}

Learner make_learner(int state_dim, int action_dim,
                     const std::vector<int>& hidden_dims, const Td3Config& cfg,
                     Vec action_low, Vec action_high, std::uint64_t seed) {
  cfg.validate();
  if (action_low.size() != action_dim || action_high.size() != action_dim)
    fail(ErrorCategory::Config, "action bound dimension mismatch");

  Learner l;
  l.actor_spec = NetworkSpec{state_dim, hidden_dims, action_dim,
                             OutputActivation::Tanh, /*layer_norm=*/true};
  l.critic_spec = NetworkSpec{state_dim + action_dim, hidden_dims, 1,
                              OutputActivation::Identity, /*layer_norm=*/false};
  l.actor_spec.validate();
  l.critic_spec.validate();

  auto actor_rng = make_rng(seed, Stream::NetInit, 0);
  auto critic1_rng = make_rng(seed, Stream::NetInit, 1);
  auto critic2_rng = make_rng(seed, Stream::NetInit, 2);
  l.actor = init_params(l.actor_spec, actor_rng);
  l.critic1 = init_params(l.critic_spec, critic1_rng);
  l.critic2 = init_params(l.critic_spec, critic2_rng);
  l.actor_target = l.actor;
  l.critic1_target = l.critic1;
  l.critic2_target = l.critic2;

  l.actor_opt = AdamState::zeros(l.actor.size());
  l.critic1_opt = AdamState::zeros(l.critic1.size());
  l.critic2_opt = AdamState::zeros(l.critic2.size());

  l.cfg = cfg;
  l.action_low = std::move(action_low);
  l.action_high = std::move(action_high);
  l.noise_rng = make_rng(seed, Stream::Learner);
  return l;
}

PolicyFn make_policy(const NetworkSpec& spec, Vec params) {
  return [spec, params = std::move(params)](const Vec& state) {
    return forward(spec, params, state);
  };
}

namespace {

Mat concat_rows(const Mat& top, const Mat& bottom) {
  Mat x(top.rows() + bottom.rows(), top.cols());
  x.topRows(top.rows()) = top;
  x.bottomRows(bottom.rows()) = bottom;
  return x;
}

}  // namespace

Vec td_targets(Learner& l, const Batch& batch) {
  if (batch.size() < 1) fail(ErrorCategory::Config, "empty batch");

  // Smoothed target action: clip(mu'(s') + clipped noise, bounds).
  Mat a_next = forward_batch(l.actor_spec, l.actor_target, batch.next_states);
  if (l.cfg.smoothing_noise_std > 0.0) {
    std::normal_distribution<double> gauss(0.0, l.cfg.smoothing_noise_std);
    for (Eigen::Index j = 0; j < a_next.cols(); ++j)
      for (Eigen::Index i = 0; i < a_next.rows(); ++i)
        a_next(i, j) +=
            clip(gauss(l.noise_rng), -l.cfg.smoothing_clip, l.cfg.smoothing_clip);
  }
  for (Eigen::Index j = 0; j < a_next.cols(); ++j)
    a_next.col(j) = clip(Vec(a_next.col(j)), l.action_low, l.action_high);

  const Mat x_next = concat_rows(batch.next_states, a_next);
  const Mat q1n = forward_batch(l.critic_spec, l.critic1_target, x_next);
  const Mat q2n = forward_batch(l.critic_spec, l.critic2_target, x_next);

  // y = r + gamma (1 - done) min(Q1', Q2')
  Vec y = batch.rewards +
          (l.cfg.gamma * (1.0 - batch.done.array()) *
           q1n.row(0).transpose().array().min(q2n.row(0).transpose().array()))
              .matrix();
  if (!y.allFinite())
    fail(ErrorCategory::Numeric,
         "non-finite TD target (reward range [" +
             std::to_string(batch.rewards.minCoeff()) + ", " +
             std::to_string(batch.rewards.maxCoeff()) + "])");
  return y;
}

double critic_update(Learner& l, const Batch& batch) {
  const int b = batch.size();
  const Vec y = td_targets(l, batch);

  const Mat x = concat_rows(batch.states, batch.actions);
  double loss = 0.0;
  for (auto [params, opt] : {std::pair{&l.critic1, &l.critic1_opt},
                             std::pair{&l.critic2, &l.critic2_opt}}) {
    MlpTrace trace;
    const Mat q = forward_batch(l.critic_spec, *params, x, &trace);
    const Eigen::RowVectorXd diff = q.row(0) - y.transpose();
    loss += diff.squaredNorm() / b;
    const Mat upstream = (2.0 / b) * diff;
    BackwardResult back = backward_batch(l.critic_spec, *params, trace, upstream);
    adam_step(*params, back.param_grad, *opt, l.cfg.critic_lr);
  }
  return loss;
}

double actor_update(Learner& l, const Batch& batch) {
  const int b = batch.size();
  if (b < 1) fail(ErrorCategory::Config, "empty batch");

  MlpTrace actor_trace;
  const Mat actions =
      forward_batch(l.actor_spec, l.actor, batch.states, &actor_trace);
  const Mat x = concat_rows(batch.states, actions);

  MlpTrace critic_trace;
  const Mat q = forward_batch(l.critic_spec, l.critic1, x, &critic_trace);
  const double objective = q.row(0).mean();

  const Mat upstream = Mat::Constant(1, b, 1.0 / b);
  BackwardResult critic_back =
      backward_batch(l.critic_spec, l.critic1, critic_trace, upstream);
  const Mat d_action = critic_back.input_grad.bottomRows(actions.rows());

  BackwardResult actor_back =
      backward_batch(l.actor_spec, l.actor, actor_trace, d_action);
  // Ascend the objective.
  const Vec neg_grad = -actor_back.param_grad;
  adam_step(l.actor, neg_grad, l.actor_opt, l.cfg.actor_lr);
  return objective;
}

void polyak_sync(Learner& l) {
  const double t = l.cfg.tau;
  l.actor_target = t * l.actor + (1.0 - t) * l.actor_target;
  l.critic1_target = t * l.critic1 + (1.0 - t) * l.critic1_target;
  l.critic2_target = t * l.critic2 + (1.0 - t) * l.critic2_target;
}

UpdateReport train_steps(Learner& l, ReplaySource& source, long n_steps,
                         std::mt19937_64& sample_rng) {
  if (n_steps < 0) fail(ErrorCategory::Config, "n_steps must be >= 0");

  UpdateReport report;
  if (!source.ready(l.cfg.batch_size)) return report;  // warm-up: skip

  double loss_sum = 0.0;
  double objective_sum = 0.0;
  for (long i = 0; i < n_steps; ++i) {
    Batch batch = source.sample_batch(l.cfg.batch_size, sample_rng);
    const int targets = batch.target_count();
    report.batch_target_count += targets;
    report.batch_pop_count += batch.size() - targets;

    l.update_counter += 1;
    loss_sum += critic_update(l, batch);
    if (l.update_counter % l.cfg.policy_delay == 0) {
      objective_sum += actor_update(l, batch);
      report.actor_updates += 1;
      polyak_sync(l);
    }
    report.steps += 1;
  }
  if (report.steps > 0) report.mean_critic_loss = loss_sum / report.steps;
  if (report.actor_updates > 0)
    report.mean_actor_objective = objective_sum / report.actor_updates;
  return report;
}

}  // namespace poprl
