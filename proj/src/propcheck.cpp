#include "poprl/propcheck.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "poprl/error.hpp"

namespace poprl {

void FiniteInstance::validate() const {
  if (n_states < 1 || n_states > 32)
    fail(ErrorCategory::Config, "instance state count must be in [1,32]");
  if (action_dim < 1 || feat_dim < 1)
    fail(ErrorCategory::Config, "instance dimensions must be >= 1");
  if (alpha < 0.0 || alpha > 1.0)
    fail(ErrorCategory::Config, "alpha must lie in [0,1]");
  if (d_mu.size() != n_states || d_b.size() != n_states)
    fail(ErrorCategory::Config, "distribution size mismatch");
  if (d_mu.minCoeff() <= 0.0)
    fail(ErrorCategory::Domain, "d_mu must be strictly positive");
  if (d_b.minCoeff() <= 0.0)
    fail(ErrorCategory::Domain, "d_b must be strictly positive");
  if (std::abs(d_mu.sum() - 1.0) > 1e-9 || std::abs(d_b.sum() - 1.0) > 1e-9)
    fail(ErrorCategory::Config, "distributions must sum to 1");
}

double q_value(const FiniteInstance& inst, int s, const Vec& a) {
  const auto si = static_cast<size_t>(s);
  return inst.c0[s] + inst.lin[si].dot(a) + a.dot(inst.quad[si] * a);
}

Vec q_action_grad(const FiniteInstance& inst, int s, const Vec& a) {
  const auto si = static_cast<size_t>(s);
  return inst.lin[si] +
         (inst.quad[si] + inst.quad[si].transpose()) * a;
}

Vec policy_action(const FiniteInstance& inst, int s) {
  return inst.policy * inst.features.col(s);
}

Mat state_policy_gradient(const FiniteInstance& inst, int s) {
  const Vec grad_a = q_action_grad(inst, s, policy_action(inst, s));
  return grad_a * inst.features.col(s).transpose();
}

Mat mixture_policy_gradient(const FiniteInstance& inst) {
  inst.validate();
  Mat g = Mat::Zero(inst.action_dim, inst.feat_dim);
  for (int s = 0; s < inst.n_states; ++s) {
    const double w = (1.0 - inst.alpha) * inst.d_mu[s] + inst.alpha * inst.d_b[s];
    g += w * state_policy_gradient(inst, s);
  }
  return g;
}

Mat reweighted_policy_gradient(const FiniteInstance& inst) {
  inst.validate();
  Mat g = Mat::Zero(inst.action_dim, inst.feat_dim);
  for (int s = 0; s < inst.n_states; ++s) {
    const double rho = inst.d_b[s] / inst.d_mu[s];
    const double scale = 1.0 + inst.alpha * (rho - 1.0);
    g += inst.d_mu[s] * scale * state_policy_gradient(inst, s);
  }
  return g;
}

double check_identity(const FiniteInstance& inst) {
  const Mat lhs = mixture_policy_gradient(inst);
  const Mat rhs = reweighted_policy_gradient(inst);
  const double scale =
      std::max(lhs.cwiseAbs().maxCoeff(), rhs.cwiseAbs().maxCoeff());
  if (scale == 0.0) return 0.0;
  return (lhs - rhs).cwiseAbs().maxCoeff() / scale;
}

namespace {

Vec random_positive_distribution(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Vec d(n);
  for (int i = 0; i < n; ++i) d[i] = u(rng);
  return d / d.sum();
}

}  // namespace

FiniteInstance random_instance_sized(std::mt19937_64& rng, int n_states,
                                     int action_dim, double alpha) {
  std::normal_distribution<double> gauss(0.0, 1.0);

  FiniteInstance inst;
  inst.n_states = n_states;
  inst.action_dim = action_dim;
  inst.feat_dim = inst.action_dim + 2;
  inst.alpha = alpha;
  inst.d_mu = random_positive_distribution(rng, inst.n_states);
  inst.d_b = random_positive_distribution(rng, inst.n_states);

  inst.c0.resize(inst.n_states);
  inst.lin.resize(static_cast<size_t>(inst.n_states));
  inst.quad.resize(static_cast<size_t>(inst.n_states));
  for (int s = 0; s < inst.n_states; ++s) {
    inst.c0[s] = gauss(rng);
    Vec l(inst.action_dim);
    for (int i = 0; i < inst.action_dim; ++i) l[i] = gauss(rng);
    Mat h(inst.action_dim, inst.action_dim);
    for (int i = 0; i < inst.action_dim; ++i)
      for (int j = 0; j < inst.action_dim; ++j) h(i, j) = 0.5 * gauss(rng);
    inst.lin[static_cast<size_t>(s)] = std::move(l);
    inst.quad[static_cast<size_t>(s)] = std::move(h);
  }

  inst.features.resize(inst.feat_dim, inst.n_states);
  for (int i = 0; i < inst.feat_dim; ++i)
    for (int s = 0; s < inst.n_states; ++s) inst.features(i, s) = gauss(rng);
  inst.policy.resize(inst.action_dim, inst.feat_dim);
  for (int i = 0; i < inst.action_dim; ++i)
    for (int j = 0; j < inst.feat_dim; ++j) inst.policy(i, j) = gauss(rng);
  return inst;
}

FiniteInstance random_instance(std::mt19937_64& rng, int max_states,
                               int max_action_dim, double alpha) {
  std::uniform_int_distribution<int> states(2, max_states);
  std::uniform_int_distribution<int> adim(1, max_action_dim);
  return random_instance_sized(rng, states(rng), adim(rng), alpha);
}

void MdpInstance::validate() const {
  if (n_states < 1 || n_actions < 1)
    fail(ErrorCategory::Config, "MDP sizes must be >= 1");
  if (!(gamma >= 0.0 && gamma < 1.0))
    fail(ErrorCategory::Config, "discount must satisfy 0 <= gamma < 1");
  if (static_cast<int>(kernel.size()) != n_actions)
    fail(ErrorCategory::Config, "kernel size mismatch");
  for (const Mat& p : kernel) {
    if (p.rows() != n_states || p.cols() != n_states)
      fail(ErrorCategory::Config, "kernel shape mismatch");
    for (int s = 0; s < n_states; ++s)
      if (std::abs(p.row(s).sum() - 1.0) > 1e-9)
        fail(ErrorCategory::Config, "kernel rows must sum to 1");
  }
  if (reward.rows() != n_states || reward.cols() != n_actions)
    fail(ErrorCategory::Config, "reward shape mismatch");
  if (start.size() != n_states || std::abs(start.sum() - 1.0) > 1e-9)
    fail(ErrorCategory::Config, "start distribution must sum to 1");
}

namespace {

Mat policy_chain(const MdpInstance& mdp, const TabularPolicy& policy) {
  if (static_cast<int>(policy.size()) != mdp.n_states)
    fail(ErrorCategory::Config, "policy size mismatch");
  Mat p(mdp.n_states, mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    const int a = policy[static_cast<size_t>(s)];
    if (a < 0 || a >= mdp.n_actions)
      fail(ErrorCategory::Config, "policy action index out of range");
    p.row(s) = mdp.kernel[static_cast<size_t>(a)].row(s);
  }
  return p;
}

}  // namespace

Vec visitation(const MdpInstance& mdp, const TabularPolicy& policy) {
  mdp.validate();
  const Mat p = policy_chain(mdp, policy);
  // occupancy = (I - gamma P')^{-1} start, then normalized to a distribution
  Mat a = Mat::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * p.transpose();
  Eigen::PartialPivLU<Mat> lu(a);
  Vec occupancy = lu.solve(mdp.start);
  const double total = occupancy.sum();
  if (!(total > 0.0) || !occupancy.allFinite())
    fail(ErrorCategory::Numeric, "visitation solve failed");
  return occupancy / total;
}

Vec stationary_distribution(const MdpInstance& mdp,
                            const TabularPolicy& policy) {
  mdp.validate();
  const Mat p = policy_chain(mdp, policy);
  // Solve d' (P - I) = 0 with sum(d) = 1 via a replaced last equation.
  Mat a = p.transpose() - Mat::Identity(mdp.n_states, mdp.n_states);
  a.row(mdp.n_states - 1).setOnes();
  Vec rhs = Vec::Zero(mdp.n_states);
  rhs[mdp.n_states - 1] = 1.0;
  Eigen::PartialPivLU<Mat> lu(a);
  Vec d = lu.solve(rhs);
  if (!d.allFinite() || d.minCoeff() < -1e-12)
    fail(ErrorCategory::Numeric, "stationary distribution solve failed");
  return d.cwiseMax(0.0) / d.sum();
}

Mat bellman_apply(const MdpInstance& mdp, const TabularPolicy& policy,
                  const Mat& q) {
  if (q.rows() != mdp.n_states || q.cols() != mdp.n_actions)
    fail(ErrorCategory::Config, "tabular Q shape mismatch");
  Vec v(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s)
    v[s] = q(s, policy[static_cast<size_t>(s)]);
  Mat out(mdp.n_states, mdp.n_actions);
  for (int a = 0; a < mdp.n_actions; ++a)
    out.col(a) = mdp.reward.col(a) +
                 mdp.gamma * (mdp.kernel[static_cast<size_t>(a)] * v);
  return out;
}

double weighted_q_distance(const Mat& q_a, const Mat& q_b, const Mat& d) {
  return std::sqrt((d.array() * (q_a - q_b).array().square()).sum());
}

ContractionReport check_contraction(const MdpInstance& mdp,
                                    const TabularPolicy& policy, const Mat& d,
                                    int pairs, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto random_q = [&] {
    Mat q(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s)
      for (int a = 0; a < mdp.n_actions; ++a) q(s, a) = gauss(rng);
    return q;
  };

  ContractionReport report;
  report.pairs = pairs;
  double sum = 0.0;
  for (int i = 0; i < pairs; ++i) {
    const Mat q1 = random_q();
    const Mat q2 = random_q();
    const double den = weighted_q_distance(q1, q2, d);
    double ratio = 0.0;
    if (den > 0.0) {
      const double num = weighted_q_distance(bellman_apply(mdp, policy, q1),
                                             bellman_apply(mdp, policy, q2), d);
      ratio = num / den;
    }
    report.max_ratio = std::max(report.max_ratio, ratio);
    sum += ratio;
  }
  report.mean_ratio = pairs > 0 ? sum / pairs : 0.0;
  return report;
}

Mat on_policy_weights(const MdpInstance& mdp, const TabularPolicy& policy,
                      const Vec& state_dist) {
  Mat d = Mat::Zero(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s)
    d(s, policy[static_cast<size_t>(s)]) = state_dist[s];
  return d;
}

MdpInstance random_mdp(std::mt19937_64& rng, int n_states, int n_actions,
                       double gamma) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::uniform_real_distribution<double> r(-1.0, 1.0);

  MdpInstance mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.kernel.resize(static_cast<size_t>(n_actions));
  for (int a = 0; a < n_actions; ++a) {
    Mat p(n_states, n_states);
    for (int s = 0; s < n_states; ++s) {
      for (int t = 0; t < n_states; ++t) p(s, t) = u(rng);
      p.row(s) /= p.row(s).sum();
    }
    mdp.kernel[static_cast<size_t>(a)] = std::move(p);
  }
  mdp.reward.resize(n_states, n_actions);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) mdp.reward(s, a) = r(rng);
  Vec start(n_states);
  for (int s = 0; s < n_states; ++s) start[s] = u(rng);
  mdp.start = start / start.sum();
  mdp.actions.resize(1, n_actions);
  for (int a = 0; a < n_actions; ++a)
    mdp.actions(0, a) = -1.0 + 2.0 * a / std::max(1, n_actions - 1);
  return mdp;
}

TabularPolicy random_policy(std::mt19937_64& rng, const MdpInstance& mdp) {
  std::uniform_int_distribution<int> pick(0, mdp.n_actions - 1);
  TabularPolicy policy(static_cast<size_t>(mdp.n_states));
  for (auto& a : policy) a = pick(rng);
  return policy;
}

FiniteInstance instance_from_mdp(const MdpInstance& mdp,
                                 const TabularPolicy& mu,
                                 const TabularPolicy& b, double alpha,
                                 std::mt19937_64& rng) {
  FiniteInstance inst = random_instance_sized(rng, mdp.n_states, 2, alpha);
  inst.d_mu = visitation(mdp, mu);
  inst.d_b = visitation(mdp, b);
  inst.validate();
  return inst;
}

}  // namespace poprl
