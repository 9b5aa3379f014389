#pragma once

#include <random>
#include <vector>

#include "poprl/common.hpp"

namespace poprl {

/// Synthetic finite-state instance for the mixed-data policy-gradient
/// identity. The action value is a per-state quadratic in the action,
/// Q(s,a) = c0[s] + lin[s].a + a' quad[s] a, and the policy is linear in
/// per-state features: mu(s) = policy * features.col(s).
struct FiniteInstance {
  int n_states = 0;
  int action_dim = 0;
  int feat_dim = 0;
  Vec d_mu;               // strictly positive, sums to 1
  Vec d_b;                // strictly positive, sums to 1
  Vec c0;                 // per-state constant term
  std::vector<Vec> lin;   // per-state linear coefficients
  std::vector<Mat> quad;  // per-state quadratic coefficients
  Mat features;           // feat_dim x n_states
  Mat policy;             // action_dim x feat_dim
  double alpha = 0.0;     // off-policy mixing ratio

  void validate() const;
};

double q_value(const FiniteInstance& inst, int s, const Vec& a);
Vec q_action_grad(const FiniteInstance& inst, int s, const Vec& a);
Vec policy_action(const FiniteInstance& inst, int s);

/// Policy gradient delta of one state: outer(dQ/da at mu(s), features(s)).
Mat state_policy_gradient(const FiniteInstance& inst, int s);

/// Gradient of the objective under the mixed state distribution
/// (1-alpha) d_mu + alpha d_b.
Mat mixture_policy_gradient(const FiniteInstance& inst);

/// Gradient of the reweighted objective: d_mu-weighted gradients scaled by
/// 1 + alpha (d_b/d_mu - 1) per state.
Mat reweighted_policy_gradient(const FiniteInstance& inst);

/// Relative max-norm residual between the two gradient routes.
double check_identity(const FiniteInstance& inst);

FiniteInstance random_instance(std::mt19937_64& rng, int max_states,
                               int max_action_dim, double alpha);
FiniteInstance random_instance_sized(std::mt19937_64& rng, int n_states,
                                     int action_dim, double alpha);

/// Finite MDP with a small action grid; kernel[a](s, s') is the transition
/// probability, actions.col(a) embeds grid action a in a continuous space.
struct MdpInstance {
  int n_states = 0;
  int n_actions = 0;
  std::vector<Mat> kernel;  // one n_states x n_states row-stochastic matrix per action
  Mat reward;               // n_states x n_actions
  double gamma = 0.99;
  Vec start;                // initial state distribution
  Mat actions;              // action_dim x n_actions

  void validate() const;
};

/// Deterministic tabular policy: grid-action index per state.
using TabularPolicy = std::vector<int>;

/// Normalized discounted state-visitation distribution, solved exactly.
Vec visitation(const MdpInstance& mdp, const TabularPolicy& policy);

/// Stationary distribution of the policy's state chain (requires an
/// irreducible chain, which random_mdp guarantees by dense kernels).
Vec stationary_distribution(const MdpInstance& mdp,
                            const TabularPolicy& policy);

/// One application of the policy's Bellman backup to a tabular Q.
Mat bellman_apply(const MdpInstance& mdp, const TabularPolicy& policy,
                  const Mat& q);

/// Weighted L2 distance between tabular action-value functions.
double weighted_q_distance(const Mat& q_a, const Mat& q_b, const Mat& d);

struct ContractionReport {
  int pairs = 0;
  double max_ratio = 0.0;
  double mean_ratio = 0.0;
};

/// Measures ||BQ - BQ'||_d / ||Q - Q'||_d over random Q pairs under the
/// given state-action weighting.
ContractionReport check_contraction(const MdpInstance& mdp,
                                    const TabularPolicy& policy, const Mat& d,
                                    int pairs, std::mt19937_64& rng);

/// On-policy state-action weighting: state distribution times an indicator
/// on the policy's action.
Mat on_policy_weights(const MdpInstance& mdp, const TabularPolicy& policy,
                      const Vec& state_dist);

MdpInstance random_mdp(std::mt19937_64& rng, int n_states, int n_actions,
                       double gamma);
TabularPolicy random_policy(std::mt19937_64& rng, const MdpInstance& mdp);

/// Identity instance whose state distributions are the real visitations of
/// two policies on a finite MDP.
FiniteInstance instance_from_mdp(const MdpInstance& mdp,
                                 const TabularPolicy& mu,
                                 const TabularPolicy& b, double alpha,
                                 std::mt19937_64& rng);

}  // namespace poprl
