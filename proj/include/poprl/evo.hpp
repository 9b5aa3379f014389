#pragma once

#include <random>
#include <vector>

#include "poprl/common.hpp"
#include "poprl/env.hpp"

namespace poprl {

/// How the target actor participates in parent selection.
///   Normal      — target ranked among the population purely by fitness.
///   Always      — target always a parent, at the rank its fitness earns.
///   AlwaysFirst — target always the first parent regardless of fitness.
///   ParamNoise  — no evolution; the mean is pinned to the target actor.
enum class Strategy { Normal, Always, AlwaysFirst, ParamNoise };

const char* strategy_name(Strategy s);

/// Isotropic-Gaussian search distribution over policy parameters together
/// with the per-iteration evaluation results.
struct Population {
  Vec mean;          // center of the search distribution
  double sigma = 0.01;
  int n = 10;        // individuals per iteration
  int k = 5;         // parents drawn from the population (K of K+1)
  Strategy strategy = Strategy::Normal;

  std::vector<Vec> noises;  // this iteration's standard-normal draws
  Vec fitnesses;            // f_i, one per individual
  double f_target = 0.0;
  bool evaluated = false;   // set once fitnesses for this iteration are in
};

Population make_population(Vec mean, double sigma, int n, int k,
                           Strategy strategy);

/// Draw this iteration's individuals: theta_i = mean + sigma * eps_i. The
/// standard-normal noises are retained for the recombination update.
std::vector<Vec> sample_population(Population& pop, std::mt19937_64& rng);

/// Record the iteration's fitness evaluations.
void set_fitnesses(Population& pop, Vec fitnesses, double f_target);

/// The target actor's equivalent noise (theta - mean) / sigma, letting it
/// enter recombination like a sampled individual.
Vec fake_noise(const Population& pop, const Vec& target_params);

/// Log-rank recombination weights: strictly positive, strictly decreasing,
/// summing to one.
Vec recombination_weights(int k_hat);

/// Candidate ids 0..n-1 are population members; id n is the target actor.
struct Parent {
  int candidate;
  double fitness;
};

/// Parents in recombination order (rank 1 first).
struct ParentSet {
  std::vector<Parent> ranked;

  int size() const { return static_cast<int>(ranked.size()); }
};

/// Apply the configured strategy to this iteration's fitnesses. Fitness ties
/// break by population index, with the target losing ties.
ParentSet select_parents(const Population& pop);

/// Move the mean by sigma * sum_j w_j * eps_j over the ranked parents. Under
/// ParamNoise the mean is overwritten with the target parameters instead.
void es_update(Population& pop, const ParentSet& parents,
               const Vec& eps_target, const Vec& target_params);

/// Mean over trajectory states of the per-dimension mean squared difference
/// between the two policies' actions, both evaluated noise-free.
double action_discrepancy(const PolicyFn& target_policy,
                          const PolicyFn& individual_policy,
                          const Trajectory& trajectory);

}  // namespace poprl
