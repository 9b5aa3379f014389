#include "poprl/evo.hpp"

#include <algorithm>
#include <cmath>

#include "poprl/error.hpp"

namespace poprl {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Normal: return "normal";
    case Strategy::Always: return "always";
    case Strategy::AlwaysFirst: return "always_first";
    case Strategy::ParamNoise: return "param_noise";
  }
  return "unknown";
}

Population make_population(Vec mean, double sigma, int n, int k,
                           Strategy strategy) {
  if (sigma <= 0.0) fail(ErrorCategory::Config, "sigma must be positive");
  if (n < 1) fail(ErrorCategory::Config, "population size must be >= 1");
  if (k < 1 || k > n)
    fail(ErrorCategory::Config, "parent count must satisfy 1 <= K <= N");
  Population pop;
  pop.mean = std::move(mean);
  pop.sigma = sigma;
  pop.n = n;
  pop.k = k;
  pop.strategy = strategy;
  return pop;
}

std::vector<Vec> sample_population(Population& pop, std::mt19937_64& rng) {
  if (pop.sigma <= 0.0) fail(ErrorCategory::Config, "sigma must be positive");
  std::normal_distribution<double> gauss(0.0, 1.0);

  pop.noises.assign(static_cast<size_t>(pop.n), Vec());
  std::vector<Vec> individuals(static_cast<size_t>(pop.n));
  for (int i = 0; i < pop.n; ++i) {
    Vec eps(pop.mean.size());
    for (Eigen::Index j = 0; j < eps.size(); ++j) eps[j] = gauss(rng);
    individuals[static_cast<size_t>(i)] = pop.mean + pop.sigma * eps;
    pop.noises[static_cast<size_t>(i)] = std::move(eps);
  }
  pop.evaluated = false;
  return individuals;
}

void set_fitnesses(Population& pop, Vec fitnesses, double f_target) {
  if (fitnesses.size() != pop.n)
    fail(ErrorCategory::Config, "fitness count does not match population size");
  pop.fitnesses = std::move(fitnesses);
  pop.f_target = f_target;
  pop.evaluated = true;
}

Vec fake_noise(const Population& pop, const Vec& target_params) {
  if (target_params.size() != pop.mean.size())
    fail(ErrorCategory::Config, "target parameter dimension mismatch");
  return (target_params - pop.mean) / pop.sigma;
}

Vec recombination_weights(int k_hat) {
  if (k_hat < 1)
    fail(ErrorCategory::Domain, "recombination weights need k_hat >= 1");
  Vec w(k_hat);
  const double top = std::log(static_cast<double>(k_hat) + 0.5);
  for (int i = 0; i < k_hat; ++i)
    w[i] = top - std::log(static_cast<double>(i + 1));
  return w / w.sum();
}

namespace {

// Candidates ordered by fitness descending; ties by ascending id, so the
// target (largest id) loses ties to population members.
std::vector<Parent> sort_candidates(std::vector<Parent> c) {
  std::sort(c.begin(), c.end(), [](const Parent& a, const Parent& b) {
    if (a.fitness != b.fitness) return a.fitness > b.fitness;
    return a.candidate < b.candidate;
  });
  return c;
}

}  // namespace

ParentSet select_parents(const Population& pop) {
  if (pop.strategy == Strategy::ParamNoise) return {};
  if (!pop.evaluated)
    fail(ErrorCategory::Sequencing,
         "select_parents called before fitnesses were recorded");

  std::vector<Parent> members;
  members.reserve(static_cast<size_t>(pop.n));
  for (int i = 0; i < pop.n; ++i)
    members.push_back({i, pop.fitnesses[i]});
  const Parent target{pop.n, pop.f_target};

  ParentSet parents;
  switch (pop.strategy) {
    case Strategy::Normal: {
      std::vector<Parent> all = members;
      all.push_back(target);
      all = sort_candidates(std::move(all));
      all.resize(static_cast<size_t>(pop.k + 1));
      parents.ranked = std::move(all);
      break;
    }
    case Strategy::Always: {
      std::vector<Parent> top = sort_candidates(std::move(members));
      top.resize(static_cast<size_t>(pop.k));
      auto pos = std::find_if(top.begin(), top.end(), [&](const Parent& p) {
        return target.fitness > p.fitness;
      });
      top.insert(pos, target);
      parents.ranked = std::move(top);
      break;
    }
    case Strategy::AlwaysFirst: {
      std::vector<Parent> top = sort_candidates(std::move(members));
      top.resize(static_cast<size_t>(pop.k));
      top.insert(top.begin(), target);
      parents.ranked = std::move(top);
      break;
    }
    case Strategy::ParamNoise:
      break;
  }
  return parents;
}

void es_update(Population& pop, const ParentSet& parents,
               const Vec& eps_target, const Vec& target_params) {
  if (pop.strategy == Strategy::ParamNoise) {
    if (parents.size() != 0)
      fail(ErrorCategory::Config, "param_noise takes no parents");
    pop.mean = target_params;
    pop.evaluated = false;
    return;
  }
  if (!pop.evaluated)
    fail(ErrorCategory::Sequencing,
         "es_update called before fitnesses were recorded");

  const Vec w = recombination_weights(parents.size());
  Vec delta = Vec::Zero(pop.mean.size());
  for (int j = 0; j < parents.size(); ++j) {
    const int id = parents.ranked[static_cast<size_t>(j)].candidate;
    const Vec& eps = id == pop.n ? eps_target
                                 : pop.noises[static_cast<size_t>(id)];
    delta += w[j] * eps;
  }
  pop.mean += pop.sigma * delta;
  pop.evaluated = false;
}

double action_discrepancy(const PolicyFn& target_policy,
                          const PolicyFn& individual_policy,
                          const Trajectory& trajectory) {
  if (trajectory.transitions.empty())
    fail(ErrorCategory::Domain,
         "action discrepancy needs a non-empty trajectory");

  double total = 0.0;
  for (const Transition& t : trajectory.transitions) {
    const Vec a = target_policy(t.state);
    const Vec b = individual_policy(t.state);
    if (a.size() != b.size())
      fail(ErrorCategory::Config, "policies disagree on action dimension");
    total += (a - b).squaredNorm() / static_cast<double>(a.size());
  }
  return total / static_cast<double>(trajectory.transitions.size());
}

}  // namespace poprl
