#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "poprl/env.hpp"
#include "poprl/evo.hpp"
#include "poprl/metrics.hpp"
#include "poprl/td3.hpp"

namespace poprl {

enum class Algorithm { ErlNormal, ErlAlways, ErlAlwaysFirst, ParamNoise, NoPop };
enum class BufferMode { SingleShared, Dual };

const char* algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

/// Full experiment configuration; serialized field-for-field as JSON.
struct RunConfig {
  Algorithm algorithm = Algorithm::NoPop;
  BufferMode buffer_mode = BufferMode::SingleShared;
  double mix_ratio = 0.25;  // target-store fraction per batch in dual mode
  std::string env = "pointmass-2d";
  int population = 10;      // N; no_pop uses N+1 clone workers
  double sigma = 0.01;
  int parents = 5;          // K
  long total_training_steps = 50000;  // the experiment clock cap
  int eval_period_iterations = 2;
  int eval_episodes = 10;
  double exploration_noise_std = 0.1;
  std::vector<int> hidden_dims = {64, 64};
  Td3Config learner;
  std::size_t buffer_capacity = 1000000;    // single shared store
  std::size_t dual_capacity_each = 500000;  // each store in dual mode
  // Diagnostics: store fixed-random-policy trajectories as the population's
  // data instead of its real transitions. Fitness evaluation is unaffected.
  bool adversarial_pop_data = false;
  std::string output_dir = "runs";

  void validate() const;
  bool has_population() const { return algorithm != Algorithm::NoPop; }
};

std::string run_config_to_json(const RunConfig& config);
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

struct WorkerTask {
  enum class Kind { TargetExploration, PopulationMember, TargetFitness, Clone };
  Kind kind = Kind::Clone;
  int worker_id = 0;
  int pop_index = -1;
  double noise_std = 0.0;
};

/// Worker assignments for one iteration. The gradient budget is the episode
/// length collected by `budget_worker` (the single/first target-data worker).
struct IterationPlan {
  std::vector<WorkerTask> tasks;
  bool evolve = false;
  int budget_worker = 0;
};

IterationPlan make_iteration_plan(const RunConfig& config);

struct EvalRecord {
  long training_steps = 0;
  double target_return = 0.0;
  std::optional<double> pop_mean_return;
};

struct IterationReport {
  long iteration = 0;
  long gradient_budget = 0;       // requested updates (clamped to the cap)
  UpdateReport update;            // what the learner actually performed
  std::optional<double> f_target;
  std::vector<double> fitnesses;
  std::vector<double> discrepancies;
  long transitions_stored = 0;    // pushed this iteration
  std::size_t buffer_size_at_update = 0;
};

/// One experiment: owns the learner, population, buffers and metric log, and
/// advances them iteration by iteration with parallel rollout workers.
class Run {
 public:
  Run(RunConfig config, std::uint64_t seed);
  Run(RunConfig config, std::uint64_t seed, std::filesystem::path out_dir);

  /// Algorithm-dispatched iteration (the spec'd per-algorithm entry point).
  IterationReport run_iteration();
  /// Engine entry point; exposed so audits can drive hand-built plans.
  IterationReport run_iteration(const IterationPlan& plan);

  /// Noise-free average return of the target actor (and of the population
  /// mean when one exists) over the configured evaluation episodes.
  EvalRecord evaluate();

  /// Iterates until the training-step clock reaches the configured cap,
  /// evaluating on cadence and streaming rows to the output directory.
  void run_to_completion();

  const RunConfig& config() const { return config_; }
  long clock() const { return clock_; }
  long iteration() const { return iteration_; }
  const RunRecord& record() const { return record_; }
  Learner& learner() { return learner_; }
  Population& population();
  ReplaySource& source() { return *source_; }
  const Env& env() const { return *env_; }

 private:
  void store_trajectory(const Trajectory& traj);
  PolicyFn worker_policy(const WorkerTask& task,
                         const std::vector<Vec>& individuals) const;

  RunConfig config_;
  std::uint64_t seed_;
  std::unique_ptr<Env> env_;
  Learner learner_;
  std::optional<Population> pop_;
  std::unique_ptr<ReplaySource> source_;
  std::mt19937_64 sample_rng_;
  long iteration_ = 0;
  long clock_ = 0;  // harness-side gradient-update accumulator
  RunRecord record_;
  std::optional<std::filesystem::path> out_dir_;
  std::optional<RecordWriter> writer_;
};

/// Full pipeline for one seed: validates, creates <output_dir>/seed_<seed>,
/// writes the config copy, trains to completion, writes final checkpoints
/// (target actor and population mean), and returns the metric log.
RunRecord run_experiment(const RunConfig& config, std::uint64_t seed);

}  // namespace poprl
