#include "poprl/harness.hpp"

#include <algorithm>
#include <fstream>
#include <future>

#include <nlohmann/json.hpp>

#include "poprl/checkpoint.hpp"
#include "poprl/error.hpp"
#include "poprl/rng.hpp"

namespace poprl {

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::ErlNormal: return "erl_normal";
    case Algorithm::ErlAlways: return "erl_always";
    case Algorithm::ErlAlwaysFirst: return "erl_always_first";
    case Algorithm::ParamNoise: return "param_noise";
    case Algorithm::NoPop: return "no_pop";
  }
  return "unknown";
}

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "erl_normal") return Algorithm::ErlNormal;
  if (name == "erl_always") return Algorithm::ErlAlways;
  if (name == "erl_always_first") return Algorithm::ErlAlwaysFirst;
  if (name == "param_noise") return Algorithm::ParamNoise;
  if (name == "no_pop") return Algorithm::NoPop;
  fail(ErrorCategory::Config, "unknown algorithm: " + name);
}

namespace {

Strategy strategy_of(Algorithm a) {
  switch (a) {
    case Algorithm::ErlNormal: return Strategy::Normal;
    case Algorithm::ErlAlways: return Strategy::Always;
    case Algorithm::ErlAlwaysFirst: return Strategy::AlwaysFirst;
    case Algorithm::ParamNoise: return Strategy::ParamNoise;
    case Algorithm::NoPop: break;
  }
  fail(ErrorCategory::Config, "no_pop has no evolution strategy");
}

const char* buffer_mode_name(BufferMode m) {
  return m == BufferMode::SingleShared ? "single_shared" : "dual";
}

BufferMode buffer_mode_from_name(const std::string& name) {
  if (name == "single_shared") return BufferMode::SingleShared;
  if (name == "dual") return BufferMode::Dual;
  fail(ErrorCategory::Config, "unknown buffer_mode: " + name);
}

}  // namespace

void RunConfig::validate() const {
  algorithm_name(algorithm);
  make_env(env);  // throws for unknown names
  if (population < 1) fail(ErrorCategory::Config, "population must be >= 1");
  if (parents < 1 || parents > population)
    fail(ErrorCategory::Config, "parents must satisfy 1 <= K <= N");
  if (sigma <= 0.0) fail(ErrorCategory::Config, "sigma must be positive");
  if (total_training_steps < 0)
    fail(ErrorCategory::Config, "total_training_steps must be >= 0");
  if (eval_period_iterations < 1)
    fail(ErrorCategory::Config, "eval_period_iterations must be >= 1");
  if (eval_episodes < 1)
    fail(ErrorCategory::Config, "eval_episodes must be >= 1");
  if (exploration_noise_std < 0.0)
    fail(ErrorCategory::Config, "exploration_noise_std must be >= 0");
  if (hidden_dims.empty())
    fail(ErrorCategory::Config, "hidden_dims must not be empty");
  learner.validate();
  if (buffer_capacity < 1 || dual_capacity_each < 1)
    fail(ErrorCategory::Config, "buffer capacities must be >= 1");

  if (buffer_mode == BufferMode::Dual) {
    if (!has_population())
      fail(ErrorCategory::Config,
           "dual buffers need an algorithm with a population producing data");
    if (!(mix_ratio > 0.0 && mix_ratio < 1.0))
      fail(ErrorCategory::Config, "mix_ratio must lie in (0,1)");
  }
  if (algorithm == Algorithm::NoPop && buffer_mode != BufferMode::SingleShared)
    fail(ErrorCategory::Config, "no_pop requires the single shared buffer");
  if (adversarial_pop_data && !has_population())
    fail(ErrorCategory::Config,
         "adversarial_pop_data needs an algorithm with a population");
}

std::string run_config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["algorithm"] = algorithm_name(c.algorithm);
  j["buffer_mode"] = buffer_mode_name(c.buffer_mode);
  j["mix_ratio"] = c.mix_ratio;
  j["env"] = c.env;
  j["population"] = c.population;
  j["sigma"] = c.sigma;
  j["parents"] = c.parents;
  j["total_training_steps"] = c.total_training_steps;
  j["eval_period_iterations"] = c.eval_period_iterations;
  j["eval_episodes"] = c.eval_episodes;
  j["exploration_noise_std"] = c.exploration_noise_std;
  j["hidden_dims"] = c.hidden_dims;
  j["gamma"] = c.learner.gamma;
  j["tau"] = c.learner.tau;
  j["policy_delay"] = c.learner.policy_delay;
  j["smoothing_noise_std"] = c.learner.smoothing_noise_std;
  j["smoothing_clip"] = c.learner.smoothing_clip;
  j["actor_lr"] = c.learner.actor_lr;
  j["critic_lr"] = c.learner.critic_lr;
  j["batch_size"] = c.learner.batch_size;
  j["buffer_capacity"] = c.buffer_capacity;
  j["dual_capacity_each"] = c.dual_capacity_each;
  j["adversarial_pop_data"] = c.adversarial_pop_data;
  j["output_dir"] = c.output_dir;
  return j.dump(2) + "\n";
}

RunConfig parse_run_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::Config, std::string("config is not valid JSON: ") +
                                    e.what());
  }
  if (!j.is_object()) fail(ErrorCategory::Config, "config must be an object");

  RunConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "algorithm")
        c.algorithm = algorithm_from_name(value.get<std::string>());
      else if (key == "buffer_mode")
        c.buffer_mode = buffer_mode_from_name(value.get<std::string>());
      else if (key == "mix_ratio") c.mix_ratio = value.get<double>();
      else if (key == "env") c.env = value.get<std::string>();
      else if (key == "population") c.population = value.get<int>();
      else if (key == "sigma") c.sigma = value.get<double>();
      else if (key == "parents") c.parents = value.get<int>();
      else if (key == "total_training_steps")
        c.total_training_steps = value.get<long>();
      else if (key == "eval_period_iterations")
        c.eval_period_iterations = value.get<int>();
      else if (key == "eval_episodes") c.eval_episodes = value.get<int>();
      else if (key == "exploration_noise_std")
        c.exploration_noise_std = value.get<double>();
      else if (key == "hidden_dims")
        c.hidden_dims = value.get<std::vector<int>>();
      else if (key == "gamma") c.learner.gamma = value.get<double>();
      else if (key == "tau") c.learner.tau = value.get<double>();
      else if (key == "policy_delay")
        c.learner.policy_delay = value.get<int>();
      else if (key == "smoothing_noise_std")
        c.learner.smoothing_noise_std = value.get<double>();
      else if (key == "smoothing_clip")
        c.learner.smoothing_clip = value.get<double>();
      else if (key == "actor_lr") c.learner.actor_lr = value.get<double>();
      else if (key == "critic_lr") c.learner.critic_lr = value.get<double>();
      else if (key == "batch_size") c.learner.batch_size = value.get<int>();
      else if (key == "buffer_capacity")
        c.buffer_capacity = value.get<std::size_t>();
      else if (key == "dual_capacity_each")
        c.dual_capacity_each = value.get<std::size_t>();
      else if (key == "adversarial_pop_data")
        c.adversarial_pop_data = value.get<bool>();
      else if (key == "output_dir") c.output_dir = value.get<std::string>();
      else
        fail(ErrorCategory::Config, "unknown config field: " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::Config, std::string("bad config value: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::Io, "cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_run_config(text);
}

IterationPlan make_iteration_plan(const RunConfig& config) {
  IterationPlan plan;
  if (config.has_population()) {
    plan.evolve = true;
    plan.tasks.push_back({WorkerTask::Kind::TargetExploration, 0, -1,
                          config.exploration_noise_std});
    for (int i = 0; i < config.population; ++i)
      plan.tasks.push_back(
          {WorkerTask::Kind::PopulationMember, i + 1, i, 0.0});
    plan.tasks.push_back(
        {WorkerTask::Kind::TargetFitness, config.population + 1, -1, 0.0});
  } else {
    for (int i = 0; i <= config.population; ++i)
      plan.tasks.push_back(
          {WorkerTask::Kind::Clone, i, -1, config.exploration_noise_std});
  }
  plan.budget_worker = 0;
  return plan;
}

Run::Run(RunConfig config, std::uint64_t seed)
    : config_(std::move(config)), seed_(seed) {
  config_.validate();
  env_ = make_env(config_.env);
  const EnvSpec& es = env_->spec();
  learner_ = make_learner(es.state_dim, es.action_dim, config_.hidden_dims,
                          config_.learner, es.action_low, es.action_high,
                          seed_);
  if (config_.has_population())
    pop_ = make_population(learner_.actor, config_.sigma, config_.population,
                           config_.parents, strategy_of(config_.algorithm));
  if (config_.buffer_mode == BufferMode::Dual)
    source_ = std::make_unique<DualBuffer>(config_.dual_capacity_each,
                                           es.state_dim, es.action_dim,
                                           config_.mix_ratio);
  else
    source_ = std::make_unique<SingleBuffer>(config_.buffer_capacity,
                                             es.state_dim, es.action_dim);
  sample_rng_ = make_rng(seed_, Stream::BatchSample);
  record_.population = config_.has_population() ? config_.population : 0;
}

Run::Run(RunConfig config, std::uint64_t seed, std::filesystem::path out_dir)
    : Run(std::move(config), seed) {
  out_dir_ = std::move(out_dir);
  std::filesystem::create_directories(*out_dir_);
  writer_.emplace(*out_dir_ / "record.csv", record_.population);
}

Population& Run::population() {
  if (!pop_) fail(ErrorCategory::Sequencing, "run has no population");
  return *pop_;
}

void Run::store_trajectory(const Trajectory& traj) {
  for (const Transition& t : traj.transitions) source_->push(t);
}

PolicyFn Run::worker_policy(const WorkerTask& task,
                            const std::vector<Vec>& individuals) const {
  if (task.kind == WorkerTask::Kind::PopulationMember)
    return make_policy(learner_.actor_spec,
                       individuals[static_cast<size_t>(task.pop_index)]);
  return make_policy(learner_.actor_spec, learner_.actor);
}

IterationReport Run::run_iteration() {
  return run_iteration(make_iteration_plan(config_));
}

IterationReport Run::run_iteration(const IterationPlan& plan) {
  iteration_ += 1;
  IterationReport report;
  report.iteration = iteration_;

  const bool wants_population = std::any_of(
      plan.tasks.begin(), plan.tasks.end(), [](const WorkerTask& t) {
        return t.kind == WorkerTask::Kind::PopulationMember;
      });

  // Phase 1: population sampling. A pinned-mean population perturbs the
  // latest actor parameters.
  std::vector<Vec> individuals;
  if (wants_population) {
    if (!pop_) fail(ErrorCategory::Sequencing, "plan needs a population");
    if (pop_->strategy == Strategy::ParamNoise) pop_->mean = learner_.actor;
    auto rng = make_rng(seed_, Stream::PopSample,
                        static_cast<std::uint64_t>(iteration_));
    individuals = sample_population(*pop_, rng);
  }

  // Phase 2: parallel rollouts, joined at a barrier in task order.
  std::vector<std::future<Trajectory>> futures;
  futures.reserve(plan.tasks.size());
  for (const WorkerTask& task : plan.tasks) {
    PolicyFn policy = worker_policy(task, individuals);
    const Origin origin = task.kind == WorkerTask::Kind::PopulationMember
                              ? Origin::population(task.pop_index)
                              : Origin::target();
    const std::uint64_t worker_seed =
        mix_seed(seed_, Stream::Rollout, static_cast<std::uint64_t>(iteration_),
                 static_cast<std::uint64_t>(task.worker_id));
    const double noise = task.noise_std;
    const Env* env = env_.get();
    futures.push_back(std::async(
        std::launch::async, [env, policy = std::move(policy), noise,
                             worker_seed, origin]() {
          return rollout(*env, policy, noise, worker_seed, origin);
        }));
  }
  std::vector<Trajectory> trajectories;
  trajectories.reserve(plan.tasks.size());
  for (auto& f : futures) trajectories.push_back(f.get());

  // Phase 3: deterministic-order storage, with optional adversarial
  // replacement of population data.
  for (size_t i = 0; i < plan.tasks.size(); ++i) {
    const WorkerTask& task = plan.tasks[i];
    if (task.kind == WorkerTask::Kind::PopulationMember &&
        config_.adversarial_pop_data) {
      const PolicyFn random_policy = uniform_random_policy(
          env_->spec(), mix_seed(seed_, Stream::Adversarial,
                                 static_cast<std::uint64_t>(iteration_),
                                 static_cast<std::uint64_t>(task.worker_id)));
      const Trajectory adversarial =
          rollout(*env_, random_policy, 0.0,
                  mix_seed(seed_, Stream::Adversarial,
                           static_cast<std::uint64_t>(iteration_),
                           1000 + static_cast<std::uint64_t>(task.worker_id)),
                  Origin::population(task.pop_index));
      store_trajectory(adversarial);
      report.transitions_stored += adversarial.length();
    } else {
      store_trajectory(trajectories[i]);
      report.transitions_stored += trajectories[i].length();
    }
  }

  // Phase 4: fitnesses, diagnostics, evolution update.
  if (plan.evolve) {
    if (!pop_) fail(ErrorCategory::Sequencing, "plan needs a population");
    Vec fitnesses = Vec::Zero(pop_->n);
    std::optional<double> f_target;
    const PolicyFn target_policy =
        make_policy(learner_.actor_spec, learner_.actor);
    for (size_t i = 0; i < plan.tasks.size(); ++i) {
      const WorkerTask& task = plan.tasks[i];
      if (task.kind == WorkerTask::Kind::PopulationMember) {
        fitnesses[task.pop_index] = trajectories[i].episodic_return;
        const PolicyFn individual_policy = make_policy(
            learner_.actor_spec,
            individuals[static_cast<size_t>(task.pop_index)]);
        report.discrepancies.push_back(action_discrepancy(
            target_policy, individual_policy, trajectories[i]));
      } else if (task.kind == WorkerTask::Kind::TargetFitness) {
        f_target = trajectories[i].episodic_return;
      }
    }
    if (!f_target)
      fail(ErrorCategory::Sequencing,
           "evolving plan has no target fitness episode");
    set_fitnesses(*pop_, fitnesses, *f_target);
    const Vec eps_target = fake_noise(*pop_, learner_.actor);
    const ParentSet parent_set = select_parents(*pop_);
    es_update(*pop_, parent_set, eps_target, learner_.actor);

    report.f_target = f_target;
    report.fitnesses.assign(fitnesses.data(), fitnesses.data() + fitnesses.size());
  }

  // Phase 5: off-policy updates under the iteration's gradient budget.
  long budget = 0;
  for (size_t i = 0; i < plan.tasks.size(); ++i)
    if (plan.tasks[i].worker_id == plan.budget_worker) {
      budget = trajectories[i].length();
      break;
    }
  budget = std::min(budget, config_.total_training_steps - clock_);
  budget = std::max<long>(budget, 0);
  report.gradient_budget = budget;
  report.buffer_size_at_update = source_->stored();
  report.update = train_steps(learner_, *source_, budget, sample_rng_);
  clock_ += report.update.steps;
  return report;
}

EvalRecord Run::evaluate() {
  EvalRecord rec;
  rec.training_steps = clock_;

  const PolicyFn target_policy =
      make_policy(learner_.actor_spec, learner_.actor);
  double total = 0.0;
  for (int e = 0; e < config_.eval_episodes; ++e)
    total += rollout(*env_, target_policy, 0.0,
                     mix_seed(seed_, Stream::Eval,
                              static_cast<std::uint64_t>(iteration_),
                              static_cast<std::uint64_t>(e)),
                     Origin::target())
                 .episodic_return;
  rec.target_return = total / config_.eval_episodes;

  if (pop_) {
    const PolicyFn mean_policy =
        make_policy(learner_.actor_spec, pop_->mean);
    double pop_total = 0.0;
    for (int e = 0; e < config_.eval_episodes; ++e)
      pop_total += rollout(*env_, mean_policy, 0.0,
                           mix_seed(seed_, Stream::EvalPop,
                                    static_cast<std::uint64_t>(iteration_),
                                    static_cast<std::uint64_t>(e)),
                           Origin::target())
                       .episodic_return;
    rec.pop_mean_return = pop_total / config_.eval_episodes;
  }
  return rec;
}

void Run::run_to_completion() {
  try {
    while (clock_ < config_.total_training_steps) {
      const IterationReport report = run_iteration();

      IterationRow row;
      row.iteration = report.iteration;
      row.training_steps = clock_;
      row.critic_loss = report.update.mean_critic_loss;
      row.actor_objective = report.update.mean_actor_objective;
      row.batch_target_count = report.update.batch_target_count;
      row.batch_pop_count = report.update.batch_pop_count;
      if (!report.fitnesses.empty()) {
        row.fitness_list = report.fitnesses;
        double sum = 0.0;
        for (double f : report.fitnesses) sum += f;
        row.mean_pop_fitness = sum / static_cast<double>(report.fitnesses.size());
        row.f_target = report.f_target;
        row.discrepancies = report.discrepancies;
        double dsum = 0.0;
        for (double d : report.discrepancies) dsum += d;
        row.mean_action_discrepancy =
            dsum / static_cast<double>(report.discrepancies.size());
      }
      if (iteration_ % config_.eval_period_iterations == 0) {
        const EvalRecord eval = evaluate();
        row.target_eval_return = eval.target_return;
        row.pop_mean_eval_return = eval.pop_mean_return;
      }
      record_.rows.push_back(row);
      if (writer_) writer_->append(row);
    }
  } catch (...) {
    // Halt with a state checkpoint so the run can be inspected or resumed.
    if (out_dir_) {
      save_learner(*out_dir_ / "halt_learner.bin", learner_);
      if (pop_)
        save_network(*out_dir_ / "halt_population_mean.bin",
                     learner_.actor_spec, pop_->mean);
    }
    throw;
  }

  if (out_dir_) {
    save_learner(*out_dir_ / "learner.bin", learner_);
    save_network(*out_dir_ / "target_actor.bin", learner_.actor_spec,
                 learner_.actor, &learner_.actor_opt);
    if (pop_)
      save_network(*out_dir_ / "population_mean.bin", learner_.actor_spec,
                   pop_->mean);
  }
}

RunRecord run_experiment(const RunConfig& config, std::uint64_t seed) {
  config.validate();
  const auto seed_dir = std::filesystem::path(config.output_dir) /
                        ("seed_" + std::to_string(seed));
  std::filesystem::create_directories(seed_dir);
  {
    std::ofstream out(seed_dir / "config.json");
    if (!out) fail(ErrorCategory::Io, "cannot write config copy");
    out << run_config_to_json(config);
  }
  Run run(config, seed, seed_dir);
  run.run_to_completion();
  return run.record();
}

}  // namespace poprl
