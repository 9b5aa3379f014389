#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "poprl/error.hpp"
#include "poprl/harness.hpp"
#include "poprl/metrics.hpp"
#include "poprl/propcheck.hpp"
#include "poprl/rng.hpp"

namespace {

int exit_code(poprl::ErrorCategory c) {
  using poprl::ErrorCategory;
  switch (c) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Domain: return 3;
    case ErrorCategory::NotReady: return 4;
    case ErrorCategory::Sequencing: return 5;
    case ErrorCategory::Numeric: return 6;
    case ErrorCategory::Io: return 7;
  }
  return 9;
}

struct SeedRange {
  long first = 0;
  long last = 0;
};

SeedRange parse_seed_range(const std::string& text) {
  const auto pos = text.find("..");
  if (pos == std::string::npos)
    poprl::fail(poprl::ErrorCategory::Config,
                "--seeds expects the form a..b, got: " + text);
  SeedRange r;
  r.first = std::stol(text.substr(0, pos));
  r.last = std::stol(text.substr(pos + 2));
  if (r.last < r.first)
    poprl::fail(poprl::ErrorCategory::Config, "--seeds range is empty");
  return r;
}

int cmd_train(const std::string& config_path, long seed,
              const std::string& seeds_text) {
  poprl::RunConfig config = poprl::load_run_config(config_path);
  if (const char* out = std::getenv("POPRL_OUTPUT_DIR"))
    config.output_dir = out;
  config.validate();

  SeedRange range{seed, seed};
  if (!seeds_text.empty()) range = parse_seed_range(seeds_text);

  for (long s = range.first; s <= range.last; ++s) {
    const auto t0 = std::chrono::steady_clock::now();
    const poprl::RunRecord record =
        poprl::run_experiment(config, static_cast<std::uint64_t>(s));
    const auto dt = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    double last_eval = 0.0;
    for (const auto& row : record.rows)
      if (row.target_eval_return) last_eval = *row.target_eval_return;
    std::cout << "seed " << s << ": " << record.rows.size() << " iterations, "
              << "final eval return " << last_eval << ", " << dt << " s\n";
  }
  return 0;
}

int cmd_verify_prop(int instances, long seed, const std::string& out_path,
                    int contraction_pairs) {
  using namespace poprl;

  std::ofstream csv(out_path);
  if (!csv) fail(ErrorCategory::Io, "cannot open " + out_path);
  csv << "instance,n_states,action_dim,alpha,residual\n";

  auto rng = make_rng(static_cast<std::uint64_t>(seed), Stream::NetInit, 77);
  double max_residual = 0.0;
  for (int i = 0; i < instances; ++i) {
    FiniteInstance inst = random_instance(rng, 20, 3, 0.0);
    for (int a = 0; a <= 10; ++a) {
      inst.alpha = a / 10.0;
      const double residual = check_identity(inst);
      max_residual = std::max(max_residual, residual);
      csv << i << ',' << inst.n_states << ',' << inst.action_dim << ','
          << format_double(inst.alpha) << ',' << format_double(residual)
          << '\n';
    }
  }
  const bool identity_ok = max_residual <= 1e-8;
  std::cout << "identity: " << instances
            << " instances x 11 alphas, max relative residual "
            << max_residual << " (tolerance 1e-8): "
            << (identity_ok ? "PASS" : "FAIL") << "\n";

  bool contraction_ok = true;
  double worst_ratio = 0.0;
  const double gamma = 0.99;
  for (int m = 0; m < 10; ++m) {
    MdpInstance mdp = random_mdp(rng, 6, 3, gamma);
    TabularPolicy policy = random_policy(rng, mdp);
    const Vec d_state = stationary_distribution(mdp, policy);
    const Mat d = on_policy_weights(mdp, policy, d_state);
    const ContractionReport rep =
        check_contraction(mdp, policy, d, contraction_pairs, rng);
    worst_ratio = std::max(worst_ratio, rep.max_ratio);
  }
  contraction_ok = worst_ratio <= gamma;
  std::cout << "contraction(on-policy): max ratio " << worst_ratio
            << " <= gamma " << gamma << ": "
            << (contraction_ok ? "PASS" : "FAIL") << "\n";
  std::cout << "residual table: " << out_path << "\n";

  return identity_ok && contraction_ok ? 0 : 1;
}

int cmd_export(const std::string& run_dir, int smoothing) {
  poprl::export_run(run_dir, smoothing);
  std::cout << "exported aggregates to " << run_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Population-assisted off-policy RL training harness"};
  app.require_subcommand(1);

  std::string config_path;
  long seed = 0;
  std::string seeds_text;
  auto* train = app.add_subcommand("train", "Run training for one or more seeds");
  train->add_option("--config", config_path, "Run configuration JSON file")
      ->required();
  train->add_option("--seed", seed, "Single seed to run");
  train->add_option("--seeds", seeds_text, "Inclusive seed range a..b");

  int instances = 100;
  long prop_seed = 0;
  std::string prop_out = "prop_residuals.csv";
  int contraction_pairs = 100;
  auto* verify = app.add_subcommand(
      "verify-prop", "Numerically verify the mixed-data gradient identity");
  verify->add_option("--instances", instances, "Random instances to check");
  verify->add_option("--seed", prop_seed, "RNG seed");
  verify->add_option("--out", prop_out, "Residual table output path");
  verify->add_option("--contraction-pairs", contraction_pairs,
                     "Q pairs per contraction check");

  std::string run_dir;
  int smoothing = 5;
  auto* exp = app.add_subcommand("export", "Aggregate a run directory to CSVs");
  exp->add_option("--run-dir", run_dir, "Directory holding seed_<n> subdirs")
      ->required();
  exp->add_option("--smoothing", smoothing, "Centered smoothing window");

  try {
    app.parse(argc, argv);
    if (train->parsed()) return cmd_train(config_path, seed, seeds_text);
    if (verify->parsed())
      return cmd_verify_prop(instances, prop_seed, prop_out,
                             contraction_pairs);
    if (exp->parsed()) return cmd_export(run_dir, smoothing);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const poprl::Error& e) {
    std::cerr << "error category=" << poprl::category_name(e.category())
              << ": " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error category=internal: " << e.what() << "\n";
    return 9;
  }
  return 0;
}
