#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "poprl/common.hpp"

namespace poprl {

/// One iteration's worth of logged quantities. Population fields stay empty
/// for runs without a population.
struct IterationRow {
  long iteration = 0;
  long training_steps = 0;
  std::optional<double> target_eval_return;
  std::optional<double> pop_mean_eval_return;
  std::optional<double> mean_pop_fitness;
  std::optional<double> f_target;
  std::optional<double> mean_action_discrepancy;
  double critic_loss = 0.0;
  double actor_objective = 0.0;
  long batch_target_count = 0;
  long batch_pop_count = 0;
  std::vector<double> fitness_list;    // per-individual fitness
  std::vector<double> discrepancies;   // per-individual action discrepancy
};

struct RunRecord {
  int population = 0;  // 0 when the run has no population
  std::vector<IterationRow> rows;
};

/// Streams rows to a CSV file as they are produced; one header line, '.'
/// decimal separator, round-trip double formatting.
class RecordWriter {
 public:
  RecordWriter(const std::filesystem::path& path, int population);
  void append(const IterationRow& row);

 private:
  std::filesystem::path path_;
  int population_;
};

std::string record_csv_header(int population);
void write_record_csv(const std::filesystem::path& path,
                      const RunRecord& record);
RunRecord read_record_csv(const std::filesystem::path& path);

struct AggregateCurve {
  std::vector<double> steps;     // common training-step grid
  Mat per_seed;                  // one column per seed, aligned to the grid
  Vec mean;
  Vec ci_low;
  Vec ci_high;
  bool has_ci = false;           // false when only one seed was given
  int smoothing_window = 1;
};

/// Align per-seed series of `field` on the first seed's training-step grid
/// (nearest-step matching), compute the mean and two-sided 68% t-interval,
/// then smooth with a centered moving average.
AggregateCurve aggregate(const std::vector<RunRecord>& records,
                         const std::string& field, int smoothing_window = 5);

/// Fields that aggregate/export understand.
std::vector<std::string> aggregate_fields();

struct FinalPerformance {
  double mean = 0.0;
  double ci_half_width = 0.0;
  bool has_ci = false;
  std::vector<double> per_seed;  // max of each seed's last `window` values
};

/// Per seed, the maximum over the last `window` occurrences of `field`; then
/// the cross-seed mean with a 68% t-interval. With fewer than `window`
/// occurrences, `allow_fewer` uses all available instead of failing.
FinalPerformance final_performance(const std::vector<RunRecord>& records,
                                   const std::string& field, int window = 100,
                                   bool allow_fewer = false);

struct FitnessHistogram {
  long training_steps = 0;  // steps of the snapshotted iteration
  std::vector<double> edges;
  std::vector<long> counts;
};

/// Histogram of the per-individual fitnesses at the iteration nearest to
/// `at_steps`.
FitnessHistogram fitness_snapshot(const RunRecord& record, long at_steps,
                                  int bins = 20);

void write_aggregate_csv(const std::filesystem::path& path,
                         const AggregateCurve& curve,
                         const std::vector<long>& seeds);
AggregateCurve read_aggregate_csv(const std::filesystem::path& path);

/// Reads every seed_<n>/record.csv under `run_dir`, writes one aggregate CSV
/// per available field plus a manifest with the config hash and seed list.
/// Re-export over the same inputs is byte-identical.
void export_run(const std::filesystem::path& run_dir, int smoothing_window = 5);

/// FNV-1a hash of a file's bytes, as used for the manifest config hash.
std::uint64_t file_hash(const std::filesystem::path& path);

/// Round-trip decimal formatting used for all exported numbers.
std::string format_double(double v);

}  // namespace poprl
