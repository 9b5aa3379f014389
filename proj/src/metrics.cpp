#include "poprl/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include "poprl/error.hpp"

namespace poprl {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::string opt_field(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str())
    fail(ErrorCategory::Io, "bad numeric CSV cell: '" + s + "'");
  return v;
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_double(s);
}

// 0.84 upper quantile of Student's t: two-sided 68% interval.
double t_quantile_68(int dof) {
  boost::math::students_t_distribution<double> dist(dof);
  return boost::math::quantile(dist, 0.84);
}

std::string row_to_csv(const IterationRow& r, int population) {
  std::string line;
  line += std::to_string(r.iteration);
  line += ',' + std::to_string(r.training_steps);
  line += ',' + opt_field(r.target_eval_return);
  line += ',' + opt_field(r.pop_mean_eval_return);
  line += ',' + opt_field(r.mean_pop_fitness);
  line += ',' + opt_field(r.f_target);
  line += ',' + opt_field(r.mean_action_discrepancy);
  line += ',' + format_double(r.critic_loss);
  line += ',' + format_double(r.actor_objective);
  line += ',' + std::to_string(r.batch_target_count);
  line += ',' + std::to_string(r.batch_pop_count);
  for (int i = 0; i < population; ++i)
    line += ',' + (i < static_cast<int>(r.fitness_list.size())
                       ? format_double(r.fitness_list[static_cast<size_t>(i)])
                       : std::string());
  for (int i = 0; i < population; ++i)
    line += ',' + (i < static_cast<int>(r.discrepancies.size())
                       ? format_double(r.discrepancies[static_cast<size_t>(i)])
                       : std::string());
  return line;
}

}  // namespace

std::string record_csv_header(int population) {
  std::string h =
      "iteration,training_steps,target_eval_return,pop_mean_eval_return,"
      "mean_pop_fitness,f_target,mean_action_discrepancy,critic_loss,"
      "actor_objective,batch_target_count,batch_pop_count";
  for (int i = 0; i < population; ++i) h += ",fit_" + std::to_string(i);
  for (int i = 0; i < population; ++i) h += ",disc_" + std::to_string(i);
  return h;
}

RecordWriter::RecordWriter(const std::filesystem::path& path, int population)
    : path_(path), population_(population) {
  std::ofstream out(path_);
  if (!out) fail(ErrorCategory::Io, "cannot open " + path_.string());
  out << record_csv_header(population_) << '\n';
}

void RecordWriter::append(const IterationRow& row) {
  std::ofstream out(path_, std::ios::app);
  if (!out) fail(ErrorCategory::Io, "cannot open " + path_.string());
  out << row_to_csv(row, population_) << '\n';
}

void write_record_csv(const std::filesystem::path& path,
                      const RunRecord& record) {
  std::ofstream out(path);
  if (!out) fail(ErrorCategory::Io, "cannot open " + path.string());
  out << record_csv_header(record.population) << '\n';
  for (const IterationRow& r : record.rows)
    out << row_to_csv(r, record.population) << '\n';
}

RunRecord read_record_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::Io, "cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line))
    fail(ErrorCategory::Io, "empty record file: " + path.string());
  const auto header = split_csv_line(line);
  int population = 0;
  for (const std::string& col : header)
    if (col.rfind("fit_", 0) == 0) ++population;
  if (header.size() != 11 + 2 * static_cast<size_t>(population))
    fail(ErrorCategory::Io, "unrecognized record header in " + path.string());

  RunRecord record;
  record.population = population;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      fail(ErrorCategory::Io, "ragged CSV row in " + path.string());
    IterationRow r;
    r.iteration = std::stol(cells[0]);
    r.training_steps = std::stol(cells[1]);
    r.target_eval_return = parse_opt(cells[2]);
    r.pop_mean_eval_return = parse_opt(cells[3]);
    r.mean_pop_fitness = parse_opt(cells[4]);
    r.f_target = parse_opt(cells[5]);
    r.mean_action_discrepancy = parse_opt(cells[6]);
    r.critic_loss = parse_double(cells[7]);
    r.actor_objective = parse_double(cells[8]);
    r.batch_target_count = std::stol(cells[9]);
    r.batch_pop_count = std::stol(cells[10]);
    for (int i = 0; i < population; ++i) {
      const std::string& cell = cells[11 + static_cast<size_t>(i)];
      if (!cell.empty()) r.fitness_list.push_back(parse_double(cell));
    }
    for (int i = 0; i < population; ++i) {
      const std::string& cell =
          cells[11 + static_cast<size_t>(population + i)];
      if (!cell.empty()) r.discrepancies.push_back(parse_double(cell));
    }
    record.rows.push_back(std::move(r));
  }
  return record;
}

namespace {

std::optional<double> extract_field(const IterationRow& r,
                                    const std::string& field) {
  if (field == "target_eval_return") return r.target_eval_return;
  if (field == "pop_mean_eval_return") return r.pop_mean_eval_return;
  if (field == "mean_pop_fitness") return r.mean_pop_fitness;
  if (field == "f_target") return r.f_target;
  if (field == "mean_action_discrepancy") return r.mean_action_discrepancy;
  if (field == "critic_loss") return r.critic_loss;
  if (field == "actor_objective") return r.actor_objective;
  fail(ErrorCategory::Domain, "unknown aggregate field: " + field);
}

struct Series {
  std::vector<double> steps;
  std::vector<double> values;
};

Series field_series(const RunRecord& record, const std::string& field) {
  Series s;
  for (const IterationRow& r : record.rows) {
    const auto v = extract_field(r, field);
    if (v) {
      s.steps.push_back(static_cast<double>(r.training_steps));
      s.values.push_back(*v);
    }
  }
  return s;
}

double nearest_value(const Series& s, double step) {
  // steps are nondecreasing; binary search for the closest one
  const auto it = std::lower_bound(s.steps.begin(), s.steps.end(), step);
  if (it == s.steps.begin()) return s.values.front();
  if (it == s.steps.end()) return s.values.back();
  const auto hi = static_cast<size_t>(it - s.steps.begin());
  const auto lo = hi - 1;
  return (step - s.steps[lo] <= s.steps[hi] - step) ? s.values[lo]
                                                    : s.values[hi];
}

Vec smooth_centered(const Vec& x, int window) {
  if (window <= 1) return x;
  const int n = static_cast<int>(x.size());
  const int left = (window - 1) / 2;
  const int right = window / 2;
  Vec out(n);
  for (int i = 0; i < n; ++i) {
    const int a = std::max(0, i - left);
    const int b = std::min(n - 1, i + right);
    out[i] = x.segment(a, b - a + 1).mean();
  }
  return out;
}

}  // namespace

std::vector<std::string> aggregate_fields() {
  return {"target_eval_return", "pop_mean_eval_return",
          "mean_pop_fitness",   "f_target",
          "mean_action_discrepancy", "critic_loss", "actor_objective"};
}

AggregateCurve aggregate(const std::vector<RunRecord>& records,
                         const std::string& field, int smoothing_window) {
  if (records.empty())
    fail(ErrorCategory::Domain, "aggregate needs at least one record");
  if (smoothing_window < 1)
    fail(ErrorCategory::Config, "smoothing window must be >= 1");

  std::vector<Series> series;
  series.reserve(records.size());
  for (const RunRecord& r : records) series.push_back(field_series(r, field));
  if (series.front().steps.empty())
    fail(ErrorCategory::Domain, "field '" + field + "' has no data");

  const int n_seeds = static_cast<int>(records.size());
  const auto& grid = series.front().steps;
  const int n = static_cast<int>(grid.size());

  AggregateCurve curve;
  curve.steps = grid;
  curve.smoothing_window = smoothing_window;
  curve.per_seed.resize(n, n_seeds);
  for (int s = 0; s < n_seeds; ++s) {
    const Series& ser = series[static_cast<size_t>(s)];
    if (ser.steps.empty())
      fail(ErrorCategory::Domain, "a seed has no data for field " + field);
    for (int i = 0; i < n; ++i)
      curve.per_seed(i, s) = nearest_value(ser, grid[static_cast<size_t>(i)]);
  }

  curve.mean = curve.per_seed.rowwise().mean();
  if (n_seeds >= 2) {
    curve.has_ci = true;
    const double t = t_quantile_68(n_seeds - 1);
    Vec half(n);
    for (int i = 0; i < n; ++i) {
      const double m = curve.mean[i];
      double ss = 0.0;
      for (int s = 0; s < n_seeds; ++s)
        ss += (curve.per_seed(i, s) - m) * (curve.per_seed(i, s) - m);
      const double sd = std::sqrt(ss / (n_seeds - 1));
      half[i] = t * sd / std::sqrt(static_cast<double>(n_seeds));
    }
    curve.ci_low = curve.mean - half;
    curve.ci_high = curve.mean + half;
  } else {
    curve.ci_low = curve.mean;
    curve.ci_high = curve.mean;
  }

  curve.mean = smooth_centered(curve.mean, smoothing_window);
  curve.ci_low = smooth_centered(curve.ci_low, smoothing_window);
  curve.ci_high = smooth_centered(curve.ci_high, smoothing_window);
  return curve;
}

FinalPerformance final_performance(const std::vector<RunRecord>& records,
                                   const std::string& field, int window,
                                   bool allow_fewer) {
  if (records.empty())
    fail(ErrorCategory::Domain, "final_performance needs records");
  if (window < 1) fail(ErrorCategory::Config, "window must be >= 1");

  FinalPerformance fp;
  for (const RunRecord& r : records) {
    const Series s = field_series(r, field);
    if (s.values.empty())
      fail(ErrorCategory::Domain, "no '" + field + "' data in a record");
    if (static_cast<int>(s.values.size()) < window && !allow_fewer)
      fail(ErrorCategory::Domain,
           "fewer than " + std::to_string(window) + " evaluations recorded");
    const int take = std::min<int>(window, static_cast<int>(s.values.size()));
    double best = s.values[s.values.size() - static_cast<size_t>(take)];
    for (size_t i = s.values.size() - static_cast<size_t>(take);
         i < s.values.size(); ++i)
      best = std::max(best, s.values[i]);
    fp.per_seed.push_back(best);
  }

  const int n = static_cast<int>(fp.per_seed.size());
  double sum = 0.0;
  for (double v : fp.per_seed) sum += v;
  fp.mean = sum / n;
  if (n >= 2) {
    double ss = 0.0;
    for (double v : fp.per_seed) ss += (v - fp.mean) * (v - fp.mean);
    const double sd = std::sqrt(ss / (n - 1));
    fp.ci_half_width = t_quantile_68(n - 1) * sd / std::sqrt(double(n));
    fp.has_ci = true;
  }
  return fp;
}

FitnessHistogram fitness_snapshot(const RunRecord& record, long at_steps,
                                  int bins) {
  if (bins < 1) fail(ErrorCategory::Config, "bins must be >= 1");
  const IterationRow* nearest = nullptr;
  long best_gap = 0;
  for (const IterationRow& r : record.rows) {
    if (r.fitness_list.empty()) continue;
    const long gap = std::labs(r.training_steps - at_steps);
    if (!nearest || gap < best_gap) {
      nearest = &r;
      best_gap = gap;
    }
  }
  if (!nearest)
    fail(ErrorCategory::Domain, "record holds no population fitness data");

  const auto& fits = nearest->fitness_list;
  double lo = *std::min_element(fits.begin(), fits.end());
  double hi = *std::max_element(fits.begin(), fits.end());
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }

  FitnessHistogram hist;
  hist.training_steps = nearest->training_steps;
  hist.counts.assign(static_cast<size_t>(bins), 0);
  hist.edges.resize(static_cast<size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i)
    hist.edges[static_cast<size_t>(i)] = lo + (hi - lo) * i / bins;
  for (double f : fits) {
    int b = static_cast<int>((f - lo) / (hi - lo) * bins);
    b = std::clamp(b, 0, bins - 1);
    hist.counts[static_cast<size_t>(b)] += 1;
  }
  return hist;
}

void write_aggregate_csv(const std::filesystem::path& path,
                         const AggregateCurve& curve,
                         const std::vector<long>& seeds) {
  std::ofstream out(path);
  if (!out) fail(ErrorCategory::Io, "cannot open " + path.string());
  out << "training_steps,mean,ci_low,ci_high";
  for (long s : seeds) out << ",seed_" << s;
  out << '\n';
  for (size_t i = 0; i < curve.steps.size(); ++i) {
    out << format_double(curve.steps[i]) << ','
        << format_double(curve.mean[static_cast<Eigen::Index>(i)]) << ','
        << format_double(curve.ci_low[static_cast<Eigen::Index>(i)]) << ','
        << format_double(curve.ci_high[static_cast<Eigen::Index>(i)]);
    for (int s = 0; s < curve.per_seed.cols(); ++s)
      out << ',' << format_double(curve.per_seed(static_cast<Eigen::Index>(i), s));
    out << '\n';
  }
}

AggregateCurve read_aggregate_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line))
    fail(ErrorCategory::Io, "empty aggregate file: " + path.string());
  const auto header = split_csv_line(line);
  if (header.size() < 4)
    fail(ErrorCategory::Io, "bad aggregate header in " + path.string());
  const int n_seeds = static_cast<int>(header.size()) - 4;

  std::vector<std::array<double, 4>> core;
  std::vector<std::vector<double>> seeds;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      fail(ErrorCategory::Io, "ragged aggregate row in " + path.string());
    core.push_back({parse_double(cells[0]), parse_double(cells[1]),
                    parse_double(cells[2]), parse_double(cells[3])});
    std::vector<double> row(static_cast<size_t>(n_seeds));
    for (int s = 0; s < n_seeds; ++s)
      row[static_cast<size_t>(s)] = parse_double(cells[4 + static_cast<size_t>(s)]);
    seeds.push_back(std::move(row));
  }

  AggregateCurve curve;
  const int n = static_cast<int>(core.size());
  curve.steps.resize(static_cast<size_t>(n));
  curve.mean.resize(n);
  curve.ci_low.resize(n);
  curve.ci_high.resize(n);
  curve.per_seed.resize(n, n_seeds);
  for (int i = 0; i < n; ++i) {
    curve.steps[static_cast<size_t>(i)] = core[static_cast<size_t>(i)][0];
    curve.mean[i] = core[static_cast<size_t>(i)][1];
    curve.ci_low[i] = core[static_cast<size_t>(i)][2];
    curve.ci_high[i] = core[static_cast<size_t>(i)][3];
    for (int s = 0; s < n_seeds; ++s)
      curve.per_seed(i, s) = seeds[static_cast<size_t>(i)][static_cast<size_t>(s)];
  }
  curve.has_ci = n_seeds >= 2;
  return curve;
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::Io, "cannot open " + path.string());
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

void export_run(const std::filesystem::path& run_dir, int smoothing_window) {
  if (!std::filesystem::is_directory(run_dir))
    fail(ErrorCategory::Io, "not a run directory: " + run_dir.string());

  // Seed subdirectories, ordered by seed for deterministic output.
  std::map<long, std::filesystem::path> seed_dirs;
  for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name.rfind("seed_", 0) != 0) continue;
    seed_dirs[std::stol(name.substr(5))] = entry.path();
  }
  if (seed_dirs.empty())
    fail(ErrorCategory::Io, "no seed_<n> directories in " + run_dir.string());

  std::vector<long> seeds;
  std::vector<RunRecord> records;
  for (const auto& [seed, dir] : seed_dirs) {
    seeds.push_back(seed);
    records.push_back(read_record_csv(dir / "record.csv"));
  }

  for (const std::string& field : aggregate_fields()) {
    bool available = true;
    for (const RunRecord& r : records)
      if (field_series(r, field).steps.empty()) available = false;
    if (!available) continue;
    const AggregateCurve curve = aggregate(records, field, smoothing_window);
    write_aggregate_csv(run_dir / ("aggregate_" + field + ".csv"), curve,
                        seeds);
  }

  nlohmann::json manifest;
  manifest["seeds"] = seeds;
  const auto config_path = seed_dirs.begin()->second / "config.json";
  manifest["config_hash"] =
      std::filesystem::exists(config_path) ? file_hash(config_path) : 0;
  manifest["record_format"] = 1;
  manifest["smoothing_window"] = smoothing_window;
  std::ofstream out(run_dir / "manifest.json");
  if (!out) fail(ErrorCategory::Io, "cannot write manifest");
  out << manifest.dump(2) << '\n';
}

}  // namespace poprl
