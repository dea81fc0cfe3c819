#ifndef PGATTACK_HARNESS_HPP
#define PGATTACK_HARNESS_HPP

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "pgattack/engine.hpp"

namespace pgattack {

struct ExperimentConfig {
  std::vector<std::string> image_paths;
  std::string model_path;      // builtin oracle from a weights file...
  std::string oracle_command;  // ...or an external process (exactly one of the two)
  std::string mask_path;       // optional bounding-box json applied to every image
  AttackConfig attack;
  std::vector<std::uint64_t> seeds = {0};  // one run per (image, seed)
  std::string out_csv;
  std::string out_json;
  std::string adv_dir;    // successful adversarial pngs land here when set
  std::string trace_dir;  // per-run loss traces land here when set
};

struct RunRecord {
  std::string image_id;
  std::uint64_t seed = 0;
  bool success = false;
  bool error = false;  // run never happened (unreadable input, oracle died, ...)
  std::string error_reason;
  long queries = 0;
  double one_minus_ssim = std::numeric_limits<double>::quiet_NaN();
  double ciede2000 = std::numeric_limits<double>::quiet_NaN();
  double l0 = std::numeric_limits<double>::quiet_NaN();
  double l1 = std::numeric_limits<double>::quiet_NaN();
  double l2 = std::numeric_limits<double>::quiet_NaN();
  double lambda_used = std::numeric_limits<double>::quiet_NaN();
  double wall_time_s = 0.0;  // reported in the json summary only: csv bytes
                             // must not depend on the clock
  std::vector<double> trace;
};

struct SummaryStats {
  long runs = 0;
  long successes = 0;
  long errors = 0;
  double success_rate = 0.0;  // successes / runs
  double avg_queries = 0.0;   // mean over all runs
  // means over successful runs only; nan marks "no successes" and per-metric
  // entries skip runs where the metric was not computable
  double mean_one_minus_ssim = std::numeric_limits<double>::quiet_NaN();
  double mean_ciede2000 = std::numeric_limits<double>::quiet_NaN();
  double mean_l0 = std::numeric_limits<double>::quiet_NaN();
  double mean_l1 = std::numeric_limits<double>::quiet_NaN();
  double mean_l2 = std::numeric_limits<double>::quiet_NaN();
  double total_wall_time_s = 0.0;
};

struct BatchOutput {
  std::vector<RunRecord> records;
  SummaryStats stats;
};

// run every (image, seed) pair in order; a failed image becomes an error row
// and the batch keeps going
BatchOutput run_batch(const ExperimentConfig& config);

SummaryStats summarize(const std::vector<RunRecord>& records);

// write whatever outputs the config asks for (csv, json, pngs, traces)
void emit_outputs(const BatchOutput& out, const ExperimentConfig& config);

// csv layout is fixed and clock-free so identical runs give identical bytes
std::string csv_header();
std::string csv_row(const RunRecord& r);

// shortest round-trip decimal for a double; "nan" for not-computable
std::string format_double(double v);

}  // namespace pgattack

#endif
