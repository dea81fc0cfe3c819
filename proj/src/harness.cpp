#include "pgattack/harness.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "json.hpp"
#include "pgattack/error.hpp"

namespace pgattack {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string csv_header() {
  return "image_id,seed,success,queries,one_minus_ssim,ciede2000,l0,l1,l2,lambda_used";
}

std::string csv_row(const RunRecord& r) {
  std::string out;
  out += r.image_id;
  out += ',';
  out += std::to_string(r.seed);
  out += ',';
  out += r.success ? '1' : '0';
  out += ',';
  out += std::to_string(r.queries);
  out += ',';
  out += format_double(r.one_minus_ssim);
  out += ',';
  out += format_double(r.ciede2000);
  out += ',';
  out += format_double(r.l0);
  out += ',';
  out += format_double(r.l1);
  out += ',';
  out += format_double(r.l2);
  out += ',';
  out += format_double(r.lambda_used);
  return out;
}

SummaryStats summarize(const std::vector<RunRecord>& records) {
  if (records.empty()) throw Error(Errc::bad_argument, "nothing to summarize");
  SummaryStats s;
  s.runs = static_cast<long>(records.size());
  double query_sum = 0.0;
  double sums[5] = {0, 0, 0, 0, 0};
  long counts[5] = {0, 0, 0, 0, 0};
  for (const RunRecord& r : records) {
    s.successes += r.success ? 1 : 0;
    s.errors += r.error ? 1 : 0;
    query_sum += static_cast<double>(r.queries);
    s.total_wall_time_s += r.wall_time_s;
    if (r.success) {
      const double vals[5] = {r.one_minus_ssim, r.ciede2000, r.l0, r.l1, r.l2};
      for (int i = 0; i < 5; ++i)
        if (!std::isnan(vals[i])) {
          sums[i] += vals[i];
          ++counts[i];
        }
    }
  }
  s.success_rate = static_cast<double>(s.successes) / static_cast<double>(s.runs);
  s.avg_queries = query_sum / static_cast<double>(s.runs);
  double* means[5] = {&s.mean_one_minus_ssim, &s.mean_ciede2000, &s.mean_l0, &s.mean_l1,
                      &s.mean_l2};
  for (int i = 0; i < 5; ++i)
    if (counts[i] > 0) *means[i] = sums[i] / static_cast<double>(counts[i]);
  return s;
}

namespace {

std::string image_id_from_path(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

std::unique_ptr<Oracle> make_oracle(const ExperimentConfig& cfg) {
  bool have_model = !cfg.model_path.empty();
  bool have_cmd = !cfg.oracle_command.empty();
  if (have_model == have_cmd)
    throw Error(Errc::bad_argument, "exactly one of model path and oracle command is needed");
  if (have_model) return std::make_unique<BuiltinOracle>(load_weights(cfg.model_path));
  return std::make_unique<ExternalOracle>(cfg.oracle_command);
}

RunRecord error_record(const std::string& image_id, std::uint64_t seed, const std::string& why) {
  RunRecord rec;
  rec.image_id = image_id;
  rec.seed = seed;
  rec.error = true;
  rec.error_reason = why;
  return rec;
}

}  // namespace

BatchOutput run_batch(const ExperimentConfig& config) {
  if (config.image_paths.empty()) throw Error(Errc::bad_argument, "no input images");
  if (config.seeds.empty()) throw Error(Errc::bad_argument, "no seeds");

  std::unique_ptr<Oracle> oracle = make_oracle(config);

  bool have_bbox = !config.mask_path.empty();
  BoundingBox bbox;
  if (have_bbox) bbox = load_bbox_json(config.mask_path);

  BatchOutput out;
  for (const std::string& path : config.image_paths) {
    std::string id = image_id_from_path(path);

    ImageTensor x;
    bool loaded = false;
    std::string load_error;
    try {
      x = load_png(path);
      loaded = true;
    } catch (const Error& e) {
      load_error = e.what();
    }

    for (std::uint64_t seed : config.seeds) {
      if (!loaded) {
        std::cerr << "error: " << path << ": " << load_error << "\n";
        out.records.push_back(error_record(id, seed, load_error));
        continue;
      }
      AttackConfig attack = config.attack;
      attack.seed = seed;
      try {
        if (have_bbox) attack.mask = mask_from_bbox(bbox, x.height, x.width);
        auto t0 = std::chrono::steady_clock::now();
        AttackResult res = run_attack(attack, x, *oracle);
        auto t1 = std::chrono::steady_clock::now();

        RunRecord rec;
        rec.image_id = id;
        rec.seed = seed;
        rec.success = res.success;
        rec.queries = res.queries_used;
        rec.one_minus_ssim = res.one_minus_ssim;
        rec.ciede2000 = res.ciede2000;
        rec.l0 = res.l0;
        rec.l1 = res.l1;
        rec.l2 = res.l2;
        rec.lambda_used = res.lambda_used;
        rec.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
        rec.trace = res.trace;
        out.records.push_back(std::move(rec));

        if (res.success && !config.adv_dir.empty()) {
          std::filesystem::create_directories(config.adv_dir);
          save_png(res.adversarial, config.adv_dir + "/" + id + "_s" + std::to_string(seed) +
                                        ".png");
        }
      } catch (const Error& e) {
        std::cerr << "error: " << path << " (seed " << seed << "): " << e.what() << "\n";
        out.records.push_back(error_record(id, seed, e.what()));
      }
    }
  }

  out.stats = summarize(out.records);
  return out;
}

void emit_outputs(const BatchOutput& out, const ExperimentConfig& config) {
  if (!config.out_csv.empty()) {
    std::ofstream csv(config.out_csv);
    if (!csv) throw Error(Errc::io_write, "cannot write " + config.out_csv);
    csv << csv_header() << "\n";
    for (const RunRecord& r : out.records) csv << csv_row(r) << "\n";
    if (!csv) throw Error(Errc::io_write, "write failed: " + config.out_csv);
  }

  if (!config.out_json.empty()) {
    auto put_or_null = [](nlohmann::json& obj, const char* key, double v) {
      if (std::isnan(v))
        obj[key] = nullptr;
      else
        obj[key] = v;
    };

    nlohmann::json summary;
    const SummaryStats& s = out.stats;
    summary["runs"] = s.runs;
    summary["successes"] = s.successes;
    summary["errors"] = s.errors;
    summary["success_rate"] = s.success_rate;
    summary["avg_queries"] = s.avg_queries;
    put_or_null(summary, "mean_one_minus_ssim", s.mean_one_minus_ssim);
    put_or_null(summary, "mean_ciede2000", s.mean_ciede2000);
    put_or_null(summary, "mean_l0", s.mean_l0);
    put_or_null(summary, "mean_l1", s.mean_l1);
    put_or_null(summary, "mean_l2", s.mean_l2);
    summary["total_wall_time_s"] = s.total_wall_time_s;

    nlohmann::json runs = nlohmann::json::array();
    for (const RunRecord& r : out.records) {
      nlohmann::json row;
      row["image_id"] = r.image_id;
      row["seed"] = r.seed;
      row["success"] = r.success;
      row["error"] = r.error;
      if (r.error) row["error_reason"] = r.error_reason;
      row["queries"] = r.queries;
      put_or_null(row, "one_minus_ssim", r.one_minus_ssim);
      put_or_null(row, "ciede2000", r.ciede2000);
      put_or_null(row, "l0", r.l0);
      put_or_null(row, "l1", r.l1);
      put_or_null(row, "l2", r.l2);
      put_or_null(row, "lambda_used", r.lambda_used);
      row["wall_time_s"] = r.wall_time_s;  // clock-dependent, so json only
      runs.push_back(std::move(row));
    }

    nlohmann::json j;
    j["summary"] = std::move(summary);
    j["runs"] = std::move(runs);
    std::ofstream js(config.out_json);
    if (!js) throw Error(Errc::io_write, "cannot write " + config.out_json);
    js << j.dump(2) << "\n";
    if (!js) throw Error(Errc::io_write, "write failed: " + config.out_json);
  }

  if (!config.trace_dir.empty()) {
    std::filesystem::create_directories(config.trace_dir);
    for (const RunRecord& r : out.records) {
      if (r.error) continue;
      std::ofstream tf(config.trace_dir + "/" + r.image_id + "_s" + std::to_string(r.seed) +
                       ".txt");
      for (double v : r.trace) tf << format_double(v) << "\n";
    }
  }
}

}  // namespace pgattack
