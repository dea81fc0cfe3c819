#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pgattack/error.hpp"
#include "pgattack/harness.hpp"

namespace {

// --lambda takes a number or the word "dynamic"
void parse_lambda(const std::string& text, pgattack::AttackConfig& attack) {
  if (text == "dynamic") {
    attack.lambda_dynamic = true;
    return;
  }
  try {
    std::size_t pos = 0;
    attack.lambda = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw CLI::ValidationError("--lambda", "expects a number or \"dynamic\"");
  }
  if (attack.lambda < 0.0) throw CLI::ValidationError("--lambda", "must be >= 0");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"black-box noise-distribution attack on an image classifier"};

  pgattack::ExperimentConfig cfg;
  std::vector<std::string> images;
  std::string image_dir;
  std::string lambda_text = "10";
  std::string metric_name = "ssim";
  std::string schedule_name = "constant";
  std::string grad_name = "full";

  app.add_option("--model", cfg.model_path, "weights json for the built-in classifier");
  app.add_option("--oracle-cmd", cfg.oracle_command,
                 "shell command for an external classifier process");
  app.add_option("--image", images, "input png (repeatable)");
  app.add_option("--image-dir", image_dir, "directory of input pngs (sorted by name)");
  app.add_option("--mask", cfg.mask_path, "bounding-box json; pixels inside the box are off-limits");
  app.add_option("--eps", cfg.attack.eps, "max per-pixel noise magnitude")->capture_default_str();
  app.add_option("--n-freq", cfg.attack.n_freq, "noise granularity: 2n+1 values per tile")
      ->capture_default_str();
  app.add_option("--q", cfg.attack.q, "fraction of the grid redrawn per step")
      ->capture_default_str();
  app.add_option("--lambda", lambda_text, "distortion weight, or \"dynamic\"")
      ->capture_default_str();
  app.add_option("--metric", metric_name, "distortion metric: ssim|ciede2000|l0|l1|l2")
      ->capture_default_str();
  app.add_option("--lr", cfg.attack.lr, "update step size")->capture_default_str();
  app.add_option("--lr-schedule", schedule_name, "constant|decaying")->capture_default_str();
  app.add_option("--tile", cfg.attack.tile_size, "pixels per noise tile side")
      ->capture_default_str();
  app.add_option("--max-queries", cfg.attack.max_queries, "oracle query budget per run")
      ->capture_default_str();
  app.add_option("--seed", cfg.seeds, "rng seed (repeatable: one run per seed per image)");
  app.add_option("--grad-mode", grad_name, "update style: full|sampled")->capture_default_str();
  app.add_option("--out-csv", cfg.out_csv, "per-run results table");
  app.add_option("--out-json", cfg.out_json, "aggregate summary");
  app.add_option("--adv-dir", cfg.adv_dir, "directory for successful adversarial pngs");
  app.add_option("--trace-dir", cfg.trace_dir, "directory for per-run loss traces");

  CLI11_PARSE(app, argc, argv);

  try {
    parse_lambda(lambda_text, cfg.attack);
    cfg.attack.metric = pgattack::metric_from_name(metric_name);

    if (schedule_name == "constant")
      cfg.attack.lr_schedule = pgattack::LrSchedule::constant;
    else if (schedule_name == "decaying")
      cfg.attack.lr_schedule = pgattack::LrSchedule::decaying;
    else
      throw pgattack::Error(pgattack::Errc::bad_argument,
                            "--lr-schedule expects constant or decaying");

    if (grad_name == "full")
      cfg.attack.grad_mode = pgattack::GradMode::full_categorical;
    else if (grad_name == "sampled")
      cfg.attack.grad_mode = pgattack::GradMode::sampled_only;
    else
      throw pgattack::Error(pgattack::Errc::bad_argument, "--grad-mode expects full or sampled");

    cfg.image_paths = images;
    if (!image_dir.empty()) {
      std::vector<std::string> found;
      for (const auto& entry : std::filesystem::directory_iterator(image_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".png")
          found.push_back(entry.path().string());
      std::sort(found.begin(), found.end());
      cfg.image_paths.insert(cfg.image_paths.end(), found.begin(), found.end());
    }
    if (cfg.image_paths.empty())
      throw pgattack::Error(pgattack::Errc::bad_argument, "no input images given");
    if (cfg.seeds.empty()) cfg.seeds = {0};

    pgattack::BatchOutput out = pgattack::run_batch(cfg);
    pgattack::emit_outputs(out, cfg);

    const pgattack::SummaryStats& s = out.stats;
    std::cout << "runs " << s.runs << "  successes " << s.successes << "  errors " << s.errors
              << "  success_rate " << s.success_rate << "  avg_queries " << s.avg_queries << "\n";
    return s.errors == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
