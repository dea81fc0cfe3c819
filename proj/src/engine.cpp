#include "pgattack/engine.hpp"

#include <cmath>
#include <utility>

#include "pgattack/error.hpp"

namespace pgattack {

double margin_loss(const LogitVector& logits, int y) {
  if (logits.size() < 2) throw Error(Errc::bad_argument, "margin needs at least two classes");
  if (y < 0 || y >= static_cast<int>(logits.size()))
    throw Error(Errc::bad_argument, "class index outside the logit vector");
  double best_other = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < static_cast<int>(logits.size()); ++k)
    if (k != y) best_other = std::max(best_other, logits[k]);
  double m = logits[y] - best_other;
  return m > 0.0 ? m : 0.0;
}

double total_loss(const LogitVector& logits, int y, const ImageTensor& x,
                  const ImageTensor& x_adv, double lambda, MetricKind metric, double eps,
                  const SsimParams& ssim) {
  double m = margin_loss(logits, y);
  if (lambda == 0.0) return m;  // metric must not run, let alone perturb the sum
  return m + lambda * metric_distance(metric, x, x_adv, eps, ssim);
}

bool is_success(Oracle& oracle, const ImageTensor& x_adv, int original_class,
                QueryCounter& counter) {
  LogitVector logits = oracle.predict_logits(x_adv, counter);
  return predicted_class(logits) != original_class;
}

double learning_rate_at(LrSchedule schedule, double base_lr, long t) {
  if (base_lr <= 0.0) throw Error(Errc::bad_argument, "learning rate must be positive");
  if (t < 1) throw Error(Errc::bad_argument, "step index starts at 1");
  if (schedule == LrSchedule::constant) return base_lr;
  double td = static_cast<double>(t);
  return base_lr / std::sqrt(td * std::log(td + 1.0));
}

namespace {

void validate_inputs(const AttackConfig& cfg, const ImageTensor& x) {
  x.validate();
  if (cfg.eps <= 0.0) throw Error(Errc::bad_argument, "eps must be positive");
  if (cfg.n_freq < 1 || cfg.n_freq > 12)
    throw Error(Errc::bad_argument, "n_freq must lie in [1,12]");
  if (!(cfg.q > 0.0 && cfg.q <= 1.0))
    throw Error(Errc::bad_argument, "resample fraction q must be in (0,1]");
  if (cfg.lr <= 0.0) throw Error(Errc::bad_argument, "learning rate must be positive");
  if (cfg.tile_size < 1) throw Error(Errc::bad_argument, "tile size must be >= 1");
  if (cfg.max_queries < 1) throw Error(Errc::bad_argument, "query budget must be >= 1");
  if (!cfg.lambda_dynamic && cfg.lambda < 0.0)
    throw Error(Errc::bad_argument, "lambda must be >= 0");
  if (cfg.mask) {
    if (cfg.mask->height != x.height || cfg.mask->width != x.width)
      throw Error(Errc::shape_mismatch, "mask does not match the image");
    if (!(cfg.mask->allowed_fraction() >= 0.10))
      throw Error(Errc::bad_argument,
                  "mask leaves less than 10% of pixels attackable; the search would be hopeless");
  }
}

struct StageOutcome {
  bool success = false;
  int y = -1;
  int final_class = -1;
  NoiseGrid final_grid;  // grid behind the returned image
  NoiseGrid best_grid;   // lowest-loss grid seen (warm-start material)
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<double> trace;
};

// one fixed-lambda search: evaluate the starting noise once, then iterate
// update-resample-query until a class flip, the stage cap, or the global
// budget stops it
StageOutcome attack_loop(const AttackConfig& cfg, const ImageTensor& x, Oracle& oracle,
                         QueryCounter& counter, long stage_cap, double lambda,
                         const NoiseGrid* warm, int known_y, Rng& rng) {
  const int th = (x.height + cfg.tile_size - 1) / cfg.tile_size;
  const int tw = (x.width + cfg.tile_size - 1) / cfg.tile_size;
  const SampleSpace space = build_sample_space(cfg.eps, cfg.n_freq);
  ThetaField theta = init_uniform_theta(th, tw, cfg.n_freq);
  const PixelMask* mask = cfg.mask ? &*cfg.mask : nullptr;

  StageOutcome out;
  long used_here = 0;

  NoiseGrid d0 = warm ? *warm : NoiseGrid(th, tw, space.zero_index());
  ImageTensor adv0 = apply_noise(x, expand_to_pixels(d0, space, cfg.tile_size, x.height,
                                                     x.width, mask));
  LogitVector logits0 = oracle.predict_logits(adv0, counter);
  ++used_here;
  out.y = known_y >= 0 ? known_y : predicted_class(logits0);
  double loss0 = total_loss(logits0, out.y, x, adv0, lambda, cfg.metric, cfg.eps, cfg.ssim);

  out.best_grid = d0;
  out.best_loss = loss0;
  out.final_grid = d0;
  out.final_class = out.y;

  // previous step's sample, the raw material of the next theta update
  NoiseGrid prev_grid = d0;
  TileRect prev_region{0, 0, th, tw};
  double prev_loss = loss0;

  for (long t = 1;; ++t) {
    if (counter.exhausted() || used_here >= stage_cap) break;

    double baseline = out.best_loss;  // min loss over everything sampled so far
    if (t >= 2) {
      // the t = 1 update would compare the start sample against itself
      // (advantage exactly 0), so it begins at the first real comparison
      double lr = learning_rate_at(cfg.lr_schedule, cfg.lr, t - 1);
      grad_step(theta, prev_grid, prev_region, prev_loss, baseline, lr, cfg.grad_mode);
    }

    ResampleOutcome drawn = resample_square(out.best_grid, cfg.q, theta, mask, cfg.tile_size, rng);
    ImageTensor adv = apply_noise(x, expand_to_pixels(drawn.grid, space, cfg.tile_size, x.height,
                                                      x.width, mask));
    LogitVector logits = oracle.predict_logits(adv, counter);
    ++used_here;
    double loss = total_loss(logits, out.y, x, adv, lambda, cfg.metric, cfg.eps, cfg.ssim);

    prev_grid = drawn.grid;
    prev_region = drawn.region;
    prev_loss = loss;
    if (loss < out.best_loss) {
      out.best_loss = loss;
      out.best_grid = drawn.grid;
    }
    out.trace.push_back(out.best_loss);

    int cls = predicted_class(logits);
    if (cls != out.y) {
      out.success = true;
      out.final_class = cls;
      out.final_grid = drawn.grid;
      return out;
    }
  }

  out.final_grid = out.best_grid;  // the least-bad attempt stands in for a win
  return out;
}

AttackResult assemble_result(const AttackConfig& cfg, const ImageTensor& x,
                             const StageOutcome& stage, double lambda_used, long queries_used) {
  const SampleSpace space = build_sample_space(cfg.eps, cfg.n_freq);
  const PixelMask* mask = cfg.mask ? &*cfg.mask : nullptr;

  AttackResult r;
  r.success = stage.success;
  r.queries_used = queries_used;
  r.original_class = stage.y;
  r.final_class = stage.final_class;
  r.lambda_used = lambda_used;
  r.delta = expand_to_pixels(stage.final_grid, space, cfg.tile_size, x.height, x.width, mask);
  r.adversarial = apply_noise(x, r.delta);
  r.trace = stage.trace;

  auto safely = [](auto&& fn) {
    try {
      return fn();
    } catch (const Error&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  r.one_minus_ssim = safely([&] { return one_minus_ssim(x, r.adversarial, cfg.ssim); });
  r.ciede2000 = safely([&] { return ciede2000_image(x, r.adversarial); });
  r.l0 = safely([&] { return lp_normalized(x, r.adversarial, 0, cfg.eps); });
  r.l1 = safely([&] { return lp_normalized(x, r.adversarial, 1, cfg.eps); });
  r.l2 = safely([&] { return lp_normalized(x, r.adversarial, 2, cfg.eps); });
  return r;
}

}  // namespace

AttackResult run_attack(const AttackConfig& config, const ImageTensor& x, Oracle& oracle) {
  validate_inputs(config, x);
  if (config.lambda_dynamic) return dynamic_lambda_search(config, x, oracle);

  QueryCounter counter{0, config.max_queries};
  Rng rng(config.seed);
  StageOutcome stage = attack_loop(config, x, oracle, counter, config.max_queries, config.lambda,
                                   nullptr, -1, rng);
  return assemble_result(config, x, stage, config.lambda, counter.used);
}

AttackResult dynamic_lambda_search(const AttackConfig& config, const ImageTensor& x,
                                   Oracle& oracle) {
  validate_inputs(config, x);

  // descending ladder: try the most distortion-averse trade-off first, relax
  // toward pure margin; the last stage soaks up the rounding remainder so a
  // fully failed sweep spends the budget exactly
  const double ladder[8] = {1000.0, 500.0, 250.0, 125.0, 62.5, 31.25, 15.625, 0.0};
  long slice = config.max_queries / 8;
  QueryCounter counter{0, config.max_queries};
  Rng rng(config.seed);

  int y = -1;
  NoiseGrid warm;
  bool have_warm = false;

  bool have_success = false;
  StageOutcome best_stage;
  double best_d = std::numeric_limits<double>::infinity();
  double best_lambda = 0.0;

  StageOutcome last_stage;
  double last_lambda = ladder[0];
  bool ran_any = false;

  for (int k = 0; k < 8; ++k) {
    if (counter.exhausted()) break;
    long cap = (k < 7) ? slice : config.max_queries - 7 * slice;
    if (cap < 1) continue;  // tiny budgets: everything lands on the final stage

    StageOutcome stage = attack_loop(config, x, oracle, counter, cap, ladder[k],
                                     have_warm ? &warm : nullptr, y, rng);
    y = stage.y;
    last_stage = stage;
    last_lambda = ladder[k];
    ran_any = true;

    if (stage.success) {
      const SampleSpace space = build_sample_space(config.eps, config.n_freq);
      const PixelMask* mask = config.mask ? &*config.mask : nullptr;
      ImageTensor adv = apply_noise(
          x, expand_to_pixels(stage.final_grid, space, config.tile_size, x.height, x.width, mask));
      double d = metric_distance(config.metric, x, adv, config.eps, config.ssim);
      if (!have_success || d < best_d) {
        have_success = true;
        best_d = d;
        best_stage = stage;
        best_lambda = ladder[k];
      }
      // later stages refine the least-distorted win found so far
      warm = best_stage.final_grid;
      have_warm = true;
    } else if (!have_success) {
      warm = stage.best_grid;  // no win yet: carry the most promising noise forward
      have_warm = true;
    }
  }

  if (!ran_any)
    throw Error(Errc::bad_argument, "query budget too small to run any search stage");

  const StageOutcome& chosen = have_success ? best_stage : last_stage;
  double lambda_used = have_success ? best_lambda : last_lambda;
  return assemble_result(config, x, chosen, lambda_used, counter.used);
}

}  // namespace pgattack
