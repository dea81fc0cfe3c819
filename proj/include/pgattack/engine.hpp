#ifndef PGATTACK_ENGINE_HPP
#define PGATTACK_ENGINE_HPP

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "pgattack/distribution.hpp"
#include "pgattack/image.hpp"
#include "pgattack/metrics.hpp"
#include "pgattack/oracle.hpp"

namespace pgattack {

enum class LrSchedule { constant, decaying };

struct AttackConfig {
  double eps = 0.05;           // max per-pixel noise magnitude
  int n_freq = 1;              // sample space has 2*n_freq+1 arms
  double q = 0.01;             // fraction of the grid redrawn per step
  double lambda = 10.0;        // distortion weight in the loss
  bool lambda_dynamic = false; // sweep lambda instead of using the fixed value
  double lr = 0.01;
  LrSchedule lr_schedule = LrSchedule::constant;
  int tile_size = 2;
  MetricKind metric = MetricKind::one_minus_ssim;
  SsimParams ssim;
  long max_queries = 10000;
  std::uint64_t seed = 0;
  GradMode grad_mode = GradMode::full_categorical;
  std::optional<PixelMask> mask;  // pixels the attack may touch; absent = all
};

struct AttackResult {
  bool success = false;
  long queries_used = 0;
  ImageTensor adversarial;    // last queried image (best-loss one on failure)
  std::vector<double> delta;  // its per-pixel noise map
  int original_class = -1;
  int final_class = -1;
  double lambda_used = 0.0;
  // distortion scores of `adversarial` against the clean input, always
  // recomputed at the end; nan when a metric is not computable for the input
  double one_minus_ssim = std::numeric_limits<double>::quiet_NaN();
  double ciede2000 = std::numeric_limits<double>::quiet_NaN();
  double l0 = std::numeric_limits<double>::quiet_NaN();
  double l1 = std::numeric_limits<double>::quiet_NaN();
  double l2 = std::numeric_limits<double>::quiet_NaN();
  // best loss seen after each search step; non-increasing, one entry per step
  std::vector<double> trace;
};

// hinge on the true-class lead: 0 once any other class has caught up
double margin_loss(const LogitVector& logits, int y);

// margin plus lambda-weighted distortion; lambda == 0 skips the metric
// entirely so the choice of metric cannot perturb the result
double total_loss(const LogitVector& logits, int y, const ImageTensor& x,
                  const ImageTensor& x_adv, double lambda, MetricKind metric, double eps,
                  const SsimParams& ssim);

// one counted query: does the oracle now put x_adv in a class other than
// original_class?
bool is_success(Oracle& oracle, const ImageTensor& x_adv, int original_class,
                QueryCounter& counter);

// step sizes: constant, or base/sqrt(t*ln(t+1)) which decays fast enough to
// converge but slowly enough to keep moving
double learning_rate_at(LrSchedule schedule, double base_lr, long t);

AttackResult run_attack(const AttackConfig& config, const ImageTensor& x, Oracle& oracle);

// descending-lambda line search: spend the budget in eight slices from the
// most distortion-averse lambda down to 0, warm-starting each stage from the
// best noise found so far, and keep the successful stage with the smallest
// distortion
AttackResult dynamic_lambda_search(const AttackConfig& config, const ImageTensor& x,
                                   Oracle& oracle);

}  // namespace pgattack

#endif
