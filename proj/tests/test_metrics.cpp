#include <cmath>
#include <vector>

#include "doctest.h"
#include "pgattack/distribution.hpp"
#include "pgattack/error.hpp"
#include "pgattack/metrics.hpp"
#include "pgattack/rng.hpp"
#include "support/ciede_cases.hpp"
#include "support/fixtures.hpp"

using namespace pgattack;
using pgattack::testing::thrown_code;

namespace {

ImageTensor random_image(Rng& rng, int h, int w, int c, double lo = 0.0, double hi = 1.0) {
  ImageTensor img(h, w, c);
  for (double& v : img.data) v = lo + (hi - lo) * rng.uniform01();
  return img;
}

// windowed reference with explicit 2-d weights; deliberately no separable pass
double ssim_direct(const ImageTensor& x, const ImageTensor& y, const SsimParams& p) {
  int k = p.window_size;
  std::vector<double> w1(k);
  double center = (k - 1) / 2.0, sum = 0.0;
  for (int i = 0; i < k; ++i) {
    double d = (i - center) / p.gaussian_sigma;
    w1[i] = std::exp(-0.5 * d * d);
    sum += w1[i];
  }
  for (double& v : w1) v /= sum;

  double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  double channel_sum = 0.0;
  for (int c = 0; c < x.channels; ++c) {
    double acc = 0.0;
    int count = 0;
    for (int oy = 0; oy + k <= x.height; ++oy)
      for (int ox = 0; ox + k <= x.width; ++ox) {
        double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j) {
            double wgt = w1[i] * w1[j];
            double a = x.at(oy + i, ox + j, c);
            double b = y.at(oy + i, ox + j, c);
            mx += wgt * a;
            my += wgt * b;
            mxx += wgt * a * a;
            myy += wgt * b * b;
            mxy += wgt * a * b;
          }
        double vx = mxx - mx * mx, vy = myy - my * my, cov = mxy - mx * my;
        acc += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++count;
      }
    channel_sum += acc / count;
  }
  return channel_sum / x.channels;
}

}  // namespace

TEST_CASE("ssim of an image with itself is exactly 1") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    ImageTensor x = random_image(rng, 12, 12, trial % 2 ? 1 : 3);
    CHECK(ssim_index(x, x) == 1.0);
    CHECK(one_minus_ssim(x, x) == 0.0);
  }
}

TEST_CASE("ssim of two constant images matches the closed form") {
  double c1 = (0.01 * 1.0) * (0.01 * 1.0);
  struct Pair {
    double a, b;
  };
  for (Pair p : {Pair{0.2, 0.8}, Pair{0.0, 1.0}, Pair{0.5, 0.6}, Pair{0.31, 0.94}}) {
    ImageTensor x(16, 16, 1, p.a);
    ImageTensor y(16, 16, 1, p.b);
    double want = (2.0 * p.a * p.b + c1) / (p.a * p.a + p.b * p.b + c1);
    CHECK(std::abs(ssim_index(x, y) - want) <= 1e-9);
  }
}

TEST_CASE("ssim is symmetric bit for bit") {
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    ImageTensor x = random_image(rng, 13, 11, 3);
    ImageTensor y = random_image(rng, 13, 11, 3);
    CHECK(ssim_index(x, y) == ssim_index(y, x));
  }
}

TEST_CASE("ssim stays within [-1, 1] under heavy perturbation") {
  Rng rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    ImageTensor x = random_image(rng, 11, 11, 1);
    ImageTensor y = random_image(rng, 11, 11, 1);
    double s = ssim_index(x, y);
    CHECK(s <= 1.0);
    CHECK(s >= -1.0);
  }
}

TEST_CASE("separable ssim agrees with the direct 2-d reference") {
  Rng rng(24);
  SsimParams p;
  for (int trial = 0; trial < 10; ++trial) {
    ImageTensor x = random_image(rng, 13, 15, trial % 2 ? 1 : 3);
    ImageTensor y = random_image(rng, 13, 15, x.channels);
    CHECK(std::abs(ssim_index(x, y, p) - ssim_direct(x, y, p)) <= 1e-12);
  }
  SsimParams small;
  small.window_size = 5;
  ImageTensor x = random_image(rng, 8, 8, 3);
  ImageTensor y = random_image(rng, 8, 8, 3);
  CHECK(std::abs(ssim_index(x, y, small) - ssim_direct(x, y, small)) <= 1e-12);
}

TEST_CASE("ssim input checking") {
  ImageTensor x(8, 8, 1, 0.5);
  auto too_small = thrown_code([&] { ssim_index(x, x); });  // default window is 11
  REQUIRE(too_small.has_value());
  CHECK(*too_small == Errc::bad_argument);

  ImageTensor y(8, 9, 1, 0.5);
  SsimParams small;
  small.window_size = 5;
  auto shapes = thrown_code([&] { ssim_index(x, y, small); });
  REQUIRE(shapes.has_value());
  CHECK(*shapes == Errc::shape_mismatch);

  SsimParams even;
  even.window_size = 4;
  auto evenwin = thrown_code([&] { ssim_index(x, x, even); });
  REQUIRE(evenwin.has_value());
  CHECK(*evenwin == Errc::bad_argument);
}

TEST_CASE("growing noise strictly grows 1-ssim") {
  Rng rng(25);
  SsimParams small;
  small.window_size = 5;
  ImageTensor base = random_image(rng, 8, 8, 3, 0.3, 0.7);
  std::vector<double> pattern(base.data.size());
  for (double& v : pattern) v = rng.below(2) == 0 ? -1.0 : 1.0;

  double prev = 0.0;
  for (double amp : {0.01, 0.03, 0.06, 0.12}) {
    ImageTensor pert = base;
    for (std::size_t i = 0; i < pert.data.size(); ++i) pert.data[i] += amp * pattern[i];
    double d = one_minus_ssim(base, pert, small);
    CHECK(d > prev);
    prev = d;
  }
}

TEST_CASE("srgb to lab matches the frozen reference vectors") {
  // reference conversions computed with an independent colour library
  struct Row {
    double r, g, b, l, a, bb;
  };
  const Row rows[] = {
      {0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
      {1.0, 1.0, 1.0, 100.0, -0.0024549379, 0.0046534212},
      {1.0, 0.0, 0.0, 53.2405879437, 80.0923082257, 67.2027510444},
      {0.0, 1.0, 0.0, 87.7350994883, -86.1830297444, 83.1797031754},
      {0.0, 0.0, 1.0, 32.2956725650, 79.1855909118, -107.8573002067},
      {0.5, 0.5, 0.5, 53.3889647411, -0.0014684965, 0.0027835869},
      {0.2, 0.4, 0.6, 42.0080005894, -0.1540411985, -32.8428974190},
      {0.9, 0.1, 0.3, 49.4855859282, 73.2156120261, 27.0911888276},
      {0.03, 0.02, 0.01, 1.4965157373, 0.3121727246, 1.2001015464},
      {0.75, 0.75, 0.2, 75.2768541061, -16.1566424823, 65.9979021356},
  };
  for (const Row& row : rows) {
    Lab lab = rgb_to_lab(row.r, row.g, row.b);
    CHECK(std::abs(lab.l - row.l) <= 1e-4);
    CHECK(std::abs(lab.a - row.a) <= 1e-4);
    CHECK(std::abs(lab.b - row.bb) <= 1e-4);
  }
}

TEST_CASE("delta-e 2000 reproduces the published 34-pair table") {
  for (const auto& row : pgattack::testing::kCiedeCases) {
    Lab p{row[0], row[1], row[2]};
    Lab q{row[3], row[4], row[5]};
    CHECK(std::abs(ciede2000_pair(p, q) - row[6]) <= 1e-4);
    CHECK(ciede2000_pair(p, q) == ciede2000_pair(q, p));
  }
}

TEST_CASE("delta-e 2000 of identical colours is exactly 0") {
  Rng rng(26);
  for (int trial = 0; trial < 100; ++trial) {
    Lab p{rng.uniform01() * 100.0, rng.uniform01() * 160.0 - 80.0, rng.uniform01() * 160.0 - 80.0};
    CHECK(ciede2000_pair(p, p) == 0.0);
  }
}

TEST_CASE("delta-e 2000 is symmetric on random colours") {
  Rng rng(27);
  for (int trial = 0; trial < 200; ++trial) {
    Lab p{rng.uniform01() * 100.0, rng.uniform01() * 160.0 - 80.0, rng.uniform01() * 160.0 - 80.0};
    Lab q{rng.uniform01() * 100.0, rng.uniform01() * 160.0 - 80.0, rng.uniform01() * 160.0 - 80.0};
    CHECK(ciede2000_pair(p, q) == ciede2000_pair(q, p));
  }
}

TEST_CASE("image-level delta-e averages per-pixel values") {
  Rng rng(28);
  ImageTensor x = random_image(rng, 2, 2, 3);
  CHECK(ciede2000_image(x, x) == 0.0);

  ImageTensor y = x;
  y.at(1, 0, 0) = std::min(1.0, y.at(1, 0, 0) + 0.2);
  Lab a = rgb_to_lab(x.at(1, 0, 0), x.at(1, 0, 1), x.at(1, 0, 2));
  Lab b = rgb_to_lab(y.at(1, 0, 0), y.at(1, 0, 1), y.at(1, 0, 2));
  CHECK(ciede2000_image(x, y) == ciede2000_pair(a, b) / 4.0);

  ImageTensor gray(4, 4, 1, 0.5);
  auto code = thrown_code([&] { ciede2000_image(gray, gray); });
  REQUIRE(code.has_value());
  CHECK(*code == Errc::bad_argument);
}

TEST_CASE("normalized lp distances: zero, saturation, single pixel") {
  ImageTensor x(4, 4, 3, 0.0625);
  CHECK(lp_normalized(x, x, 0, 0.05) == 0.0);
  CHECK(lp_normalized(x, x, 1, 0.05) == 0.0);
  CHECK(lp_normalized(x, x, 2, 0.05) == 0.0);

  // every pixel moved by exactly +-eps in every channel: all three saturate at 1
  ImageTensor y = x;
  Rng rng(29);
  for (int py = 0; py < 4; ++py) {
    double sign = rng.below(2) == 0 ? 1.0 : -1.0;
    for (int px = 0; px < 4; ++px)
      for (int c = 0; c < 3; ++c) y.at(py, px, c) = x.at(py, px, c) + sign * 0.05;
  }
  CHECK(lp_normalized(x, y, 0, 0.05) == 1.0);
  CHECK(lp_normalized(x, y, 1, 0.05) == 1.0);
  CHECK(std::abs(lp_normalized(x, y, 2, 0.05) - 1.0) <= 1e-12);

  ImageTensor z = x;
  for (int c = 0; c < 3; ++c) z.at(2, 3, c) += 0.05;
  CHECK(lp_normalized(x, z, 0, 0.05) == 0.25 / 4.0);
}

TEST_CASE("touched-pixel count and scaled absolute mass agree bit for bit at one level") {
  // channel-shared noise drawn from a single +-eps level keeps |diff|/eps at
  // exactly 1 on touched pixels, so the two distances are the same rounding
  // of the same ratio
  Rng rng(30);
  SampleSpace space = build_sample_space(0.05, 1);
  for (int trial = 0; trial < 50; ++trial) {
    int tile = 1 + static_cast<int>(rng.below(3));
    int h = 3 + static_cast<int>(rng.below(20));
    int w = 3 + static_cast<int>(rng.below(20));
    int th = (h + tile - 1) / tile, tw = (w + tile - 1) / tile;
    NoiseGrid grid(th, tw);
    for (int& idx : grid.indices) idx = static_cast<int>(rng.below(3));
    ImageTensor x(h, w, 3, 0.0625);  // +-0.05 around 1/16 stays exact in binary
    std::vector<double> delta = expand_to_pixels(grid, space, tile, h, w, nullptr);
    ImageTensor y = apply_noise(x, delta);
    CHECK(lp_normalized(x, y, 1, 0.05) == lp_normalized(x, y, 0, 0.05));
  }
}

TEST_CASE("lp distance input checking") {
  ImageTensor x(2, 2, 1, 0.5);
  auto eps0 = thrown_code([&] { lp_normalized(x, x, 1, 0.0); });
  REQUIRE(eps0.has_value());
  CHECK(*eps0 == Errc::bad_argument);
  auto badp = thrown_code([&] { lp_normalized(x, x, 3, 0.05); });
  REQUIRE(badp.has_value());
  CHECK(*badp == Errc::bad_argument);
  ImageTensor y(2, 3, 1, 0.5);
  auto shape = thrown_code([&] { lp_normalized(x, y, 1, 0.05); });
  REQUIRE(shape.has_value());
  CHECK(*shape == Errc::shape_mismatch);
}

TEST_CASE("metric dispatch and names") {
  Rng rng(31);
  ImageTensor x = random_image(rng, 12, 12, 3);
  ImageTensor y = random_image(rng, 12, 12, 3);
  CHECK(metric_distance(MetricKind::one_minus_ssim, x, y, 0.05) == one_minus_ssim(x, y));
  CHECK(metric_distance(MetricKind::ciede2000, x, y, 0.05) == ciede2000_image(x, y));
  CHECK(metric_distance(MetricKind::l2, x, y, 0.05) == lp_normalized(x, y, 2, 0.05));

  for (MetricKind k : {MetricKind::one_minus_ssim, MetricKind::ciede2000, MetricKind::l0,
                       MetricKind::l1, MetricKind::l2})
    CHECK(metric_from_name(metric_name(k)) == k);
  auto bad = thrown_code([] { metric_from_name("psnr"); });
  REQUIRE(bad.has_value());
  CHECK(*bad == Errc::bad_argument);
}
