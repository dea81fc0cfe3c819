#include "pgattack/distribution.hpp"

#include <algorithm>
#include <cmath>

#include "pgattack/error.hpp"

namespace pgattack {

void ThetaField::cell_probs(int r, int c, std::span<double> out) const {
  std::span<const double> l = cell(r, c);
  double mx = l[0];
  for (double v : l) mx = std::max(mx, v);
  double sum = 0.0;
  for (int i = 0; i < arms; ++i) {
    out[i] = std::exp(l[i] - mx);
    sum += out[i];
  }
  for (int i = 0; i < arms; ++i) out[i] /= sum;
}

SampleSpace build_sample_space(double eps, int n_freq) {
  if (eps <= 0.0) throw Error(Errc::bad_argument, "eps must be positive");
  if (n_freq < 1 || n_freq > 12)
    throw Error(Errc::bad_argument, "n_freq must lie in [1,12] so 8-bit steps stay >= 1");
  SampleSpace s;
  s.eps = eps;
  s.n_freq = n_freq;
  s.values.resize(2 * n_freq + 1);
  // eps * (n-i)/n rather than eps - i*eps/n: the endpoints and the midpoint
  // come out as exactly +eps, 0, -eps for every n
  for (int i = 0; i <= 2 * n_freq; ++i)
    s.values[i] = eps * (static_cast<double>(n_freq - i) / static_cast<double>(n_freq));
  return s;
}

ThetaField init_uniform_theta(int tile_h, int tile_w, int n_freq) {
  if (tile_h <= 0 || tile_w <= 0) throw Error(Errc::bad_argument, "theta grid must be non-empty");
  if (n_freq < 1 || n_freq > 12) throw Error(Errc::bad_argument, "n_freq must lie in [1,12]");
  ThetaField t;
  t.tile_h = tile_h;
  t.tile_w = tile_w;
  t.arms = 2 * n_freq + 1;
  t.logits.assign(static_cast<std::size_t>(tile_h) * tile_w * t.arms, 0.0);
  return t;
}

int sample_cell(const ThetaField& theta, int r, int c, Rng& rng) {
  std::vector<double> p(theta.arms);
  theta.cell_probs(r, c, p);
  return static_cast<int>(rng.categorical(p));
}

bool tile_any_allowed(const PixelMask* mask, int tile_size, int r, int c) {
  if (!mask) return true;
  int y0 = r * tile_size, y1 = std::min((r + 1) * tile_size, mask->height);
  int x0 = c * tile_size, x1 = std::min((c + 1) * tile_size, mask->width);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      if (mask->at(y, x)) return true;
  return false;
}

ResampleOutcome resample_square(const NoiseGrid& delta_best, double q, const ThetaField& theta,
                                const PixelMask* mask, int tile_size, Rng& rng) {
  if (!(q > 0.0 && q <= 1.0)) throw Error(Errc::bad_argument, "resample fraction q must be in (0,1]");
  if (delta_best.tile_h != theta.tile_h || delta_best.tile_w != theta.tile_w)
    throw Error(Errc::shape_mismatch, "noise grid and theta grid differ in shape");
  const int th = delta_best.tile_h, tw = delta_best.tile_w;

  int side = static_cast<int>(
      std::lround(std::sqrt(q * static_cast<double>(th) * static_cast<double>(tw))));
  side = std::max(1, side);
  int sh = std::min(side, th);
  int sw = std::min(side, tw);

  int r0 = static_cast<int>(rng.below(static_cast<std::size_t>(th - sh + 1)));
  int c0 = static_cast<int>(rng.below(static_cast<std::size_t>(tw - sw + 1)));

  ResampleOutcome out;
  out.grid = delta_best;
  out.region = {r0, c0, sh, sw};
  int zero = (theta.arms - 1) / 2;
  for (int r = r0; r < r0 + sh; ++r)
    for (int c = c0; c < c0 + sw; ++c)
      out.grid.at(r, c) = tile_any_allowed(mask, tile_size, r, c) ? sample_cell(theta, r, c, rng)
                                                                  : zero;
  return out;
}

void grad_step(ThetaField& theta, const NoiseGrid& delta, const TileRect& region, double loss,
               double baseline, double lr, GradMode mode) {
  if (delta.tile_h != theta.tile_h || delta.tile_w != theta.tile_w)
    throw Error(Errc::shape_mismatch, "noise grid and theta grid differ in shape");
  if (region.row0 < 0 || region.col0 < 0 || region.rows < 1 || region.cols < 1 ||
      region.row0 + region.rows > theta.tile_h || region.col0 + region.cols > theta.tile_w)
    throw Error(Errc::bad_argument, "update region outside the theta grid");
  if (lr <= 0.0) throw Error(Errc::bad_argument, "learning rate must be positive");

  double advantage = loss - baseline;
  if (advantage == 0.0) return;  // matching the baseline must leave theta untouched

  std::vector<double> p(theta.arms);
  for (int r = region.row0; r < region.row0 + region.rows; ++r)
    for (int c = region.col0; c < region.col0 + region.cols; ++c) {
      int k = delta.at(r, c);
      if (k < 0 || k >= theta.arms)
        throw Error(Errc::bad_argument, "noise index outside the sample space");
      theta.cell_probs(r, c, p);
      std::span<double> l = theta.cell(r, c);
      double step = lr * advantage;
      if (mode == GradMode::sampled_only) {
        l[k] -= step * (1.0 - p[k]);
      } else {
        for (int i = 0; i < theta.arms; ++i)
          l[i] -= step * ((i == k ? 1.0 : 0.0) - p[i]);
      }
    }
}

std::vector<double> expand_to_pixels(const NoiseGrid& delta, const SampleSpace& space,
                                     int tile_size, int height, int width,
                                     const PixelMask* mask) {
  if (tile_size < 1) throw Error(Errc::bad_argument, "tile size must be >= 1");
  int want_h = (height + tile_size - 1) / tile_size;
  int want_w = (width + tile_size - 1) / tile_size;
  if (delta.tile_h != want_h || delta.tile_w != want_w)
    throw Error(Errc::shape_mismatch, "noise grid does not tile the image");
  if (mask && (mask->height != height || mask->width != width))
    throw Error(Errc::shape_mismatch, "mask does not match the image");

  std::vector<double> out(static_cast<std::size_t>(height) * width, 0.0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      if (mask && !mask->at(y, x)) continue;  // stays exactly 0
      int idx = delta.at(y / tile_size, x / tile_size);
      if (idx < 0 || idx >= space.arms())
        throw Error(Errc::bad_argument, "noise index outside the sample space");
      out[static_cast<std::size_t>(y) * width + x] = space.values[idx];
    }
  return out;
}

}  // namespace pgattack
