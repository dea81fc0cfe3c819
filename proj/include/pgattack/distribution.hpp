#ifndef PGATTACK_DISTRIBUTION_HPP
#define PGATTACK_DISTRIBUTION_HPP

#include <span>
#include <vector>

#include "pgattack/image.hpp"
#include "pgattack/rng.hpp"

namespace pgattack {

// discrete noise values a tile can take: 2N+1 evenly spaced magnitudes from
// +eps down to -eps; index N is exactly zero
struct SampleSpace {
  double eps = 0.0;
  int n_freq = 1;
  std::vector<double> values;

  int arms() const { return static_cast<int>(values.size()); }
  int zero_index() const { return n_freq; }
};

// one softmax logit vector per tile
struct ThetaField {
  int tile_h = 0;
  int tile_w = 0;
  int arms = 0;
  std::vector<double> logits;  // tile_h * tile_w * arms

  std::span<double> cell(int r, int c) {
    return {logits.data() + (static_cast<std::size_t>(r) * tile_w + c) * arms,
            static_cast<std::size_t>(arms)};
  }
  std::span<const double> cell(int r, int c) const {
    return {logits.data() + (static_cast<std::size_t>(r) * tile_w + c) * arms,
            static_cast<std::size_t>(arms)};
  }

  // softmax of one cell's logits (max-shifted for stability)
  void cell_probs(int r, int c, std::span<double> out) const;
};

// sampled noise as per-tile indices into SampleSpace::values
struct NoiseGrid {
  int tile_h = 0;
  int tile_w = 0;
  std::vector<int> indices;

  NoiseGrid() = default;
  NoiseGrid(int th, int tw, int fill = 0)
      : tile_h(th), tile_w(tw), indices(static_cast<std::size_t>(th) * tw, fill) {}

  int& at(int r, int c) { return indices[static_cast<std::size_t>(r) * tile_w + c]; }
  int at(int r, int c) const { return indices[static_cast<std::size_t>(r) * tile_w + c]; }
};

// tile-grid rectangle, half-open on neither side: rows/cols are extents
struct TileRect {
  int row0 = 0;
  int col0 = 0;
  int rows = 0;
  int cols = 0;
};

enum class GradMode {
  sampled_only,      // touch only the sampled arm's logit
  full_categorical,  // update every arm (default; lower-variance estimator)
};

SampleSpace build_sample_space(double eps, int n_freq);

ThetaField init_uniform_theta(int tile_h, int tile_w, int n_freq);

int sample_cell(const ThetaField& theta, int r, int c, Rng& rng);

struct ResampleOutcome {
  NoiseGrid grid;
  TileRect region;
};

// copy delta_best, then redraw one square patch (side ~ sqrt(q * grid area))
// from theta; tiles with no attackable pixel are pinned to the zero arm
ResampleOutcome resample_square(const NoiseGrid& delta_best, double q, const ThetaField& theta,
                                const PixelMask* mask, int tile_size, Rng& rng);

// baseline-relative score-function update on the cells inside region, using
// the indices those cells had in delta; loss == baseline leaves theta
// bit-identical
void grad_step(ThetaField& theta, const NoiseGrid& delta, const TileRect& region, double loss,
               double baseline, double lr, GradMode mode);

// per-pixel noise map: pixel (y,x) takes values[delta(y/tile, x/tile)];
// masked-off pixels get exactly 0
std::vector<double> expand_to_pixels(const NoiseGrid& delta, const SampleSpace& space,
                                     int tile_size, int height, int width,
                                     const PixelMask* mask);

// whether the tile's pixel footprint contains at least one attackable pixel
bool tile_any_allowed(const PixelMask* mask, int tile_size, int r, int c);

}  // namespace pgattack

#endif
