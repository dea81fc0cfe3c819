#ifndef PGATTACK_IMAGE_HPP
#define PGATTACK_IMAGE_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace pgattack {

// H x W x C grid of unit-interval doubles, row-major, channel-interleaved.
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 0;          // 1 (gray) or 3 (rgb)
  std::vector<double> data;  // height*width*channels values in [0,1]

  ImageTensor() = default;
  ImageTensor(int h, int w, int c, double fill = 0.0);

  double& at(int y, int x, int ch) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + ch];
  }
  double at(int y, int x, int ch) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + ch];
  }

  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  bool same_shape(const ImageTensor& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }

  // throws Error on shape/size/range violations
  void validate() const;
};

// half-open pixel rectangle: x in [x0,x1), y in [y0,y1)
struct BoundingBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
};

// per-pixel attack permission; true = pixel may carry noise
struct PixelMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> allowed;

  bool at(int y, int x) const { return allowed[static_cast<std::size_t>(y) * width + x] != 0; }
  std::size_t allowed_count() const;
  // computed as 1 - disallowed/total so fraction + disallowed/total == 1 exactly
  double allowed_fraction() const;
};

// 8-bit grayscale or RGB PNG only; anything else is rejected, not coerced
ImageTensor load_png(const std::string& path);
void save_png(const ImageTensor& img, const std::string& path);

// x + delta clamped to [0,1]; one delta value per pixel, shared by all channels
ImageTensor apply_noise(const ImageTensor& x, const std::vector<double>& delta);

// pixels inside the box are protected (mask false), the rest attackable
PixelMask mask_from_bbox(const BoundingBox& box, int height, int width);

// {"x0":..,"y0":..,"x1":..,"y1":..}
BoundingBox load_bbox_json(const std::string& path);

}  // namespace pgattack

#endif
