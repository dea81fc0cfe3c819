#include "pgattack/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "pgattack/error.hpp"

namespace pgattack {

ImageTensor::ImageTensor(int h, int w, int c, double fill)
    : height(h), width(w), channels(c),
      data(static_cast<std::size_t>(h) * w * c, fill) {}

void ImageTensor::validate() const {
  if (height <= 0 || width <= 0 || (channels != 1 && channels != 3))
    throw Error(Errc::shape_mismatch, "image shape must be HxWx1 or HxWx3, got " +
                                          std::to_string(height) + "x" + std::to_string(width) +
                                          "x" + std::to_string(channels));
  if (data.size() != static_cast<std::size_t>(height) * width * channels)
    throw Error(Errc::shape_mismatch, "image buffer size does not match shape");
  for (double v : data)
    if (!(v >= 0.0 && v <= 1.0))
      throw Error(Errc::bad_argument, "image values must lie in [0,1]");
}

std::size_t PixelMask::allowed_count() const {
  std::size_t n = 0;
  for (std::uint8_t a : allowed) n += (a != 0);
  return n;
}

double PixelMask::allowed_fraction() const {
  std::size_t total = static_cast<std::size_t>(height) * width;
  std::size_t blocked = total - allowed_count();
  return 1.0 - static_cast<double>(blocked) / static_cast<double>(total);
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

ImageTensor load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw Error(Errc::missing_file, "cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(Errc::png_decode, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error(Errc::png_decode, "libpng init failed");
  }

  std::vector<png_bytep> rows;
  std::vector<png_byte> pixels;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(Errc::png_decode, "corrupt or truncated png: " + path);
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  int color_type = png_get_color_type(png, info);

  if (bit_depth != 8 || (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB)) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::ostringstream msg;
    msg << path << ": only 8-bit grayscale/rgb png supported (bit depth " << bit_depth
        << ", color type " << color_type << ")";
    throw Error(Errc::unsupported_png, msg.str());
  }

  int channels = (color_type == PNG_COLOR_TYPE_RGB) ? 3 : 1;
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  std::size_t stride = static_cast<std::size_t>(w) * channels;
  pixels.resize(stride * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  ImageTensor img(static_cast<int>(h), static_cast<int>(w), channels);
  for (std::size_t i = 0; i < pixels.size(); ++i)
    img.data[i] = static_cast<double>(pixels[i]) / 255.0;
  return img;
}

void save_png(const ImageTensor& img, const std::string& path) {
  img.validate();
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw Error(Errc::io_write, "cannot write " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(Errc::io_write, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(Errc::io_write, "libpng init failed");
  }

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(Errc::io_write, "png write failed: " + path);
  }

  png_init_io(png, fp.get());
  int color_type = (img.channels == 3) ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  png_set_IHDR(png, info, img.width, img.height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  std::vector<png_byte> row(stride);
  for (int y = 0; y < img.height; ++y) {
    for (std::size_t i = 0; i < stride; ++i) {
      long q = std::lround(img.data[y * stride + i] * 255.0);
      row[i] = static_cast<png_byte>(q < 0 ? 0 : (q > 255 ? 255 : q));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageTensor apply_noise(const ImageTensor& x, const std::vector<double>& delta) {
  if (delta.size() != x.pixel_count())
    throw Error(Errc::shape_mismatch, "noise map has " + std::to_string(delta.size()) +
                                          " entries for " + std::to_string(x.pixel_count()) +
                                          " pixels");
  ImageTensor out = x;
  for (int y = 0; y < x.height; ++y)
    for (int xx = 0; xx < x.width; ++xx) {
      double d = delta[static_cast<std::size_t>(y) * x.width + xx];
      for (int c = 0; c < x.channels; ++c) {
        double v = x.at(y, xx, c) + d;
        out.at(y, xx, c) = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
      }
    }
  return out;
}

PixelMask mask_from_bbox(const BoundingBox& box, int height, int width) {
  if (height <= 0 || width <= 0)
    throw Error(Errc::bad_argument, "mask dimensions must be positive");
  if (!(0 <= box.x0 && box.x0 < box.x1 && box.x1 <= width && 0 <= box.y0 && box.y0 < box.y1 &&
        box.y1 <= height))
    throw Error(Errc::bad_argument, "bounding box must be non-degenerate and inside the image");
  PixelMask m;
  m.height = height;
  m.width = width;
  m.allowed.assign(static_cast<std::size_t>(height) * width, 1);
  for (int y = box.y0; y < box.y1; ++y)
    for (int x = box.x0; x < box.x1; ++x)
      m.allowed[static_cast<std::size_t>(y) * width + x] = 0;
  return m;
}

BoundingBox load_bbox_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_file, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_argument, "bad bounding-box json in " + path + ": " + e.what());
  }
  BoundingBox b;
  try {
    b.x0 = j.at("x0").get<int>();
    b.y0 = j.at("y0").get<int>();
    b.x1 = j.at("x1").get<int>();
    b.y1 = j.at("y1").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_argument, "bounding-box json needs integer x0,y0,x1,y1: " +
                                        std::string(e.what()));
  }
  return b;
}

}  // namespace pgattack
