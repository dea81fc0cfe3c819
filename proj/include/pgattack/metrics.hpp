#ifndef PGATTACK_METRICS_HPP
#define PGATTACK_METRICS_HPP

#include <string>

#include "pgattack/image.hpp"

namespace pgattack {

struct SsimParams {
  int window_size = 11;
  double gaussian_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;  // images live in [0,1]
};

enum class MetricKind { one_minus_ssim, ciede2000, l0, l1, l2 };

struct Lab {
  double l = 0.0;
  double a = 0.0;
  double b = 0.0;
};

// mean local SSIM over all fully-covered window positions, averaged across
// channels; Gaussian-weighted windows
double ssim_index(const ImageTensor& x, const ImageTensor& y, const SsimParams& params = {});
double one_minus_ssim(const ImageTensor& x, const ImageTensor& y, const SsimParams& params = {});

// sRGB in [0,1] -> CIELAB under D65
Lab rgb_to_lab(double r, double g, double b);

// CIE Delta-E 2000 with kL = kC = kH = 1
double ciede2000_pair(const Lab& p, const Lab& q);

// mean per-pixel Delta-E 2000; rgb images only
double ciede2000_image(const ImageTensor& x, const ImageTensor& y);

// p = 0: fraction of pixels touched (any channel differs)
// p = 1: sum of |diff|/eps over elements, divided by element count
// p = 2: ||diff||_2 / (eps * sqrt(element count))
double lp_normalized(const ImageTensor& x, const ImageTensor& y, int p, double eps);

double metric_distance(MetricKind kind, const ImageTensor& x, const ImageTensor& y, double eps,
                       const SsimParams& params = {});

const char* metric_name(MetricKind kind);
MetricKind metric_from_name(const std::string& name);

}  // namespace pgattack

#endif
