#include "pgattack/metrics.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "pgattack/error.hpp"

namespace pgattack {

namespace {

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(size);
  double center = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    double d = (i - center) / sigma;
    w[i] = std::exp(-0.5 * d * d);
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// horizontal then vertical weighted sums; out is (h-win+1) x (w-win+1)
void separable_filter(const std::vector<double>& field, int h, int w,
                      const std::vector<double>& win, std::vector<double>& tmp,
                      std::vector<double>& out) {
  int k = static_cast<int>(win.size());
  int ow = w - k + 1;
  int oh = h - k + 1;
  tmp.assign(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      const double* row = field.data() + static_cast<std::size_t>(y) * w + x;
      for (int i = 0; i < k; ++i) acc += win[i] * row[i];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  out.assign(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += win[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
}

}  // namespace

double ssim_index(const ImageTensor& x, const ImageTensor& y, const SsimParams& params) {
  if (!x.same_shape(y)) throw Error(Errc::shape_mismatch, "ssim needs same-shape images");
  if (params.window_size < 1 || params.window_size % 2 == 0)
    throw Error(Errc::bad_argument, "ssim window size must be odd and positive");
  if (x.height < params.window_size || x.width < params.window_size)
    throw Error(Errc::bad_argument, "image smaller than ssim window");
  if (params.gaussian_sigma <= 0.0)
    throw Error(Errc::bad_argument, "ssim sigma must be positive");

  const int k = params.window_size;
  const std::vector<double> win = gaussian_window(k, params.gaussian_sigma);
  const double c1 = (params.k1 * params.dynamic_range) * (params.k1 * params.dynamic_range);
  const double c2 = (params.k2 * params.dynamic_range) * (params.k2 * params.dynamic_range);

  const int h = x.height, w = x.width;
  std::vector<double> fx(static_cast<std::size_t>(h) * w), fy(fx.size()), fxx(fx.size()),
      fyy(fx.size()), fxy(fx.size());
  std::vector<double> tmp, mx, my, mxx, myy, mxy;

  // x and y go through byte-identical pipelines so ssim(x, x) == 1 exactly and
  // swapping the arguments cannot change the result
  double channel_sum = 0.0;
  for (int c = 0; c < x.channels; ++c) {
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) {
        std::size_t i = static_cast<std::size_t>(yy) * w + xx;
        double a = x.at(yy, xx, c);
        double b = y.at(yy, xx, c);
        fx[i] = a;
        fy[i] = b;
        fxx[i] = a * a;
        fyy[i] = b * b;
        fxy[i] = a * b;
      }
    separable_filter(fx, h, w, win, tmp, mx);
    separable_filter(fy, h, w, win, tmp, my);
    separable_filter(fxx, h, w, win, tmp, mxx);
    separable_filter(fyy, h, w, win, tmp, myy);
    separable_filter(fxy, h, w, win, tmp, mxy);

    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      double mu_x = mx[i], mu_y = my[i];
      double var_x = mxx[i] - mu_x * mu_x;
      double var_y = myy[i] - mu_y * mu_y;
      double cov = mxy[i] - mu_x * mu_y;
      double num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2);
      double den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2);
      acc += num / den;
    }
    channel_sum += acc / static_cast<double>(mx.size());
  }
  return channel_sum / static_cast<double>(x.channels);
}

double one_minus_ssim(const ImageTensor& x, const ImageTensor& y, const SsimParams& params) {
  return 1.0 - ssim_index(x, y, params);
}

namespace {

// sRGB D65 reference values
constexpr double kXyzFromRgb[3][3] = {
    {0.412453, 0.357580, 0.180423},
    {0.212671, 0.715160, 0.072169},
    {0.019334, 0.119193, 0.950227},
};
constexpr double kWhiteX = 0.95047;
constexpr double kWhiteY = 1.0;
constexpr double kWhiteZ = 1.08883;

double srgb_linearize(double t) {
  return t <= 0.04045 ? t / 12.92 : std::pow((t + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d * d * d ? std::cbrt(t) : t / (3.0 * d * d) + 4.0 / 29.0;
}

constexpr double kDeg = 180.0 / std::numbers::pi;

double hypot7(double c) {  // c^7 / (c^7 + 25^7) shows up twice in delta-e 2000
  double c7 = std::pow(c, 7.0);
  return c7 / (c7 + 6103515625.0);
}

}  // namespace

Lab rgb_to_lab(double r, double g, double b) {
  double lr = srgb_linearize(r);
  double lg = srgb_linearize(g);
  double lb = srgb_linearize(b);
  double xn = (kXyzFromRgb[0][0] * lr + kXyzFromRgb[0][1] * lg + kXyzFromRgb[0][2] * lb) / kWhiteX;
  double yn = (kXyzFromRgb[1][0] * lr + kXyzFromRgb[1][1] * lg + kXyzFromRgb[1][2] * lb) / kWhiteY;
  double zn = (kXyzFromRgb[2][0] * lr + kXyzFromRgb[2][1] * lg + kXyzFromRgb[2][2] * lb) / kWhiteZ;
  double fx = lab_f(xn), fy = lab_f(yn), fz = lab_f(zn);
  Lab out;
  out.l = 116.0 * fy - 16.0;
  out.a = 500.0 * (fx - fy);
  out.b = 200.0 * (fy - fz);
  return out;
}

double ciede2000_pair(const Lab& p, const Lab& q) {
  double c1 = std::sqrt(p.a * p.a + p.b * p.b);
  double c2 = std::sqrt(q.a * q.a + q.b * q.b);
  double cbar = (c1 + c2) / 2.0;
  double g = 0.5 * (1.0 - std::sqrt(hypot7(cbar)));
  double a1p = (1.0 + g) * p.a;
  double a2p = (1.0 + g) * q.a;
  double c1p = std::sqrt(a1p * a1p + p.b * p.b);
  double c2p = std::sqrt(a2p * a2p + q.b * q.b);

  auto hue_deg = [](double b, double ap) {
    if (b == 0.0 && ap == 0.0) return 0.0;
    double h = std::atan2(b, ap) * kDeg;
    return h < 0.0 ? h + 360.0 : h;
  };
  double h1p = hue_deg(p.b, a1p);
  double h2p = hue_deg(q.b, a2p);

  double dlp = q.l - p.l;
  double dcp = c2p - c1p;
  double dhp;  // hue difference wrapped into (-180, 180]
  if (c1p * c2p == 0.0) {
    dhp = 0.0;
  } else {
    dhp = h2p - h1p;
    if (dhp > 180.0)
      dhp -= 360.0;
    else if (dhp < -180.0)
      dhp += 360.0;
  }
  double dbig_h = 2.0 * std::sqrt(c1p * c2p) * std::sin(dhp / 2.0 / kDeg);

  double lbar = (p.l + q.l) / 2.0;
  double cbar_p = (c1p + c2p) / 2.0;
  double hbar;
  if (c1p * c2p == 0.0) {
    hbar = h1p + h2p;
  } else if (std::fabs(h1p - h2p) <= 180.0) {
    hbar = (h1p + h2p) / 2.0;
  } else if (h1p + h2p < 360.0) {
    hbar = (h1p + h2p + 360.0) / 2.0;
  } else {
    hbar = (h1p + h2p - 360.0) / 2.0;
  }

  double t = 1.0 - 0.17 * std::cos((hbar - 30.0) / kDeg) + 0.24 * std::cos(2.0 * hbar / kDeg) +
             0.32 * std::cos((3.0 * hbar + 6.0) / kDeg) - 0.20 * std::cos((4.0 * hbar - 63.0) / kDeg);
  double dtheta = 30.0 * std::exp(-((hbar - 275.0) / 25.0) * ((hbar - 275.0) / 25.0));
  double rc = 2.0 * std::sqrt(hypot7(cbar_p));
  double lm = (lbar - 50.0) * (lbar - 50.0);
  double sl = 1.0 + 0.015 * lm / std::sqrt(20.0 + lm);
  double sc = 1.0 + 0.045 * cbar_p;
  double sh = 1.0 + 0.015 * cbar_p * t;
  double rt = -std::sin(2.0 * dtheta / kDeg) * rc;

  double vl = dlp / sl;
  double vc = dcp / sc;
  double vh = dbig_h / sh;
  return std::sqrt(vl * vl + vc * vc + vh * vh + rt * vc * vh);
}

double ciede2000_image(const ImageTensor& x, const ImageTensor& y) {
  if (!x.same_shape(y)) throw Error(Errc::shape_mismatch, "ciede2000 needs same-shape images");
  if (x.channels != 3) throw Error(Errc::bad_argument, "ciede2000 needs rgb images");
  double acc = 0.0;
  for (int yy = 0; yy < x.height; ++yy)
    for (int xx = 0; xx < x.width; ++xx) {
      Lab a = rgb_to_lab(x.at(yy, xx, 0), x.at(yy, xx, 1), x.at(yy, xx, 2));
      Lab b = rgb_to_lab(y.at(yy, xx, 0), y.at(yy, xx, 1), y.at(yy, xx, 2));
      acc += ciede2000_pair(a, b);
    }
  return acc / static_cast<double>(x.pixel_count());
}

double lp_normalized(const ImageTensor& x, const ImageTensor& y, int p, double eps) {
  if (!x.same_shape(y)) throw Error(Errc::shape_mismatch, "lp distance needs same-shape images");
  if (eps <= 0.0) throw Error(Errc::bad_argument, "lp distance needs eps > 0");
  std::size_t pixels = x.pixel_count();
  std::size_t elems = pixels * x.channels;
  switch (p) {
    case 0: {
      std::size_t m = 0;
      for (int yy = 0; yy < x.height; ++yy)
        for (int xx = 0; xx < x.width; ++xx)
          for (int c = 0; c < x.channels; ++c)
            if (x.at(yy, xx, c) != y.at(yy, xx, c)) {
              ++m;
              break;
            }
      return static_cast<double>(m) / static_cast<double>(pixels);
    }
    case 1: {
      // each element contributes |diff|/eps before summing: when every pixel is
      // perturbed by exactly +-eps in all channels this reduces to the touched
      // fraction bit for bit (the same rounding as the p = 0 branch)
      double acc = 0.0;
      for (std::size_t i = 0; i < elems; ++i) acc += std::fabs(x.data[i] - y.data[i]) / eps;
      return acc / static_cast<double>(elems);
    }
    case 2: {
      double ss = 0.0;
      for (std::size_t i = 0; i < elems; ++i) {
        double d = x.data[i] - y.data[i];
        ss += d * d;
      }
      return std::sqrt(ss) / (eps * std::sqrt(static_cast<double>(elems)));
    }
    default:
      throw Error(Errc::bad_argument, "lp distance supports p in {0,1,2}");
  }
}

double metric_distance(MetricKind kind, const ImageTensor& x, const ImageTensor& y, double eps,
                       const SsimParams& params) {
  switch (kind) {
    case MetricKind::one_minus_ssim:
      return one_minus_ssim(x, y, params);
    case MetricKind::ciede2000:
      return ciede2000_image(x, y);
    case MetricKind::l0:
      return lp_normalized(x, y, 0, eps);
    case MetricKind::l1:
      return lp_normalized(x, y, 1, eps);
    case MetricKind::l2:
      return lp_normalized(x, y, 2, eps);
  }
  throw Error(Errc::bad_argument, "unknown metric");
}

const char* metric_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::one_minus_ssim:
      return "ssim";
    case MetricKind::ciede2000:
      return "ciede2000";
    case MetricKind::l0:
      return "l0";
    case MetricKind::l1:
      return "l1";
    case MetricKind::l2:
      return "l2";
  }
  return "?";
}

MetricKind metric_from_name(const std::string& name) {
  if (name == "ssim") return MetricKind::one_minus_ssim;
  if (name == "ciede2000") return MetricKind::ciede2000;
  if (name == "l0") return MetricKind::l0;
  if (name == "l1") return MetricKind::l1;
  if (name == "l2") return MetricKind::l2;
  throw Error(Errc::bad_argument, "unknown metric name: " + name);
}

}  // namespace pgattack
