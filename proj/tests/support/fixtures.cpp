#include "support/fixtures.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <stdexcept>

#include "pgattack/engine.hpp"
#include "pgattack/rng.hpp"

namespace pgattack::testing {

namespace {

std::string env_or_die(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) throw std::runtime_error(std::string("environment variable not set: ") + name);
  return v;
}

}  // namespace

std::string data_dir() { return env_or_die("PGATTACK_DATA_DIR"); }
std::string cli_path() { return env_or_die("PGATTACK_CLI"); }
std::string stub_path() { return env_or_die("PGATTACK_STUB"); }

std::string make_temp_dir(const std::string& tag) {
  std::string tmpl = (std::filesystem::temp_directory_path() / (tag + ".XXXXXX")).string();
  std::vector<char> buf(tmpl.begin(), tmpl.end());
  buf.push_back('\0');
  if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed for " + tmpl);
  return std::string(buf.data());
}

Model make_flip_model() {
  // hidden: relu(100*x00 - 50), relu(50 - 100*x00); both zero at x00 == 0.5
  Layer l1;
  l1.kind = Layer::Kind::dense;
  l1.out_dim = 2;
  l1.in_dim = 4;
  l1.weights = {100, 0, 0, 0, -100, 0, 0, 0};
  l1.bias = {-50, 50};
  Layer act;
  act.kind = Layer::Kind::relu;
  // class 0 is the constant 1; class 1 rises as |x00 - 0.5| grows
  Layer l2;
  l2.kind = Layer::Kind::dense;
  l2.out_dim = 2;
  l2.in_dim = 2;
  l2.weights = {0, 0, 1, 1};
  l2.bias = {1, 0};
  Model m;
  m.layers = {l1, act, l2};
  m.input_shape = {2, 2, 1};
  return m;
}

namespace {

constexpr int kToyHeight = 32;
constexpr int kToyWidth = 32;
constexpr int kToyChannels = 3;
constexpr int kToyInputs = kToyHeight * kToyWidth * kToyChannels;
constexpr int kToyHidden = 32;
constexpr int kToyClasses = 10;
constexpr int kToyBatch = 50;
constexpr int kToyCandidates = 1200;
// two independent knobs, both set through the final-layer rescale below:
//  - the window's position relative to the median margin decides how hard the
//    selected images are to flip (relu nets are positively homogeneous, so
//    absolute margins say nothing about that);
//  - the absolute logit scale decides how strongly a distortion term competes
//    with margin progress, because lambda * d is not rescaled with the net.
// margins just above 1 keep both effects in play.
constexpr double kMarginLow = 1.05;
constexpr double kMarginHigh = 1.45;

ImageTensor random_byte_image(Rng& rng) {
  ImageTensor img(kToyHeight, kToyWidth, kToyChannels);
  for (double& v : img.data) v = static_cast<double>(rng.below(256)) / 255.0;
  return img;
}

ToyFixture build_toy_fixture() {
  Rng rng(0xbadc0ffee0ddf00dULL);

  Model m;
  Layer l1;
  l1.kind = Layer::Kind::dense;
  l1.out_dim = kToyHidden;
  l1.in_dim = kToyInputs;
  l1.weights.resize(static_cast<std::size_t>(kToyHidden) * kToyInputs);
  for (double& w : l1.weights) w = (rng.uniform01() * 2.0 - 1.0) * 0.03;
  l1.bias.assign(kToyHidden, 0.0);
  Layer act;
  act.kind = Layer::Kind::relu;
  Layer l2;
  l2.kind = Layer::Kind::dense;
  l2.out_dim = kToyClasses;
  l2.in_dim = kToyHidden;
  l2.weights.resize(static_cast<std::size_t>(kToyClasses) * kToyHidden);
  for (double& w : l2.weights) w = rng.uniform01() * 2.0 - 1.0;
  l2.bias.assign(kToyClasses, 0.0);
  m.layers = {l1, act, l2};
  m.input_shape = {kToyHeight, kToyWidth, kToyChannels};

  std::vector<ImageTensor> candidates;
  std::vector<double> margins;
  candidates.reserve(kToyCandidates);
  for (int i = 0; i < kToyCandidates; ++i) {
    candidates.push_back(random_byte_image(rng));
    LogitVector z = builtin_forward(m, candidates.back());
    margins.push_back(margin_loss(z, predicted_class(z)));
  }

  // the final layer is linear in its weights, so scaling it rescales every
  // margin by the same factor; park the median at 0.8 so the window selects
  // the upper tail of the population
  std::vector<double> sorted = margins;
  std::sort(sorted.begin(), sorted.end());
  double median = sorted[sorted.size() / 2];
  if (median <= 0.0) throw std::runtime_error("degenerate toy model: median margin is 0");
  double scale = 0.8 / median;
  for (double& w : m.layers[2].weights) w *= scale;
  for (double& b : m.layers[2].bias) b *= scale;

  ToyFixture fx;
  fx.model = m;
  for (int i = 0; i < kToyCandidates && static_cast<int>(fx.images.size()) < kToyBatch; ++i) {
    double scaled = margins[i] * scale;
    if (scaled > kMarginLow && scaled < kMarginHigh) {
      fx.images.push_back(candidates[i]);
      fx.margins.push_back(scaled);
    }
  }
  if (static_cast<int>(fx.images.size()) < kToyBatch)
    throw std::runtime_error("toy fixture calibration failed: not enough in-window margins");
  return fx;
}

}  // namespace

const ToyFixture& toy_fixture() {
  static const ToyFixture fx = build_toy_fixture();
  return fx;
}

std::string write_toy_fixture(const std::string& dir, std::vector<std::string>* image_paths) {
  const ToyFixture& fx = toy_fixture();
  std::filesystem::create_directories(dir);
  std::string weights = dir + "/weights.json";
  save_weights(fx.model, weights);
  for (std::size_t i = 0; i < fx.images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img%02zu.png", i);
    std::string path = dir + "/" + name;
    save_png(fx.images[i], path);
    if (image_paths) image_paths->push_back(path);
  }
  return weights;
}

}  // namespace pgattack::testing
