#ifndef PGATTACK_TESTS_FIXTURES_HPP
#define PGATTACK_TESTS_FIXTURES_HPP

#include <optional>
#include <string>
#include <vector>

#include "pgattack/error.hpp"
#include "pgattack/image.hpp"
#include "pgattack/oracle.hpp"

namespace pgattack::testing {

// runs f and reports which error code it threw, if any
template <typename F>
std::optional<Errc> thrown_code(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// locations handed in by ctest
std::string data_dir();   // committed png fixtures
std::string cli_path();   // built command-line binary
std::string stub_path();  // built external-oracle stub

// fresh directory under the system tmp root; removed lazily by the os, the
// suite does not try to clean up after itself
std::string make_temp_dir(const std::string& tag);

// 2-layer relu net on 2x2 gray inputs with margin exactly 1 at x == 0.5
// everywhere; any nonzero noise on pixel (0,0) flips the class
Model make_flip_model();

// dense(3072->32) + relu + dense(32->10) with weights scaled so a batch of
// byte-valued random 32x32x3 images all sit at margin > 1 but stay flippable
struct ToyFixture {
  Model model;
  std::vector<ImageTensor> images;  // 50 inputs, margins in (1, 2.2)
  std::vector<double> margins;
};

const ToyFixture& toy_fixture();

// write the fixture as files a cli process can use; returns the weights path,
// fills image_paths with the 50 pngs (sorted order)
std::string write_toy_fixture(const std::string& dir, std::vector<std::string>* image_paths);

}  // namespace pgattack::testing

#endif
