#ifndef PGATTACK_ERROR_HPP
#define PGATTACK_ERROR_HPP

#include <stdexcept>
#include <string>

namespace pgattack {

enum class Errc {
  missing_file,
  unsupported_png,
  png_decode,
  io_write,
  shape_mismatch,
  bad_argument,
  budget_exhausted,
  weights_parse,
  weights_shape_chain,
  oracle_protocol,
  oracle_crashed,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

}  // namespace pgattack

#endif
