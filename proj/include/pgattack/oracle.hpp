#ifndef PGATTACK_ORACLE_HPP
#define PGATTACK_ORACLE_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pgattack/image.hpp"

namespace pgattack {

using LogitVector = std::vector<double>;

struct QueryCounter {
  long used = 0;
  long budget = 0;
  bool exhausted() const { return used >= budget; }
};

// lowest index wins ties, so "same argmax" never flaps between queries
int predicted_class(const LogitVector& logits);

struct Layer {
  enum class Kind { dense, conv3x3, avgpool2, relu, flatten };
  Kind kind = Kind::relu;
  // dense: weights[out][in] row-major, bias[out]
  int out_dim = 0;
  int in_dim = 0;
  // conv3x3: weights[out_ch][in_ch][3][3] row-major, bias[out_ch]; stride 1, no padding
  int out_ch = 0;
  int in_ch = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  bool operator==(const Layer&) const = default;
};

struct Model {
  std::vector<Layer> layers;
  std::vector<int> input_shape;  // {H,W,C} when declared; empty otherwise

  bool operator==(const Model&) const = default;
};

Model load_weights(const std::string& path);
void save_weights(const Model& model, const std::string& path);

// full forward pass; dense layers flatten implicitly
LogitVector builtin_forward(const Model& model, const ImageTensor& x);

// every model evaluation used by an attack goes through predict_logits, which
// refuses to run once the budget is spent and bumps the counter on each call
class Oracle {
 public:
  virtual ~Oracle() = default;
  Oracle() = default;
  Oracle(const Oracle&) = delete;
  Oracle& operator=(const Oracle&) = delete;

  LogitVector predict_logits(const ImageTensor& x, QueryCounter& counter);

  // lifetime total across all counters; lets tests confirm nothing bypassed
  // the counted path
  long total_evaluations() const { return evals_; }

 protected:
  virtual LogitVector forward(const ImageTensor& x) = 0;

 private:
  long evals_ = 0;
};

class BuiltinOracle : public Oracle {
 public:
  explicit BuiltinOracle(Model model) : model_(std::move(model)) {}
  const Model& model() const { return model_; }

 protected:
  LogitVector forward(const ImageTensor& x) override { return builtin_forward(model_, x); }

 private:
  Model model_;
};

// child process speaking line-delimited json on stdin/stdout:
//   request  {"id":n,"shape":[h,w,c],"pixels":[...]}
//   response {"id":n,"logits":[...]}
// strictly one request in flight; a response with the wrong id is a protocol
// violation, a closed pipe means the child died
class ExternalOracle : public Oracle {
 public:
  explicit ExternalOracle(const std::string& command);
  ~ExternalOracle() override;

 protected:
  LogitVector forward(const ImageTensor& x) override;

 private:
  struct Process;
  std::unique_ptr<Process> proc_;
  std::uint64_t next_id_ = 0;
};

}  // namespace pgattack

#endif
