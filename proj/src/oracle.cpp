#include "pgattack/oracle.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <utility>

#include "json.hpp"
#include "pgattack/error.hpp"

namespace pgattack {

int predicted_class(const LogitVector& logits) {
  if (logits.empty()) throw Error(Errc::bad_argument, "empty logit vector");
  int best = 0;
  for (int i = 1; i < static_cast<int>(logits.size()); ++i)
    if (logits[i] > logits[best]) best = i;
  return best;
}

LogitVector Oracle::predict_logits(const ImageTensor& x, QueryCounter& counter) {
  if (counter.exhausted())
    throw Error(Errc::budget_exhausted, "query budget exhausted (" +
                                            std::to_string(counter.budget) + " queries)");
  LogitVector out = forward(x);
  ++counter.used;
  ++evals_;
  return out;
}

namespace {

struct Dims {
  int h = 0, w = 0, c = 0;
  std::size_t flat() const { return static_cast<std::size_t>(h) * w * c; }
};

[[noreturn]] void shape_fail(std::size_t layer_idx, const std::string& what) {
  throw Error(Errc::shape_mismatch, "layer " + std::to_string(layer_idx) + ": " + what);
}

}  // namespace

LogitVector builtin_forward(const Model& model, const ImageTensor& x) {
  if (model.layers.empty()) throw Error(Errc::bad_argument, "model has no layers");
  Dims d{x.height, x.width, x.channels};
  std::vector<double> buf = x.data;

  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    const Layer& layer = model.layers[li];
    switch (layer.kind) {
      case Layer::Kind::dense: {
        if (d.flat() != static_cast<std::size_t>(layer.in_dim))
          shape_fail(li, "dense expects " + std::to_string(layer.in_dim) + " inputs, got " +
                             std::to_string(d.flat()));
        std::vector<double> out(layer.out_dim);
        for (int o = 0; o < layer.out_dim; ++o) {
          double acc = layer.bias[o];
          const double* w = layer.weights.data() + static_cast<std::size_t>(o) * layer.in_dim;
          for (int i = 0; i < layer.in_dim; ++i) acc += w[i] * buf[i];
          out[o] = acc;
        }
        buf = std::move(out);
        d = {1, 1, layer.out_dim};
        break;
      }
      case Layer::Kind::conv3x3: {
        if (d.c != layer.in_ch)
          shape_fail(li, "conv expects " + std::to_string(layer.in_ch) + " channels, got " +
                             std::to_string(d.c));
        if (d.h < 3 || d.w < 3) shape_fail(li, "conv needs height and width >= 3");
        int oh = d.h - 2, ow = d.w - 2;
        std::vector<double> out(static_cast<std::size_t>(oh) * ow * layer.out_ch);
        for (int y = 0; y < oh; ++y)
          for (int x2 = 0; x2 < ow; ++x2)
            for (int oc = 0; oc < layer.out_ch; ++oc) {
              double acc = layer.bias[oc];
              for (int ic = 0; ic < layer.in_ch; ++ic)
                for (int ky = 0; ky < 3; ++ky)
                  for (int kx = 0; kx < 3; ++kx) {
                    double wv = layer.weights[((static_cast<std::size_t>(oc) * layer.in_ch + ic) * 3 +
                                               ky) * 3 + kx];
                    double xv = buf[(static_cast<std::size_t>(y + ky) * d.w + (x2 + kx)) * d.c + ic];
                    acc += wv * xv;
                  }
              out[(static_cast<std::size_t>(y) * ow + x2) * layer.out_ch + oc] = acc;
            }
        buf = std::move(out);
        d = {oh, ow, layer.out_ch};
        break;
      }
      case Layer::Kind::avgpool2: {
        if (d.h < 2 || d.w < 2) shape_fail(li, "avgpool needs height and width >= 2");
        int oh = d.h / 2, ow = d.w / 2;
        std::vector<double> out(static_cast<std::size_t>(oh) * ow * d.c);
        for (int y = 0; y < oh; ++y)
          for (int x2 = 0; x2 < ow; ++x2)
            for (int c = 0; c < d.c; ++c) {
              double acc = 0.0;
              for (int ky = 0; ky < 2; ++ky)
                for (int kx = 0; kx < 2; ++kx)
                  acc += buf[(static_cast<std::size_t>(2 * y + ky) * d.w + (2 * x2 + kx)) * d.c + c];
              out[(static_cast<std::size_t>(y) * ow + x2) * d.c + c] = acc / 4.0;
            }
        buf = std::move(out);
        d = {oh, ow, d.c};
        break;
      }
      case Layer::Kind::relu: {
        for (double& v : buf) v = v > 0.0 ? v : 0.0;
        break;
      }
      case Layer::Kind::flatten: {
        d = {1, 1, static_cast<int>(d.flat())};
        break;
      }
    }
  }
  return buf;
}

namespace {

Layer::Kind kind_from_string(const std::string& s) {
  if (s == "dense") return Layer::Kind::dense;
  if (s == "conv3x3") return Layer::Kind::conv3x3;
  if (s == "avgpool2") return Layer::Kind::avgpool2;
  if (s == "relu") return Layer::Kind::relu;
  if (s == "flatten") return Layer::Kind::flatten;
  throw Error(Errc::weights_parse, "unknown layer type \"" + s + "\"");
}

const char* kind_to_string(Layer::Kind k) {
  switch (k) {
    case Layer::Kind::dense: return "dense";
    case Layer::Kind::conv3x3: return "conv3x3";
    case Layer::Kind::avgpool2: return "avgpool2";
    case Layer::Kind::relu: return "relu";
    case Layer::Kind::flatten: return "flatten";
  }
  return "?";
}

// walk the layer chain and reject impossible wiring up front; spatial dims are
// tracked only when the file declares an input shape, element counts otherwise
void validate_chain(const Model& m) {
  bool have_dims = m.input_shape.size() == 3;
  Dims d;
  long flat = -1;  // element count when spatial dims unknown (-1 = anything)
  if (have_dims) {
    d = {m.input_shape[0], m.input_shape[1], m.input_shape[2]};
    if (d.h < 1 || d.w < 1 || d.c < 1)
      throw Error(Errc::weights_shape_chain, "declared input shape must be positive");
    flat = static_cast<long>(d.flat());
  }
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    const Layer& layer = m.layers[li];
    auto fail = [li](const std::string& what) {
      throw Error(Errc::weights_shape_chain, "layer " + std::to_string(li) + ": " + what);
    };
    switch (layer.kind) {
      case Layer::Kind::dense:
        if (layer.in_dim < 1 || layer.out_dim < 1) fail("dense needs positive dimensions");
        if (layer.weights.size() != static_cast<std::size_t>(layer.in_dim) * layer.out_dim)
          fail("dense weight count does not match dimensions");
        if (layer.bias.size() != static_cast<std::size_t>(layer.out_dim))
          fail("dense bias count does not match out dimension");
        if (flat >= 0 && flat != layer.in_dim)
          fail("dense expects " + std::to_string(layer.in_dim) + " inputs but gets " +
               std::to_string(flat));
        have_dims = true;
        d = {1, 1, layer.out_dim};
        flat = layer.out_dim;
        break;
      case Layer::Kind::conv3x3:
        if (layer.in_ch < 1 || layer.out_ch < 1) fail("conv needs positive channel counts");
        if (layer.weights.size() != static_cast<std::size_t>(layer.out_ch) * layer.in_ch * 9)
          fail("conv weight count does not match channels");
        if (layer.bias.size() != static_cast<std::size_t>(layer.out_ch))
          fail("conv bias count does not match out channels");
        if (have_dims) {
          if (d.c != layer.in_ch)
            fail("conv expects " + std::to_string(layer.in_ch) + " channels but gets " +
                 std::to_string(d.c));
          if (d.h < 3 || d.w < 3) fail("conv needs height and width >= 3");
          d = {d.h - 2, d.w - 2, layer.out_ch};
          flat = static_cast<long>(d.flat());
        } else {
          flat = -1;  // can't track element count through conv without dims
        }
        break;
      case Layer::Kind::avgpool2:
        if (have_dims) {
          if (d.h < 2 || d.w < 2) fail("avgpool needs height and width >= 2");
          d = {d.h / 2, d.w / 2, d.c};
          flat = static_cast<long>(d.flat());
        } else {
          flat = -1;
        }
        break;
      case Layer::Kind::relu:
        break;  // shape-preserving
      case Layer::Kind::flatten:
        if (have_dims) {
          d = {1, 1, static_cast<int>(d.flat())};
        }
        break;  // element count unchanged either way
    }
  }
}

}  // namespace

Model load_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_file, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::weights_parse, path + ": " + e.what());
  }

  Model m;
  try {
    if (j.contains("input")) {
      for (const auto& v : j.at("input")) m.input_shape.push_back(v.get<int>());
      if (m.input_shape.size() != 3)
        throw Error(Errc::weights_parse, path + ": input shape must be [h,w,c]");
    }
    for (const auto& jl : j.at("layers")) {
      Layer layer;
      layer.kind = kind_from_string(jl.at("type").get<std::string>());
      if (layer.kind == Layer::Kind::dense) {
        const auto& w = jl.at("w");
        layer.out_dim = static_cast<int>(w.size());
        layer.in_dim = layer.out_dim ? static_cast<int>(w.at(0).size()) : 0;
        for (const auto& row : w) {
          if (static_cast<int>(row.size()) != layer.in_dim)
            throw Error(Errc::weights_parse, path + ": ragged dense weight matrix");
          for (const auto& v : row) layer.weights.push_back(v.get<double>());
        }
        for (const auto& v : jl.at("b")) layer.bias.push_back(v.get<double>());
      } else if (layer.kind == Layer::Kind::conv3x3) {
        const auto& w = jl.at("w");
        layer.out_ch = static_cast<int>(w.size());
        layer.in_ch = layer.out_ch ? static_cast<int>(w.at(0).size()) : 0;
        for (const auto& per_in : w) {
          if (static_cast<int>(per_in.size()) != layer.in_ch)
            throw Error(Errc::weights_parse, path + ": ragged conv weight tensor");
          for (const auto& kmat : per_in) {
            if (kmat.size() != 3)
              throw Error(Errc::weights_parse, path + ": conv kernels must be 3x3");
            for (const auto& krow : kmat) {
              if (krow.size() != 3)
                throw Error(Errc::weights_parse, path + ": conv kernels must be 3x3");
              for (const auto& v : krow) layer.weights.push_back(v.get<double>());
            }
          }
        }
        for (const auto& v : jl.at("b")) layer.bias.push_back(v.get<double>());
      }
      m.layers.push_back(std::move(layer));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::weights_parse, path + ": " + e.what());
  }
  if (m.layers.empty()) throw Error(Errc::weights_parse, path + ": model has no layers");
  validate_chain(m);
  return m;
}

void save_weights(const Model& model, const std::string& path) {
  nlohmann::json j;
  if (!model.input_shape.empty()) j["input"] = model.input_shape;
  j["layers"] = nlohmann::json::array();
  for (const Layer& layer : model.layers) {
    nlohmann::json jl;
    jl["type"] = kind_to_string(layer.kind);
    if (layer.kind == Layer::Kind::dense) {
      nlohmann::json w = nlohmann::json::array();
      for (int o = 0; o < layer.out_dim; ++o) {
        nlohmann::json row = nlohmann::json::array();
        for (int i = 0; i < layer.in_dim; ++i)
          row.push_back(layer.weights[static_cast<std::size_t>(o) * layer.in_dim + i]);
        w.push_back(std::move(row));
      }
      jl["w"] = std::move(w);
      jl["b"] = layer.bias;
    } else if (layer.kind == Layer::Kind::conv3x3) {
      nlohmann::json w = nlohmann::json::array();
      std::size_t idx = 0;
      for (int oc = 0; oc < layer.out_ch; ++oc) {
        nlohmann::json per_in = nlohmann::json::array();
        for (int ic = 0; ic < layer.in_ch; ++ic) {
          nlohmann::json kmat = nlohmann::json::array();
          for (int ky = 0; ky < 3; ++ky) {
            nlohmann::json krow = nlohmann::json::array();
            for (int kx = 0; kx < 3; ++kx) krow.push_back(layer.weights[idx++]);
            kmat.push_back(std::move(krow));
          }
          per_in.push_back(std::move(kmat));
        }
        w.push_back(std::move(per_in));
      }
      jl["w"] = std::move(w);
      jl["b"] = layer.bias;
    }
    j["layers"].push_back(std::move(jl));
  }
  std::ofstream out(path);
  if (!out) throw Error(Errc::io_write, "cannot write " + path);
  out << j.dump() << "\n";
  if (!out) throw Error(Errc::io_write, "write failed: " + path);
}

struct ExternalOracle::Process {
  pid_t pid = -1;
  int in_fd = -1;     // child's stdin (we write requests)
  std::FILE* out = nullptr;  // child's stdout (we read responses)

  ~Process() {
    if (in_fd >= 0) ::close(in_fd);
    if (out) std::fclose(out);
    if (pid > 0) {
      int status = 0;
      ::waitpid(pid, &status, 0);
    }
  }
};

ExternalOracle::ExternalOracle(const std::string& command) : proc_(new Process) {
  // a dead child must surface as an error from write(), not kill the process
  std::signal(SIGPIPE, SIG_IGN);

  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
    throw Error(Errc::oracle_crashed, "pipe failed: " + std::string(std::strerror(errno)));

  pid_t pid = ::fork();
  if (pid < 0) throw Error(Errc::oracle_crashed, "fork failed: " + std::string(std::strerror(errno)));
  if (pid == 0) {
    ::dup2(to_child[0], 0);
    ::dup2(from_child[1], 1);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  proc_->pid = pid;
  proc_->in_fd = to_child[1];
  proc_->out = ::fdopen(from_child[0], "r");
  if (!proc_->out) throw Error(Errc::oracle_crashed, "fdopen failed");
}

ExternalOracle::~ExternalOracle() = default;

LogitVector ExternalOracle::forward(const ImageTensor& x) {
  std::uint64_t id = next_id_++;
  nlohmann::json req;
  req["id"] = id;
  req["shape"] = {x.height, x.width, x.channels};
  req["pixels"] = x.data;
  std::string line = req.dump();
  line.push_back('\n');

  std::size_t sent = 0;
  while (sent < line.size()) {
    ssize_t n = ::write(proc_->in_fd, line.data() + sent, line.size() - sent);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::oracle_crashed, "oracle process not accepting input: " +
                                            std::string(std::strerror(errno)));
    }
    sent += static_cast<std::size_t>(n);
  }

  char* buf = nullptr;
  std::size_t cap = 0;
  ssize_t got = ::getline(&buf, &cap, proc_->out);
  std::string resp_line;
  if (got >= 0) resp_line.assign(buf, static_cast<std::size_t>(got));
  std::free(buf);
  if (got < 0) throw Error(Errc::oracle_crashed, "oracle process closed its output");

  nlohmann::json resp;
  try {
    resp = nlohmann::json::parse(resp_line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::oracle_protocol, "oracle sent unparsable response: " + std::string(e.what()));
  }
  if (!resp.contains("id") || !resp.contains("logits") ||
      resp["id"].get<std::uint64_t>() != id)
    throw Error(Errc::oracle_protocol, "oracle response id/fields do not match the request");
  LogitVector out;
  try {
    for (const auto& v : resp["logits"]) out.push_back(v.get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::oracle_protocol, "oracle logits malformed: " + std::string(e.what()));
  }
  if (out.empty()) throw Error(Errc::oracle_protocol, "oracle sent an empty logit vector");
  return out;
}

}  // namespace pgattack
