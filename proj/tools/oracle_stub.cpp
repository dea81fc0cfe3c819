// reference external-oracle process: loads a weights file and answers
// line-delimited json queries on stdin until eof
//   in:  {"id":n,"shape":[h,w,c],"pixels":[...]}
//   out: {"id":n,"logits":[...]}
#include <iostream>
#include <string>

#include "json.hpp"
#include "pgattack/error.hpp"
#include "pgattack/image.hpp"
#include "pgattack/oracle.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: " << argv[0] << " weights.json\n";
    return 2;
  }

  pgattack::Model model;
  try {
    model = pgattack::load_weights(argv[1]);
  } catch (const pgattack::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    try {
      nlohmann::json req = nlohmann::json::parse(line);
      const auto& shape = req.at("shape");
      pgattack::ImageTensor x(shape.at(0).get<int>(), shape.at(1).get<int>(),
                              shape.at(2).get<int>());
      const auto& pixels = req.at("pixels");
      if (pixels.size() != x.data.size()) throw std::runtime_error("pixel count/shape mismatch");
      for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = pixels[i].get<double>();

      pgattack::LogitVector logits = pgattack::builtin_forward(model, x);
      nlohmann::json resp;
      resp["id"] = req.at("id");
      resp["logits"] = logits;
      std::cout << resp.dump() << "\n" << std::flush;
    } catch (const std::exception& e) {
      std::cerr << "error: bad request: " << e.what() << "\n";
      return 2;
    }
  }
  return 0;
}
