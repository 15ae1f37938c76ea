#include "mdseg/text_encoder.hpp"

#include <fstream>

#include <json.hpp>

namespace mdseg {

std::unique_ptr<FrozenTextEncoder<float>> load_file_backed_encoder(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open text embedding file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bad text embedding file " + path + ": " + e.what());
  }
  if (!j.contains("dim") || !j.contains("vectors"))
    throw std::runtime_error("text embedding file needs 'dim' and 'vectors': " + path);
  int dim = j.at("dim").get<int>();
  std::unordered_map<std::string, std::vector<double>> vectors;
  for (auto& [name, arr] : j.at("vectors").items())
    vectors.emplace(name, arr.get<std::vector<double>>());
  return std::make_unique<FileBackedTextEncoder<float>>(dim, std::move(vectors));
}

}  // namespace mdseg
