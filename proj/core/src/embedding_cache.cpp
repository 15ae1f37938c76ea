#include <cstring>
#include <fstream>

#include "mdseg/text_encoder.hpp"

namespace mdseg {

namespace {
constexpr char kMagic[8] = {'M', 'D', 'S', 'G', 'E', 'M', 'B', '1'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::istream& in, const std::string& path) {
  uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw std::runtime_error("truncated embedding cache: " + path);
  return v;
}
}  // namespace

void save_embedding_cache(const std::vector<TextTable>& tables, int embed_dim,
                          const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write embedding cache: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  write_u32(out, static_cast<uint32_t>(embed_dim));
  write_u32(out, static_cast<uint32_t>(tables.size()));
  for (const auto& t : tables) {
    if (t.embeddings.ndim() != 2 || t.embeddings.cols() != embed_dim)
      throw std::invalid_argument("embedding table '" + t.dataset_id +
                                  "' does not match embed dim " + std::to_string(embed_dim));
    write_u32(out, static_cast<uint32_t>(t.dataset_id.size()));
    out.write(t.dataset_id.data(), static_cast<std::streamsize>(t.dataset_id.size()));
    write_u32(out, static_cast<uint32_t>(t.embeddings.rows()));
    out.write(reinterpret_cast<const char*>(t.embeddings.data.data()),
              static_cast<std::streamsize>(t.embeddings.numel() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("failed writing embedding cache: " + path);
}

std::vector<TextTable> load_embedding_cache(const std::string& path, int expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open embedding cache: " + path);
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not an embedding cache: " + path);
  uint32_t version = read_u32(in, path);
  if (version != kVersion)
    throw std::runtime_error("unsupported embedding cache version " + std::to_string(version) +
                             ": " + path);
  int dim = static_cast<int>(read_u32(in, path));
  if (expected_dim >= 0 && dim != expected_dim)
    throw std::runtime_error("embedding cache dimension " + std::to_string(dim) +
                             " does not match expected " + std::to_string(expected_dim) + ": " +
                             path);
  uint32_t count = read_u32(in, path);
  std::vector<TextTable> tables;
  tables.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t id_len = read_u32(in, path);
    std::string id(id_len, '\0');
    if (!in.read(id.data(), id_len))
      throw std::runtime_error("truncated embedding cache: " + path);
    uint32_t rows = read_u32(in, path);
    TextTable t;
    t.dataset_id = std::move(id);
    t.embeddings = ArrayF({static_cast<int>(rows), dim});
    if (!in.read(reinterpret_cast<char*>(t.embeddings.data.data()),
                 static_cast<std::streamsize>(t.embeddings.numel() * sizeof(float))))
      throw std::runtime_error("truncated embedding cache: " + path);
    tables.push_back(std::move(t));
  }
  return tables;
}

}  // namespace mdseg
