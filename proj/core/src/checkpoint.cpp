#include "mdseg/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace mdseg {
namespace {

constexpr char kMagic[8] = {'M', 'D', 'S', 'E', 'G', 'C', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void write_bytes(std::ostream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_pod(std::ostream& out, T v) {
  write_bytes(out, &v, sizeof(v));
}

void read_bytes(std::istream& in, void* p, size_t n, const char* what) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n)
    throw std::runtime_error(std::string("checkpoint: truncated while reading ") + what);
}

template <typename T>
T read_pod(std::istream& in, const char* what) {
  T v;
  read_bytes(in, &v, sizeof(v), what);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ExperimentConfig& config,
                     const ParameterStore<float>& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  write_bytes(out, kMagic, sizeof(kMagic));
  write_pod(out, kVersion);

  std::string cfg = config_json(config);
  write_pod(out, static_cast<uint64_t>(cfg.size()));
  write_bytes(out, cfg.data(), cfg.size());

  write_pod(out, static_cast<uint32_t>(params.names().size()));
  for (const auto& name : params.names()) {
    const ArrayF& a = params.get(name);
    write_pod(out, static_cast<uint32_t>(name.size()));
    write_bytes(out, name.data(), name.size());
    write_pod(out, static_cast<uint32_t>(a.shape.size()));
    for (int d : a.shape) write_pod(out, static_cast<int32_t>(d));
    write_bytes(out, a.data.data(), a.numel() * sizeof(float));
  }
  if (!out) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");

  char magic[sizeof(kMagic)];
  read_bytes(in, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: '" + path + "' is not a checkpoint file");
  uint32_t version = read_pod<uint32_t>(in, "version");
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported format version " +
                             std::to_string(version));

  uint64_t cfg_len = read_pod<uint64_t>(in, "config length");
  if (cfg_len > (64u << 20)) throw std::runtime_error("checkpoint: config block too large");
  std::string cfg_text(cfg_len, '\0');
  read_bytes(in, cfg_text.data(), cfg_len, "config");

  Checkpoint ckpt;
  ckpt.config = parse_config_json(cfg_text);

  uint32_t count = read_pod<uint32_t>(in, "parameter count");
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t name_len = read_pod<uint32_t>(in, "name length");
    if (name_len == 0 || name_len > 4096)
      throw std::runtime_error("checkpoint: bad parameter name length");
    std::string name(name_len, '\0');
    read_bytes(in, name.data(), name_len, "name");
    uint32_t ndim = read_pod<uint32_t>(in, "rank");
    if (ndim > 8) throw std::runtime_error("checkpoint: bad parameter rank");
    std::vector<int> shape(ndim);
    size_t numel = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      int32_t v = read_pod<int32_t>(in, "dimension");
      if (v < 1) throw std::runtime_error("checkpoint: bad dimension");
      shape[d] = v;
      numel *= static_cast<size_t>(v);
    }
    if (numel > (1u << 28)) throw std::runtime_error("checkpoint: parameter too large");
    ArrayF& a = ckpt.params.create(name, shape);
    read_bytes(in, a.data.data(), numel * sizeof(float), "parameter data");
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw std::runtime_error("checkpoint: trailing bytes after last parameter");
  return ckpt;
}

}  // namespace mdseg
