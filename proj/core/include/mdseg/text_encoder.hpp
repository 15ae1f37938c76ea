#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mdseg/array.hpp"
#include "mdseg/autodiff.hpp"
#include "mdseg/params.hpp"
#include "mdseg/rng.hpp"
#include "mdseg/taxonomy.hpp"

namespace mdseg {

// the label used for the implicit no-object row of every table
inline const char* kBackgroundName = "background";

// Frozen encoder: holds no trainable parameters. Each class name maps to a
// deterministic unit-norm seed vector; the learnable prompt vectors are mixed
// in by a fixed-weight recurrence so gradients flow into the prompt only.
template <typename T>
class FrozenTextEncoder {
 public:
  virtual ~FrozenTextEncoder() = default;
  virtual int token_dim() const = 0;
  // unit-norm row (1, token_dim), deterministic per canonical class name
  virtual Array<T> base_vector(const std::string& class_name) const = 0;

  // prompt: (L, token_dim). Output: unit-norm row (1, token_dim).
  Var encode(Tape<T>& tape, Var prompt, const std::string& class_name) const {
    const T carry = T(0.85), inject = T(0.15);
    Var h = tape.constant(base_vector(class_name));
    int L = tape.value(prompt).rows();
    for (int l = 0; l < L; ++l) {
      Var v = tape.slice_rows(prompt, l, 1);
      h = tape.tanh_(tape.add(tape.scale(h, carry), tape.scale(v, inject)));
    }
    return tape.l2_normalize_rows(h);
  }
};

// Hash-seeded random unit vectors; stands in for a pretrained text tower.
template <typename T>
class SyntheticTextEncoder : public FrozenTextEncoder<T> {
 public:
  SyntheticTextEncoder(int token_dim, uint64_t seed) : dim_(token_dim), seed_(seed) {}
  int token_dim() const override { return dim_; }

  Array<T> base_vector(const std::string& class_name) const override {
    std::string name = normalize_class_name(class_name);
    if (name.empty()) throw std::invalid_argument("text encoder: empty class name");
    Rng rng(mix64(seed_, fnv1a64(name)));
    Array<T> v({1, dim_});
    rng.fill_normal(v.data, 0.0, 1.0);
    double n = 0;
    for (auto x : v.data) n += static_cast<double>(x) * x;
    T inv = static_cast<T>(1.0 / std::sqrt(n));
    for (auto& x : v.data) x *= inv;
    return v;
  }

 private:
  int dim_;
  uint64_t seed_;
};

// Wrapper for an externally supplied embedding table (one vector per class
// name, e.g. exported from a pretrained image-text model). Vectors are
// unit-normalized at load; unknown names are an error.
template <typename T>
class FileBackedTextEncoder : public FrozenTextEncoder<T> {
 public:
  FileBackedTextEncoder(int token_dim,
                        std::unordered_map<std::string, std::vector<double>> vectors)
      : dim_(token_dim) {
    for (auto& [raw, vec] : vectors) {
      std::string name = normalize_class_name(raw);
      if (static_cast<int>(vec.size()) != dim_)
        throw std::invalid_argument("text encoder: vector for '" + name +
                                    "' has wrong dimension");
      double n = 0;
      for (double x : vec) n += x * x;
      if (n <= 0) throw std::invalid_argument("text encoder: zero vector for '" + name + "'");
      Array<T> row({1, dim_});
      double inv = 1.0 / std::sqrt(n);
      for (int i = 0; i < dim_; ++i) row[i] = static_cast<T>(vec[i] * inv);
      table_.emplace(std::move(name), std::move(row));
    }
  }
  int token_dim() const override { return dim_; }

  Array<T> base_vector(const std::string& class_name) const override {
    auto it = table_.find(normalize_class_name(class_name));
    if (it == table_.end())
      throw std::invalid_argument("text encoder: no vector for class '" + class_name + "'");
    return it->second;
  }

 private:
  int dim_;
  std::unordered_map<std::string, Array<T>> table_;
};

// loads the JSON written alongside external embeddings: {"dim": n, "vectors": {name: [...]}}
std::unique_ptr<FrozenTextEncoder<float>> load_file_backed_encoder(const std::string& path);

// Learnable text pathway: shared prompt context + linear adapter C_t -> C.
template <typename T>
struct TextPathway {
  int token_dim = 64;   // C_t
  int embed_dim = 32;   // C
  int prompt_len = 8;   // L

  void init_params(ParameterStore<T>& store, Rng& rng) const {
    auto& prompt = store.create("text.prompt", {prompt_len, token_dim});
    init_normal(prompt, rng, 0.02);
    auto& w = store.create("text.adapter.w", {embed_dim, token_dim});
    init_xavier_uniform(w, rng, token_dim, embed_dim);
    store.create("text.adapter.b", {embed_dim});
  }

  // (K+1, C) rows: taxonomy classes in order, then the background row
  Var encode_table(Tape<T>& tape, ParamBinding<T>& p, const FrozenTextEncoder<T>& enc,
                   const DatasetTaxonomy& taxonomy) const {
    if (enc.token_dim() != token_dim)
      throw std::invalid_argument("text encoder token dim mismatch");
    Var prompt = p("text.prompt");
    std::vector<Var> rows;
    rows.reserve(taxonomy.num_classes() + 1);
    for (const auto& name : taxonomy.classes) rows.push_back(enc.encode(tape, prompt, name));
    rows.push_back(enc.encode(tape, prompt, kBackgroundName));
    Var stacked = tape.concat_rows(rows);
    return tape.linear(stacked, p("text.adapter.w"), p("text.adapter.b"));
  }
};

// Value-level table, used at inference and in the on-disk cache.
struct TextTable {
  std::string dataset_id;
  ArrayF embeddings;  // (K+1, C)
};

// encode_classes for a frozen parameter state (no gradients kept)
template <typename T>
TextTable encode_classes(const TextPathway<T>& pathway, const ParameterStore<T>& store,
                         const FrozenTextEncoder<T>& enc, const DatasetTaxonomy& taxonomy) {
  Tape<T> tape;
  ParamBinding<T> p(tape, store);
  Var table = pathway.encode_table(tape, p, enc, taxonomy);
  TextTable out;
  out.dataset_id = taxonomy.dataset_id;
  out.embeddings = tape.value(table).template cast<float>();
  return out;
}

// ---- embedding cache (binary, little-endian, float32 payload) ----

void save_embedding_cache(const std::vector<TextTable>& tables, int embed_dim,
                          const std::string& path);
// expected_dim >= 0 enforces the model's C and errors on mismatch
std::vector<TextTable> load_embedding_cache(const std::string& path, int expected_dim = -1);

}  // namespace mdseg
