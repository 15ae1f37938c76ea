#include <doctest.h>

#include <mdseg/text_encoder.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gradcheck.hpp"

using namespace mdseg;

namespace {

template <typename T>
ParameterStore<T> make_store(const TextPathway<T>& path, uint64_t seed) {
  ParameterStore<T> store;
  Rng rng(seed);
  path.init_params(store, rng);
  return store;
}

double cosine(const ArrayF& a, int i, const ArrayF& b, int j) {
  double dot = 0, na = 0, nb = 0;
  for (int k = 0; k < a.cols(); ++k) {
    dot += static_cast<double>(a.at(i, k)) * b.at(j, k);
    na += static_cast<double>(a.at(i, k)) * a.at(i, k);
    nb += static_cast<double>(b.at(j, k)) * b.at(j, k);
  }
  return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("text: table has K+1 rows and finite entries") {
  TextPathway<float> path;
  auto store = make_store(path, 7);
  SyntheticTextEncoder<float> enc(path.token_dim, 99);
  DatasetTaxonomy toyA("toyA", {"circle", "square"});
  TextTable t = encode_classes(path, store, enc, toyA);
  CHECK(t.embeddings.rows() == 3);
  CHECK(t.embeddings.cols() == path.embed_dim);
  for (float v : t.embeddings.data) CHECK(std::isfinite(v));
}

TEST_CASE("text: shared class names produce identical rows across datasets") {
  TextPathway<float> path;
  auto store = make_store(path, 7);
  SyntheticTextEncoder<float> enc(path.token_dim, 99);
  DatasetTaxonomy a("toyA", {"circle", "square", "triangle"});
  DatasetTaxonomy b("toyB", {"small-circle", "large-circle", "square"});
  TextTable ta = encode_classes(path, store, enc, a);
  TextTable tb = encode_classes(path, store, enc, b);
  int sa = a.index_of("square").value();
  int sb = b.index_of("square").value();
  for (int k = 0; k < path.embed_dim; ++k)
    CHECK(ta.embeddings.at(sa, k) == tb.embeddings.at(sb, k));  // bitwise
  CHECK(cosine(ta.embeddings, sa, tb.embeddings, sb) == doctest::Approx(1.0));
  // background rows are shared too
  for (int k = 0; k < path.embed_dim; ++k)
    CHECK(ta.embeddings.at(3, k) == tb.embeddings.at(3, k));
  // distinct names differ
  bool differs = false;
  for (int k = 0; k < path.embed_dim; ++k)
    if (ta.embeddings.at(0, k) != tb.embeddings.at(0, k)) differs = true;
  CHECK(differs);
}

TEST_CASE("text: encoding is bitwise deterministic within a process") {
  TextPathway<float> path;
  auto store = make_store(path, 11);
  SyntheticTextEncoder<float> enc(path.token_dim, 5);
  DatasetTaxonomy a("toyA", {"circle", "square"});
  TextTable t1 = encode_classes(path, store, enc, a);
  TextTable t2 = encode_classes(path, store, enc, a);
  CHECK(t1.embeddings.data == t2.embeddings.data);
}

TEST_CASE("text: prompt and adapter receive gradients, encoder has no parameters") {
  TextPathway<double> path;
  ParameterStore<double> store;
  Rng rng(13);
  path.init_params(store, rng);
  CHECK(store.names() ==
        std::vector<std::string>{"text.prompt", "text.adapter.w", "text.adapter.b"});

  SyntheticTextEncoder<double> enc(path.token_dim, 42);
  DatasetTaxonomy a("toyA", {"circle", "square"});
  Tape<double> tape;
  ParamBinding<double> p(tape, store);
  Var table = path.encode_table(tape, p, enc, a);
  Var loss = tape.sum_all(tape.mul(table, table));
  tape.backward(loss);
  GradMap<double> grads;
  p.add_grads_to(grads);
  for (const auto& name : store.names()) {
    REQUIRE(grads.count(name));
    double norm = 0;
    for (double g : grads.at(name).data) norm += g * g;
    CAPTURE(name);
    CHECK(norm > 0.0);
  }
}

TEST_CASE("text: encode_table gradients match finite differences") {
  TextPathway<double> path;
  path.token_dim = 16;
  path.embed_dim = 8;
  path.prompt_len = 4;
  ParameterStore<double> store;
  Rng rng(17);
  path.init_params(store, rng);
  SyntheticTextEncoder<double> enc(path.token_dim, 3);
  DatasetTaxonomy a("toyA", {"circle", "square"});

  std::vector<ArrayD> inputs = {store.get("text.prompt"), store.get("text.adapter.w"),
                                store.get("text.adapter.b")};
  auto res = gradcheck::check(inputs, [&](TapeD& t, const std::vector<Var>& in) {
    // rebuild the pathway on raw leaves
    std::vector<Var> rows;
    for (const auto& name : std::vector<std::string>{"circle", "square", kBackgroundName})
      rows.push_back(enc.encode(t, in[0], name));
    Var stacked = t.concat_rows(rows);
    Var table = t.linear(stacked, in[1], in[2]);
    return t.sum_all(t.mul(table, t.tanh_(table)));
  });
  CHECK(res.max_rel < 1e-6);
}

TEST_CASE("text: empty class name is rejected") {
  SyntheticTextEncoder<float> enc(64, 9);
  CHECK_THROWS_AS(enc.base_vector("   "), std::invalid_argument);
}

TEST_CASE("text: file-backed encoder wraps external vectors") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "mdseg_text_test";
  fs::create_directories(dir);
  fs::path file = dir / "vectors.json";
  {
    std::ofstream out(file);
    out << R"({"dim": 4, "vectors": {"Circle": [2, 0, 0, 0], "square": [0, 1, 1, 0]}})";
  }
  auto enc = load_file_backed_encoder(file.string());
  CHECK(enc->token_dim() == 4);
  ArrayF v = enc->base_vector("circle");  // normalized lookup
  CHECK(v.at(0, 0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(enc->base_vector("triangle"), std::invalid_argument);
  CHECK_THROWS_AS(load_file_backed_encoder((dir / "nope.json").string()), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("text: embedding cache round-trips bit-exactly") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "mdseg_cache_test";
  fs::create_directories(dir);
  fs::path file = dir / "emb.bin";

  TextPathway<float> path;
  auto store = make_store(path, 21);
  SyntheticTextEncoder<float> enc(path.token_dim, 77);
  DatasetTaxonomy a("toyA", {"circle", "square", "triangle"});
  DatasetTaxonomy b("toyB", {"small-circle", "large-circle", "square", "triangle"});
  std::vector<TextTable> tables = {encode_classes(path, store, enc, a),
                                   encode_classes(path, store, enc, b)};
  save_embedding_cache(tables, path.embed_dim, file.string());

  auto loaded = load_embedding_cache(file.string(), path.embed_dim);
  REQUIRE(loaded.size() == 2);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(loaded[i].dataset_id == tables[i].dataset_id);
    REQUIRE(loaded[i].embeddings.shape == tables[i].embeddings.shape);
    CHECK(loaded[i].embeddings.data == tables[i].embeddings.data);  // bitwise float32
  }

  CHECK_THROWS_AS(load_embedding_cache(file.string(), path.embed_dim + 1), std::runtime_error);
  CHECK_THROWS_AS(load_embedding_cache((dir / "missing.bin").string()), std::runtime_error);
  {
    std::ofstream out(dir / "junk.bin", std::ios::binary);
    out << "not a cache at all";
  }
  CHECK_THROWS_AS(load_embedding_cache((dir / "junk.bin").string()), std::runtime_error);
  fs::remove_all(dir);
}
