#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mdseg/checkpoint.hpp"
#include "mdseg/commands.hpp"
#include "mdseg/corpus.hpp"
#include "mdseg/trainer.hpp"

using namespace mdseg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(name) { fs::remove_all(path); }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

GenerateDataArgs small_gen(const std::string& out) {
  GenerateDataArgs args;
  args.out_dir = out;
  args.seed = 3;
  args.train_per_dataset = 4;
  args.val_per_dataset = 2;
  return args;
}

// digest of every regular file (path + contents), order-independent
uint64_t tree_digest(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  uint64_t h = 1469598103934665603ull;
  auto mix = [&](const void* p, size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) h = (h ^ b[i]) * 1099511628211ull;
  };
  for (const fs::path& f : files) {
    std::string rel = fs::relative(f, root).generic_string();
    mix(rel.data(), rel.size());
    std::ifstream in(f, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    mix(bytes.data(), bytes.size());
  }
  return h;
}

// one tiny trained checkpoint shared by the eval/viz/export cases
struct TrainedFixture {
  TempDir corpus{"cmd_corpus_tmp"};
  std::string checkpoint = "cmd_ckpt_tmp.bin";
  std::string log = "cmd_log_tmp.jsonl";
  ExperimentConfig cfg;

  TrainedFixture() {
    cmd_generate_data(small_gen(corpus.str()));
    TrainArgs train;
    train.overrides = {
        "data_root=" + corpus.str(),
        "model.c=8",          "model.ct=12",      "model.ce=8",
        "model.widths=[8,8,8,8]", "model.queries=5",  "model.layers=1",
        "model.heads=2",      "model.prompt_len=3", "model.ffn_mult=2",
        "model.gn_groups=4",  "optim.steps=4",    "optim.warmup=1",
        "optim.batch_size=2", "paths.checkpoint=" + checkpoint,
        "paths.log=" + log,
    };
    cfg = cmd_train(train);
  }
  ~TrainedFixture() {
    std::remove(checkpoint.c_str());
    std::remove(log.c_str());
  }
};

TrainedFixture& fixture() {
  static TrainedFixture f;
  return f;
}

}  // namespace

TEST_CASE("corpus generation is reproducible and layout-complete") {
  TempDir a("gen_tmp_a"), b("gen_tmp_b");
  cmd_generate_data(small_gen(a.str()));
  cmd_generate_data(small_gen(b.str()));
  CHECK(tree_digest(a.path) == tree_digest(b.path));

  for (const char* id : {"toyA", "toyB", "toyC"}) {
    CHECK(fs::exists(a.path / "train" / id / "manifest.json"));
    CHECK(fs::exists(a.path / "val" / id / "taxonomy.txt"));
  }
  std::vector<LoadedDataset> train = load_corpus(a.str(), "train");
  REQUIRE(train.size() == 3);
  CHECK(train[0].size() == 4);
  std::vector<LoadedDataset> val = load_corpus(a.str(), "val");
  CHECK(val[0].size() == 2);

  // a different seed actually changes the data
  GenerateDataArgs other = small_gen(b.str());
  other.seed = 4;
  other.force = true;
  cmd_generate_data(other);
  CHECK(tree_digest(a.path) != tree_digest(b.path));
}

TEST_CASE("generation refuses to clobber and respects force") {
  TempDir dir("gen_tmp_guard");
  cmd_generate_data(small_gen(dir.str()));
  CHECK_THROWS_WITH_AS(cmd_generate_data(small_gen(dir.str())),
                       doctest::Contains("not empty"), std::runtime_error);
  GenerateDataArgs forced = small_gen(dir.str());
  forced.force = true;
  CHECK_NOTHROW(cmd_generate_data(forced));

  GenerateDataArgs nested = small_gen("no_such_parent_tmp/corpus");
  CHECK_THROWS_WITH_AS(cmd_generate_data(nested), doctest::Contains("parent"),
                       std::runtime_error);

  GenerateDataArgs file_target = small_gen("gen_tmp_file");
  { std::ofstream("gen_tmp_file") << "x"; }
  CHECK_THROWS_WITH_AS(cmd_generate_data(file_target),
                       doctest::Contains("not a directory"), std::runtime_error);
  std::remove("gen_tmp_file");
}

TEST_CASE("training command writes the artifacts its config names") {
  TrainedFixture& f = fixture();
  CHECK(fs::exists(f.checkpoint));
  CHECK(fs::exists(f.log));
  CHECK(f.cfg.optim.steps == 4);
  Checkpoint ckpt = load_checkpoint(f.checkpoint);
  CHECK(ckpt.config.model.c == 8);
  CHECK(ckpt.config.data_root == f.corpus.str());
}

TEST_CASE("one checkpoint evaluates against every dataset's own label space") {
  TrainedFixture& f = fixture();
  for (const std::string id : {"toyA", "toyB", "toyC"}) {
    EvalArgs args;
    args.checkpoint = f.checkpoint;
    args.dataset_id = id;
    args.report_path = "cmd_report_" + id + ".txt";
    std::ostringstream echo;
    DatasetEval eval = cmd_eval(args, &echo);
    CHECK(eval.dataset_id == id);
    CHECK(eval.images == 2);

    std::ifstream in(args.report_path);
    REQUIRE(bool(in));
    std::string text((std::istreambuf_iterator<char>(in)), {});
    CHECK(text.find("dataset " + id) == 0);
    CHECK(text.find("task semantic") != std::string::npos);
    CHECK(text.find("mean_iou") != std::string::npos);
    CHECK(echo.str() == text);
    std::remove(args.report_path.c_str());
  }
}

TEST_CASE("per-class report rows follow the dataset's taxonomy") {
  TrainedFixture& f = fixture();
  EvalArgs args;
  args.checkpoint = f.checkpoint;
  args.dataset_id = "toyB";
  std::ostringstream echo;
  DatasetEval eval = cmd_eval(args, &echo);
  CHECK(eval.semantic.iou.size() == 4);  // small-circle, large-circle, square, triangle
  CHECK(echo.str().find("class small-circle iou ") != std::string::npos);
  CHECK(echo.str().find("class large-circle iou ") != std::string::npos);

  args.dataset_id = "toyC";
  args.task = "panoptic";
  std::ostringstream echo2;
  DatasetEval pan = cmd_eval(args, &echo2);
  CHECK(pan.panoptic.pq.size() == 2);  // circle, box
  CHECK(echo2.str().find("pq_mean") != std::string::npos);
}

TEST_CASE("evaluation rejects unknown datasets and tasks by name") {
  TrainedFixture& f = fixture();
  EvalArgs args;
  args.checkpoint = f.checkpoint;
  args.dataset_id = "cityscapes";
  CHECK_THROWS_WITH_AS(cmd_eval(args), doctest::Contains("toyA, toyB, toyC"),
                       std::invalid_argument);
  args.dataset_id = "toyA";
  args.task = "instance";
  CHECK_THROWS_WITH_AS(cmd_eval(args), doctest::Contains("instance"), std::invalid_argument);
}

TEST_CASE("embedding projection command writes both outputs") {
  TrainedFixture& f = fixture();
  EmbedVizArgs args;
  args.checkpoint = f.checkpoint;
  args.out_png = "cmd_viz_tmp.png";
  args.out_csv = "cmd_viz_tmp.csv";
  std::vector<EmbeddingPoint> pts = cmd_embed_viz(args);
  // (3+1) + (4+1) + (2+1) rows across the three datasets
  CHECK(pts.size() == 12);
  CHECK(fs::exists(args.out_png));
  CHECK(fs::exists(args.out_csv));
  std::remove(args.out_png.c_str());
  std::remove(args.out_csv.c_str());

  EmbedVizArgs none;
  none.checkpoint = f.checkpoint;
  CHECK_THROWS(cmd_embed_viz(none));
  EmbedVizArgs bad = args;
  bad.method = "umap";
  CHECK_THROWS(cmd_embed_viz(bad));
}

TEST_CASE("exported embedding tables match a live re-encode bit for bit") {
  TrainedFixture& f = fixture();
  ExportEmbeddingsArgs args;
  args.checkpoint = f.checkpoint;
  args.out_path = "cmd_cache_tmp.bin";
  cmd_export_embeddings(args);

  Checkpoint ckpt = load_checkpoint(f.checkpoint);
  SegModel<float> model(ckpt.config.model);
  SyntheticTextEncoder<float> enc(ckpt.config.model.ct, ckpt.config.text_seed);
  TaxonomyRegistry registry;
  for (const LoadedDataset& ds : load_split(ckpt.config, "val"))
    registry.register_dataset(ds.taxonomy);
  std::vector<TextTable> live = encode_all_tables(model, ckpt.params, enc, registry);
  std::vector<TextTable> cached = load_embedding_cache(args.out_path, ckpt.config.model.c);

  REQUIRE(cached.size() == live.size());
  for (size_t i = 0; i < live.size(); ++i) {
    CHECK(cached[i].dataset_id == live[i].dataset_id);
    REQUIRE(cached[i].embeddings.shape == live[i].embeddings.shape);
    for (size_t j = 0; j < live[i].embeddings.numel(); ++j)
      CHECK(cached[i].embeddings[j] == live[i].embeddings[j]);
  }
  std::remove(args.out_path.c_str());
}
