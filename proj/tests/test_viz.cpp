#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <tuple>

#include "mdseg/model.hpp"
#include "mdseg/png_io.hpp"
#include "mdseg/viz.hpp"

using namespace mdseg;

namespace {

TextTable make_table(const std::string& id, const std::vector<std::vector<float>>& rows) {
  TextTable t;
  t.dataset_id = id;
  t.embeddings = ArrayF({static_cast<int>(rows.size()), static_cast<int>(rows[0].size())});
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j)
      t.embeddings.at(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  return t;
}

struct Setup {
  TaxonomyRegistry registry;
  std::vector<TextTable> tables;
};

// two datasets sharing the class "circle"; shared rows are bit-identical, as
// the text pathway produces for equal class names
Setup shared_class_setup() {
  Setup s;
  s.registry.register_dataset(DatasetTaxonomy("alpha", {"circle", "square"}));
  s.registry.register_dataset(DatasetTaxonomy("beta", {"circle", "box"}));
  const std::vector<float> circle = {1.0f, 0.25f, -2.0f, 0.5f};
  const std::vector<float> background = {0.0f, 0.0f, 0.0f, 1.0f};
  s.tables.push_back(make_table("alpha", {circle, {3.0f, -1.0f, 0.0f, 2.0f}, background}));
  s.tables.push_back(make_table("beta", {circle, {-1.5f, 2.0f, 1.0f, -0.5f}, background}));
  return s;
}

}  // namespace

TEST_CASE("projection emits one point per table row, labeled and ordered") {
  Setup s = shared_class_setup();
  std::vector<EmbeddingPoint> pts = project_embeddings(s.tables, s.registry);
  REQUIRE(pts.size() == 6);  // (2+1) + (2+1)
  CHECK(pts[0].dataset_id == "alpha");
  CHECK(pts[0].class_name == "circle");
  CHECK(pts[1].class_name == "square");
  CHECK(pts[2].class_name == "background");
  CHECK(pts[3].dataset_id == "beta");
  CHECK(pts[3].class_name == "circle");
  CHECK(pts[5].class_name == "background");
}

TEST_CASE("shared class names coincide exactly under the linear projection") {
  Setup s = shared_class_setup();
  std::vector<EmbeddingPoint> pts =
      project_embeddings(s.tables, s.registry, ProjectionMethod::Pca);
  // the shared "circle" rows (0 and 3) and "background" rows (2 and 5) are
  // bit-identical inputs, and a linear map keeps them so
  CHECK(pts[0].x == pts[3].x);
  CHECK(pts[0].y == pts[3].y);
  CHECK(pts[2].x == pts[5].x);
  CHECK(pts[2].y == pts[5].y);
  // distinct rows stay distinct
  bool separated = pts[0].x != pts[1].x || pts[0].y != pts[1].y;
  CHECK(separated);
}

TEST_CASE("shared class names end up mutual nearest neighbors in the stochastic layout") {
  Setup s = shared_class_setup();
  std::vector<EmbeddingPoint> pts =
      project_embeddings(s.tables, s.registry, ProjectionMethod::Tsne, 3);
  auto dist = [&](size_t i, size_t j) {
    return std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y);
  };
  // the two "circle" rows attract far more strongly than anything else
  for (size_t other : {size_t(1), size_t(2), size_t(4), size_t(5)})
    CHECK(dist(0, 3) < dist(0, other));
}

TEST_CASE("principal-component projection is deterministic and centered") {
  Setup s = shared_class_setup();
  std::vector<EmbeddingPoint> a = project_embeddings(s.tables, s.registry);
  std::vector<EmbeddingPoint> b = project_embeddings(s.tables, s.registry);
  double mx = 0, my = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].x == b[i].x);
    CHECK(a[i].y == b[i].y);
    mx += a[i].x;
    my += a[i].y;
  }
  CHECK(std::abs(mx / static_cast<double>(a.size())) < 1e-9);
  CHECK(std::abs(my / static_cast<double>(a.size())) < 1e-9);
}

TEST_CASE("planar data survives the linear projection with distances intact") {
  // rows already live in a 2-d subspace: x-spread must dominate, distances in
  // the plane must be preserved up to rotation
  TaxonomyRegistry registry;
  registry.register_dataset(DatasetTaxonomy("flat", {"a", "b", "c"}));
  TextTable t = make_table(
      "flat", {{0, 0, 0, 0}, {2, 0, 0, 0}, {0, 1, 0, 0}, {2, 1, 0, 0}});
  std::vector<EmbeddingPoint> pts = project_embeddings({t}, registry);
  auto dist = [&](int i, int j) {
    return std::hypot(pts[static_cast<size_t>(i)].x - pts[static_cast<size_t>(j)].x,
                      pts[static_cast<size_t>(i)].y - pts[static_cast<size_t>(j)].y);
  };
  CHECK(dist(0, 1) == doctest::Approx(2.0));
  CHECK(dist(0, 2) == doctest::Approx(1.0));
  CHECK(dist(1, 3) == doctest::Approx(1.0));
  CHECK(dist(0, 3) == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("the stochastic layout is reproducible per seed") {
  Setup s = shared_class_setup();
  auto a = project_embeddings(s.tables, s.registry, ProjectionMethod::Tsne, 7);
  auto b = project_embeddings(s.tables, s.registry, ProjectionMethod::Tsne, 7);
  auto c = project_embeddings(s.tables, s.registry, ProjectionMethod::Tsne, 8);
  bool differs = false;
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].x == b[i].x);
    CHECK(a[i].y == b[i].y);
    differs = differs || a[i].x != c[i].x;
  }
  CHECK(differs);
}

TEST_CASE("csv export writes a header and one row per point") {
  Setup s = shared_class_setup();
  std::vector<EmbeddingPoint> pts = project_embeddings(s.tables, s.registry);
  const std::string path = "viz_test.csv";
  write_embedding_csv(pts, path);
  std::ifstream in(path);
  REQUIRE(bool(in));
  std::string line;
  std::getline(in, line);
  CHECK(line == "dataset,class,x,y");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 3);
    CHECK(line.substr(0, line.find(',')) == (rows <= 3 ? "alpha" : "beta"));
  }
  CHECK(rows == 6);
  std::remove(path.c_str());
}

TEST_CASE("scatter export produces a readable image with dataset colors") {
  Setup s = shared_class_setup();
  std::vector<EmbeddingPoint> pts = project_embeddings(s.tables, s.registry);
  const std::string path = "viz_test.png";
  write_scatter_png(pts, path, 120);
  ArrayU8 img = read_png_rgb(path);
  REQUIRE(img.ndim() == 3);
  CHECK(img.dim(0) == 3);
  CHECK(img.dim(1) == 120);
  CHECK(img.dim(2) == 120);
  // counts pixels that are neither white background nor a single hue: the two
  // datasets must contribute two distinct marker colors
  std::set<std::tuple<int, int, int>> colors;
  for (int y = 0; y < 120; ++y)
    for (int x = 0; x < 120; ++x) {
      int r = img.at(0, y, x), g = img.at(1, y, x), b = img.at(2, y, x);
      if (r != 255 || g != 255 || b != 255) colors.insert({r, g, b});
    }
  CHECK(colors.size() == 2);
  std::remove(path.c_str());

  CHECK_THROWS(write_scatter_png({}, path));
  CHECK(!std::filesystem::exists(path));
}

TEST_CASE("method names parse") {
  CHECK(projection_method_from_string("pca") == ProjectionMethod::Pca);
  CHECK(projection_method_from_string("tsne") == ProjectionMethod::Tsne);
  CHECK_THROWS(projection_method_from_string("umap"));
}

TEST_CASE("mismatched tables are rejected") {
  Setup s = shared_class_setup();
  std::vector<TextTable> wrong_order = {s.tables[1], s.tables[0]};
  CHECK_THROWS(project_embeddings(wrong_order, s.registry));
  std::vector<TextTable> short_list = {s.tables[0]};
  CHECK_THROWS(project_embeddings(short_list, s.registry));
}
