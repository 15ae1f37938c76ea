#include "mdseg/viz.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "mdseg/png_io.hpp"
#include "mdseg/rng.hpp"

namespace mdseg {

ProjectionMethod projection_method_from_string(const std::string& s) {
  if (s == "pca") return ProjectionMethod::Pca;
  if (s == "tsne") return ProjectionMethod::Tsne;
  throw std::invalid_argument("projection: unknown method '" + s + "'");
}

namespace {

Eigen::MatrixXd pca_2d(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  Eigen::MatrixXd cov =
      centered.transpose() * centered / std::max<double>(1.0, x.rows() - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("projection: pca failed");
  Eigen::MatrixXd out(x.rows(), 2);
  for (int a = 0; a < 2; ++a) {
    // eigenvalues ascend; take the two largest
    Eigen::VectorXd v = solver.eigenvectors().col(cov.cols() - 1 - a);
    int arg = 0;
    for (int i = 1; i < v.size(); ++i)
      if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    if (v[arg] < 0) v = -v;  // fix the sign so the axis is reproducible
    out.col(a) = centered * v;
  }
  return out;
}

// Exact (quadratic) t-SNE; intended for a few dozen points.
Eigen::MatrixXd tsne_2d(const Eigen::MatrixXd& x, uint64_t seed) {
  const int n = static_cast<int>(x.rows());
  Eigen::MatrixXd d2(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d2(i, j) = (x.row(i) - x.row(j)).squaredNorm();

  const double perplexity = std::max(1.0, std::min(5.0, (n - 1) / 3.0));
  const double target_entropy = std::log(perplexity);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double lo = 1e-12, hi = 1e12, beta = 1.0;
    Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
    for (int it = 0; it < 64; ++it) {
      double sum = 0;
      for (int j = 0; j < n; ++j)
        row[j] = j == i ? 0.0 : std::exp(-beta * d2(i, j)), sum += row[j];
      double entropy = 0;
      if (sum > 0) {
        for (int j = 0; j < n; ++j)
          if (row[j] > 0) {
            double q = row[j] / sum;
            entropy -= q * std::log(q);
          }
        row /= sum;
      }
      if (std::abs(entropy - target_entropy) < 1e-7) break;
      (entropy > target_entropy ? lo : hi) = beta;
      beta = hi > 1e11 ? beta * 2 : (lo + hi) / 2;
    }
    p.row(i) = row;
  }
  p = (p + p.transpose()).eval() / (2.0 * n);
  p = p.cwiseMax(1e-12);

  Rng rng(mix64(seed, fnv1a64("tsne-init")));
  Eigen::MatrixXd y(n, 2), inc = Eigen::MatrixXd::Zero(n, 2);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < 2; ++a) y(i, a) = rng.normal() * 1e-4;

  const int iters = 500;
  for (int it = 0; it < iters; ++it) {
    const double exaggeration = it < 100 ? 12.0 : 1.0;
    Eigen::MatrixXd num(n, n);
    double qsum = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        num(i, j) = i == j ? 0.0 : 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
        qsum += num(i, j);
      }
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, 2);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        double q = std::max(num(i, j) / qsum, 1e-12);
        double coeff = 4.0 * (exaggeration * p(i, j) - q) * num(i, j);
        grad.row(i) += coeff * (y.row(i) - y.row(j));
      }
    const double momentum = it < 250 ? 0.5 : 0.8;
    inc = momentum * inc - 100.0 * grad;
    y += inc;
    y = (y.rowwise() - y.colwise().mean()).eval();
  }
  return y;
}

}  // namespace

std::vector<EmbeddingPoint> project_embeddings(const std::vector<TextTable>& tables,
                                               const TaxonomyRegistry& registry,
                                               ProjectionMethod method, uint64_t seed) {
  if (static_cast<int>(tables.size()) != registry.size())
    throw std::invalid_argument("projection: one table per registered dataset required");
  int rows = 0;
  for (const TextTable& t : tables) {
    if (t.embeddings.ndim() != 2) throw std::invalid_argument("projection: tables must be 2-d");
    rows += t.embeddings.rows();
  }
  if (rows < 2) throw std::invalid_argument("projection: need at least two rows");

  const int dim = tables.front().embeddings.cols();
  Eigen::MatrixXd x(rows, dim);
  std::vector<EmbeddingPoint> points;
  points.reserve(static_cast<size_t>(rows));
  int r = 0;
  for (int t = 0; t < registry.size(); ++t) {
    const DatasetTaxonomy& tax = registry.at(t);
    const TextTable& table = tables[static_cast<size_t>(t)];
    if (table.dataset_id != tax.dataset_id)
      throw std::invalid_argument("projection: table order does not match registry");
    if (table.embeddings.rows() != tax.num_classes() + 1 || table.embeddings.cols() != dim)
      throw std::invalid_argument("projection: bad table shape for " + tax.dataset_id);
    for (int i = 0; i <= tax.num_classes(); ++i, ++r) {
      for (int j = 0; j < dim; ++j) x(r, j) = table.embeddings.at(i, j);
      EmbeddingPoint pt;
      pt.dataset_id = tax.dataset_id;
      pt.class_name = i < tax.num_classes() ? tax.classes[static_cast<size_t>(i)]
                                            : std::string(kBackgroundName);
      points.push_back(std::move(pt));
    }
  }

  Eigen::MatrixXd proj = method == ProjectionMethod::Pca ? pca_2d(x) : tsne_2d(x, seed);
  for (int i = 0; i < rows; ++i) {
    points[static_cast<size_t>(i)].x = proj(i, 0);
    points[static_cast<size_t>(i)].y = proj(i, 1);
  }
  return points;
}

void write_embedding_csv(const std::vector<EmbeddingPoint>& points, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "dataset,class,x,y\n";
  char buf[96];
  for (const EmbeddingPoint& p : points) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g", p.x, p.y);
    out << p.dataset_id << ',' << p.class_name << ',' << buf << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

void write_scatter_png(const std::vector<EmbeddingPoint>& points, const std::string& path,
                       int size) {
  if (points.empty()) throw std::invalid_argument("scatter: no points");
  if (size < 32) throw std::invalid_argument("scatter: image too small");
  double xmin = points[0].x, xmax = points[0].x, ymin = points[0].y, ymax = points[0].y;
  for (const EmbeddingPoint& p : points) {
    xmin = std::min(xmin, p.x), xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y), ymax = std::max(ymax, p.y);
  }
  const double xspan = std::max(xmax - xmin, 1e-9), yspan = std::max(ymax - ymin, 1e-9);
  const int margin = size / 10, inner = size - 2 * margin;

  static const unsigned char palette[][3] = {
      {208, 58, 58}, {44, 114, 196}, {44, 160, 72}, {190, 140, 24},
      {132, 62, 176}, {24, 158, 158}, {200, 82, 156}, {96, 96, 96}};
  std::vector<std::string> ids;
  auto color_of = [&](const std::string& id) {
    size_t k = 0;
    while (k < ids.size() && ids[k] != id) ++k;
    if (k == ids.size()) ids.push_back(id);
    return palette[k % (sizeof palette / sizeof palette[0])];
  };

  ArrayU8 image({3, size, size});
  std::fill(image.data.begin(), image.data.end(), static_cast<unsigned char>(255));
  auto put = [&](int px, int py, const unsigned char* rgb) {
    if (px < 0 || py < 0 || px >= size || py >= size) return;
    for (int c = 0; c < 3; ++c) image.at(c, py, px) = rgb[c];
  };
  for (const EmbeddingPoint& p : points) {
    const unsigned char* rgb = color_of(p.dataset_id);
    int px = margin + static_cast<int>(std::lround((p.x - xmin) / xspan * inner));
    int py = margin + static_cast<int>(std::lround((ymax - p.y) / yspan * inner));
    for (int dy = -3; dy <= 3; ++dy)
      for (int dx = -3; dx <= 3; ++dx)
        if (dx * dx + dy * dy <= 9) put(px + dx, py + dy, rgb);
  }
  write_png_rgb(path, image);
}

}  // namespace mdseg
