#pragma once

#include <string>
#include <vector>

#include "mdseg/taxonomy.hpp"
#include "mdseg/text_encoder.hpp"

namespace mdseg {

struct EmbeddingPoint {
  std::string dataset_id;
  std::string class_name;  // includes one "background" row per dataset
  double x = 0, y = 0;
};

enum class ProjectionMethod { Pca, Tsne };

ProjectionMethod projection_method_from_string(const std::string& s);

// Projects every row of every class-embedding table to 2D.  tables[i] must
// belong to registry.at(i).  PCA is deterministic (fixed sign convention) and,
// being linear, maps identical embedding rows to identical points; the exact
// t-SNE uses the seed for its initial layout and is reproducible per seed.
std::vector<EmbeddingPoint> project_embeddings(const std::vector<TextTable>& tables,
                                               const TaxonomyRegistry& registry,
                                               ProjectionMethod method = ProjectionMethod::Pca,
                                               uint64_t seed = 1);

// CSV with header dataset,class,x,y (%.9g coordinates).
void write_embedding_csv(const std::vector<EmbeddingPoint>& points, const std::string& path);

// Square scatter plot, one color per dataset, white background.
void write_scatter_png(const std::vector<EmbeddingPoint>& points, const std::string& path,
                       int size = 600);

}  // namespace mdseg
