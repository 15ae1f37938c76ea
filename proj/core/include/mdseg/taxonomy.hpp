#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace mdseg {

// Lowercase, trim ends, collapse internal whitespace runs to single spaces.
std::string normalize_class_name(const std::string& raw);

// Ordered class list of one dataset. Class indices are positions in `classes`;
// the no-object/background entry is the implicit extra index `num_classes()`.
struct DatasetTaxonomy {
  std::string dataset_id;
  std::vector<std::string> classes;

  DatasetTaxonomy() = default;
  DatasetTaxonomy(std::string id, std::vector<std::string> names);

  int num_classes() const { return static_cast<int>(classes.size()); }
  int background_index() const { return num_classes(); }
  const std::string& class_name(int index) const;
  std::optional<int> index_of(const std::string& name) const;  // normalized lookup

 private:
  std::unordered_map<std::string, int> index_;
};

// All datasets registered for a run. Registration order is part of the
// contract: concatenated text tables and reports follow it.
class TaxonomyRegistry {
 public:
  int register_dataset(const DatasetTaxonomy& taxonomy);  // returns dataset index
  bool has(const std::string& dataset_id) const;
  const DatasetTaxonomy& get(const std::string& dataset_id) const;
  const DatasetTaxonomy& at(int index) const { return datasets_[index]; }
  int size() const { return static_cast<int>(datasets_.size()); }
  const std::vector<DatasetTaxonomy>& all() const { return datasets_; }
  std::vector<std::string> ids() const;

  // class names (normalized) present in every listed dataset; empty list = all registered
  std::vector<std::string> shared_classes(const std::vector<std::string>& dataset_ids = {}) const;

 private:
  std::vector<DatasetTaxonomy> datasets_;
  std::unordered_map<std::string, int> by_id_;
};

// Plain-text manifest: optional '#' comments, first payload line is the
// dataset id, each further line one class name in order.
DatasetTaxonomy load_taxonomy_manifest(const std::string& path);
void save_taxonomy_manifest(const DatasetTaxonomy& taxonomy, const std::string& path);

}  // namespace mdseg
