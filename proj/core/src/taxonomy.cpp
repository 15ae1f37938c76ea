#include "mdseg/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mdseg {

std::string normalize_class_name(const std::string& raw) {
  std::string out;
  out.reserve(raw.size());
  bool in_space = true;  // swallow leading whitespace
  for (char c : raw) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!in_space) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

DatasetTaxonomy::DatasetTaxonomy(std::string id, std::vector<std::string> names)
    : dataset_id(std::move(id)) {
  if (dataset_id.empty()) throw std::invalid_argument("taxonomy: empty dataset id");
  classes.reserve(names.size());
  for (const auto& raw : names) {
    std::string name = normalize_class_name(raw);
    if (name.empty())
      throw std::invalid_argument("taxonomy '" + dataset_id + "': empty class name");
    if (index_.count(name))
      throw std::invalid_argument("taxonomy '" + dataset_id + "': duplicate class '" + name +
                                  "'");
    index_.emplace(name, static_cast<int>(classes.size()));
    classes.push_back(std::move(name));
  }
  if (classes.empty())
    throw std::invalid_argument("taxonomy '" + dataset_id + "': no classes");
}

const std::string& DatasetTaxonomy::class_name(int index) const {
  if (index < 0 || index >= num_classes())
    throw std::out_of_range("taxonomy '" + dataset_id + "': class index " +
                            std::to_string(index));
  return classes[index];
}

std::optional<int> DatasetTaxonomy::index_of(const std::string& name) const {
  auto it = index_.find(normalize_class_name(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int TaxonomyRegistry::register_dataset(const DatasetTaxonomy& taxonomy) {
  if (by_id_.count(taxonomy.dataset_id))
    throw std::invalid_argument("registry: dataset '" + taxonomy.dataset_id +
                                "' already registered");
  int idx = static_cast<int>(datasets_.size());
  datasets_.push_back(taxonomy);
  by_id_.emplace(taxonomy.dataset_id, idx);
  return idx;
}

bool TaxonomyRegistry::has(const std::string& dataset_id) const {
  return by_id_.count(dataset_id) > 0;
}

const DatasetTaxonomy& TaxonomyRegistry::get(const std::string& dataset_id) const {
  auto it = by_id_.find(dataset_id);
  if (it == by_id_.end()) {
    std::string known;
    for (const auto& d : datasets_) {
      if (!known.empty()) known += ", ";
      known += d.dataset_id;
    }
    throw std::invalid_argument("registry: unknown dataset '" + dataset_id +
                                "' (registered: " + known + ")");
  }
  return datasets_[it->second];
}

std::vector<std::string> TaxonomyRegistry::ids() const {
  std::vector<std::string> out;
  out.reserve(datasets_.size());
  for (const auto& d : datasets_) out.push_back(d.dataset_id);
  return out;
}

std::vector<std::string> TaxonomyRegistry::shared_classes(
    const std::vector<std::string>& dataset_ids) const {
  std::vector<const DatasetTaxonomy*> sel;
  if (dataset_ids.empty()) {
    for (const auto& d : datasets_) sel.push_back(&d);
  } else {
    for (const auto& id : dataset_ids) sel.push_back(&get(id));
  }
  if (sel.empty()) return {};
  std::vector<std::string> shared = sel[0]->classes;  // keep first dataset's order
  for (size_t i = 1; i < sel.size(); ++i) {
    std::vector<std::string> kept;
    for (const auto& name : shared)
      if (sel[i]->index_of(name)) kept.push_back(name);
    shared = std::move(kept);
  }
  return shared;
}

DatasetTaxonomy load_taxonomy_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open taxonomy manifest: " + path);
  auto trim = [](std::string s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return std::string();
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  };
  std::string line, dataset_id;
  std::vector<std::string> names;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string trimmed = trim(line);  // ids keep their case; class names normalize below
    if (trimmed.empty()) continue;
    if (dataset_id.empty())
      dataset_id = trimmed;
    else
      names.push_back(normalize_class_name(trimmed));
  }
  if (dataset_id.empty())
    throw std::runtime_error("taxonomy manifest has no dataset id: " + path);
  return DatasetTaxonomy(dataset_id, names);
}

void save_taxonomy_manifest(const DatasetTaxonomy& taxonomy, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write taxonomy manifest: " + path);
  out << "# dataset taxonomy: id followed by one class name per line\n";
  out << taxonomy.dataset_id << "\n";
  for (const auto& c : taxonomy.classes) out << c << "\n";
  if (!out) throw std::runtime_error("failed writing taxonomy manifest: " + path);
}

}  // namespace mdseg
