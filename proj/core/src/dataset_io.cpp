#include "mdseg/dataset_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "mdseg/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mdseg {

namespace {

std::string sample_stem(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d", index);
  return buf;
}

}  // namespace

void write_dataset(const std::string& dir, const DatasetTaxonomy& taxonomy,
                   const std::vector<DatasetSample>& samples) {
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "masks");
  save_taxonomy_manifest(taxonomy, (fs::path(dir) / "taxonomy.txt").string());

  json manifest;
  manifest["dataset_id"] = taxonomy.dataset_id;
  manifest["taxonomy"] = "taxonomy.txt";
  manifest["samples"] = json::array();
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    std::string stem = sample_stem(static_cast<int>(i));
    std::string image_rel = "images/" + stem + ".png";
    write_png_rgb((fs::path(dir) / image_rel).string(), s.image);

    json rec;
    rec["image"] = image_rel;
    rec["height"] = s.gt.height;
    rec["width"] = s.gt.width;
    rec["masks"] = json::array();
    for (size_t m = 0; m < s.gt.instances.size(); ++m) {
      const auto& inst = s.gt.instances[m];
      std::string mask_rel = "masks/" + stem + "_" + sample_stem(static_cast<int>(m)) + ".png";
      ArrayU8 vis = inst.mask;
      for (auto& v : vis.data) v = v ? 255 : 0;
      write_png_gray((fs::path(dir) / mask_rel).string(), vis);
      rec["masks"].push_back({{"file", mask_rel}, {"class_index", inst.class_index}});
    }
    manifest["samples"].push_back(std::move(rec));
  }

  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw std::runtime_error("dataset: cannot write manifest in " + dir);
  out << manifest.dump(1) << "\n";
}

LoadedDataset load_dataset(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw std::runtime_error("dataset: missing manifest in " + dir);
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw std::runtime_error("dataset: bad manifest in " + dir + ": " + e.what());
  }
  if (!manifest.contains("dataset_id") || !manifest.contains("taxonomy") ||
      !manifest.contains("samples"))
    throw std::runtime_error("dataset: manifest missing fields in " + dir);

  LoadedDataset ds;
  ds.taxonomy = load_taxonomy_manifest(
      (fs::path(dir) / manifest["taxonomy"].get<std::string>()).string());
  if (ds.taxonomy.dataset_id != manifest["dataset_id"].get<std::string>())
    throw std::runtime_error("dataset: manifest/taxonomy id mismatch in " + dir);

  for (const auto& rec : manifest["samples"]) {
    DatasetSample s;
    s.image = read_png_rgb((fs::path(dir) / rec["image"].get<std::string>()).string());
    s.gt.height = rec["height"].get<int>();
    s.gt.width = rec["width"].get<int>();
    if (s.image.dim(1) != s.gt.height || s.image.dim(2) != s.gt.width)
      throw std::runtime_error("dataset: image size disagrees with manifest in " + dir);
    for (const auto& m : rec["masks"]) {
      GtInstance inst;
      inst.class_index = m["class_index"].get<int>();
      inst.mask = read_png_gray((fs::path(dir) / m["file"].get<std::string>()).string());
      for (auto& v : inst.mask.data) v = v > 127 ? 1 : 0;
      s.gt.instances.push_back(std::move(inst));
    }
    s.gt.validate(ds.taxonomy.num_classes());
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace mdseg
