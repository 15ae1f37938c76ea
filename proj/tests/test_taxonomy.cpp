#include <doctest.h>

#include <mdseg/taxonomy.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace mdseg;

TEST_CASE("taxonomy: class name normalization") {
  CHECK(normalize_class_name("  Small-Circle ") == "small-circle");
  CHECK(normalize_class_name("LARGE   circle") == "large circle");
  CHECK(normalize_class_name("box") == "box");
  CHECK(normalize_class_name(" \t ") == "");
}

TEST_CASE("taxonomy: indices are stable and background is the extra slot") {
  DatasetTaxonomy tax("toyA", {"circle", "square", "triangle"});
  CHECK(tax.num_classes() == 3);
  CHECK(tax.background_index() == 3);
  CHECK(tax.class_name(1) == "square");
  CHECK(tax.index_of("Square").value() == 1);
  CHECK(!tax.index_of("box").has_value());
}

TEST_CASE("taxonomy: rejects empty and duplicate class names") {
  CHECK_THROWS_AS(DatasetTaxonomy("bad", {"circle", "  "}), std::invalid_argument);
  CHECK_THROWS_AS(DatasetTaxonomy("bad", {"circle", "Circle"}), std::invalid_argument);
  CHECK_THROWS_AS(DatasetTaxonomy("", {"circle"}), std::invalid_argument);
  CHECK_THROWS_AS(DatasetTaxonomy("bad", {}), std::invalid_argument);
}

TEST_CASE("taxonomy: registry lookups and duplicate registration") {
  TaxonomyRegistry reg;
  reg.register_dataset(DatasetTaxonomy("toyA", {"circle", "square", "triangle"}));
  reg.register_dataset(DatasetTaxonomy("toyB", {"small-circle", "large-circle", "square"}));
  CHECK(reg.size() == 2);
  CHECK(reg.has("toyB"));
  CHECK(reg.get("toyA").num_classes() == 3);
  CHECK_THROWS_AS(reg.get("toyZ"), std::invalid_argument);
  CHECK_THROWS_AS(
      reg.register_dataset(DatasetTaxonomy("toyA", {"circle"})), std::invalid_argument);
}

TEST_CASE("taxonomy: shared classes across datasets") {
  TaxonomyRegistry reg;
  reg.register_dataset(DatasetTaxonomy("a", {"circle", "square", "triangle"}));
  reg.register_dataset(DatasetTaxonomy("b", {"square", "small-circle", "triangle"}));
  reg.register_dataset(DatasetTaxonomy("c", {"box", "square"}));
  CHECK(reg.shared_classes() == std::vector<std::string>{"square"});
  CHECK(reg.shared_classes({"a", "b"}) == std::vector<std::string>{"square", "triangle"});
}

TEST_CASE("taxonomy: manifest round-trip") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "mdseg_tax_test";
  fs::create_directories(dir);
  fs::path file = dir / "taxonomy.txt";

  DatasetTaxonomy tax("toyB", {"small-circle", "large-circle", "square", "triangle"});
  save_taxonomy_manifest(tax, file.string());
  DatasetTaxonomy loaded = load_taxonomy_manifest(file.string());
  CHECK(loaded.dataset_id == tax.dataset_id);
  CHECK(loaded.classes == tax.classes);

  {
    std::ofstream out(file);
    out << "# comment only\n\n  toyC  \n Circle \nBOX\n";
  }
  DatasetTaxonomy c = load_taxonomy_manifest(file.string());
  CHECK(c.dataset_id == "toyC");
  CHECK(c.classes == std::vector<std::string>{"circle", "box"});

  CHECK_THROWS_AS(load_taxonomy_manifest((dir / "missing.txt").string()), std::runtime_error);
  fs::remove_all(dir);
}
