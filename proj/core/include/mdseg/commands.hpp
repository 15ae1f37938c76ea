#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "mdseg/config.hpp"
#include "mdseg/evaluation.hpp"
#include "mdseg/viz.hpp"

namespace mdseg {

// Library-level entry points behind the command-line subcommands.  Each takes
// a plain argument struct so tests can drive them without a shell, and writes
// progress to `echo` when given.

struct GenerateDataArgs {
  std::string out_dir;
  std::uint64_t seed = 1;
  int train_per_dataset = 500;
  int val_per_dataset = 100;
  bool force = false;  // allow writing into an existing non-empty directory
};

// Builds the three-dataset synthetic corpus.  Refuses an existing non-empty
// output directory unless force is set; the parent directory must exist.
void cmd_generate_data(const GenerateDataArgs& args, std::ostream* echo = nullptr);

struct TrainArgs {
  std::string config_path;             // empty = built-in defaults
  std::vector<std::string> overrides;  // dotted.path=value
};

// Runs a full training job and returns the effective configuration (whose
// paths locate the checkpoint and log it produced).
ExperimentConfig cmd_train(const TrainArgs& args, std::ostream* echo = nullptr);

struct EvalArgs {
  std::string checkpoint = "checkpoint.bin";
  std::string dataset_id;
  std::string task = "semantic";  // or "panoptic"
  std::string report_path;        // empty = no file
  std::string data_root;          // empty = path stored in the checkpoint
};

DatasetEval cmd_eval(const EvalArgs& args, std::ostream* echo = nullptr);

struct EmbedVizArgs {
  std::string checkpoint = "checkpoint.bin";
  std::string out_png;  // at least one output path is required
  std::string out_csv;
  std::string method = "pca";  // or "tsne"
  std::uint64_t seed = 1;
};

std::vector<EmbeddingPoint> cmd_embed_viz(const EmbedVizArgs& args, std::ostream* echo = nullptr);

struct ExportEmbeddingsArgs {
  std::string checkpoint = "checkpoint.bin";
  std::string out_path;
};

// Writes the checkpoint's class-embedding tables to a reusable cache file.
void cmd_export_embeddings(const ExportEmbeddingsArgs& args, std::ostream* echo = nullptr);

}  // namespace mdseg
