#include "mdseg/commands.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "mdseg/checkpoint.hpp"
#include "mdseg/corpus.hpp"
#include "mdseg/trainer.hpp"

namespace fs = std::filesystem;

namespace mdseg {

void cmd_generate_data(const GenerateDataArgs& args, std::ostream* echo) {
  if (args.out_dir.empty()) throw std::invalid_argument("generate: output directory required");
  if (args.train_per_dataset < 1 || args.val_per_dataset < 1)
    throw std::invalid_argument("generate: counts must be positive");
  const fs::path out(args.out_dir);
  if (fs::exists(out)) {
    if (!fs::is_directory(out))
      throw std::runtime_error("generate: " + args.out_dir + " exists and is not a directory");
    if (!fs::is_empty(out) && !args.force)
      throw std::runtime_error("generate: " + args.out_dir +
                               " is not empty (pass force to overwrite)");
  } else {
    const fs::path parent = out.parent_path();
    if (!parent.empty() && !fs::is_directory(parent))
      throw std::runtime_error("generate: parent directory " + parent.string() +
                               " does not exist");
    fs::create_directory(out);
  }
  CorpusSpec spec = standard_corpus();
  spec.seed = args.seed;
  spec.train_per_dataset = args.train_per_dataset;
  spec.val_per_dataset = args.val_per_dataset;
  build_corpus(spec, args.out_dir);
  if (echo) {
    *echo << "wrote corpus to " << args.out_dir << " (seed " << args.seed << ", "
          << args.train_per_dataset << " train + " << args.val_per_dataset
          << " val per dataset)\n";
  }
}

ExperimentConfig cmd_train(const TrainArgs& args, std::ostream* echo) {
  ExperimentConfig cfg;
  if (args.config_path.empty()) {
    cfg = default_config();
    if (!args.overrides.empty())
      cfg = parse_config_json(apply_config_overrides(config_json(cfg), args.overrides));
  } else {
    cfg = load_config_file(args.config_path, args.overrides);
  }
  cfg.validate();
  run_training(cfg, echo);
  if (echo)
    *echo << "saved checkpoint " << cfg.paths.checkpoint << " and log " << cfg.paths.log
          << '\n';
  return cfg;
}

namespace {

// Everything an inference-side command rebuilds from a checkpoint: the val
// split (in the training registration order), taxonomy registry, model, and
// frozen text encoder.
struct CheckpointContext {
  Checkpoint ckpt;
  std::vector<LoadedDataset> val;
  TaxonomyRegistry registry;
  SegModel<float> model;
  SyntheticTextEncoder<float> encoder;

  CheckpointContext(Checkpoint loaded, std::vector<LoadedDataset> split)
      : ckpt(std::move(loaded)),
        val(std::move(split)),
        model(ckpt.config.model),
        encoder(ckpt.config.model.ct, ckpt.config.text_seed) {
    for (const LoadedDataset& ds : val) registry.register_dataset(ds.taxonomy);
  }
};

CheckpointContext open_checkpoint(const std::string& path, const std::string& data_root) {
  Checkpoint ckpt = load_checkpoint(path);
  if (!data_root.empty()) ckpt.config.data_root = data_root;
  std::vector<LoadedDataset> val = load_split(ckpt.config, "val");
  return CheckpointContext(std::move(ckpt), std::move(val));
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace

DatasetEval cmd_eval(const EvalArgs& args, std::ostream* echo) {
  if (args.dataset_id.empty()) throw std::invalid_argument("eval: dataset id required");
  if (args.task != "semantic" && args.task != "panoptic")
    throw std::invalid_argument("eval: task must be 'semantic' or 'panoptic', got '" +
                                args.task + "'");
  CheckpointContext ctx = open_checkpoint(args.checkpoint, args.data_root);
  Predictor predictor =
      Predictor::with_encoder(ctx.model, ctx.ckpt.params, ctx.encoder, ctx.registry,
                              ctx.ckpt.config.loss.tau, ctx.ckpt.config.inference);
  const LoadedDataset* split = nullptr;
  for (const LoadedDataset& ds : ctx.val)
    if (ds.dataset_id() == args.dataset_id) split = &ds;
  if (!split) {
    std::string ids;
    for (const std::string& id : ctx.registry.ids()) ids += (ids.empty() ? "" : ", ") + id;
    throw std::invalid_argument("unknown dataset '" + args.dataset_id +
                                "' (registered: " + ids + ")");
  }
  DatasetEval eval = args.task == "semantic"
                         ? evaluate_semantic(predictor, *split, args.dataset_id)
                         : evaluate_panoptic(predictor, *split, args.dataset_id);
  const std::string report = format_report(eval, ctx.registry.get(args.dataset_id));
  if (!args.report_path.empty()) write_text_file(args.report_path, report);
  if (echo) *echo << report;
  return eval;
}

std::vector<EmbeddingPoint> cmd_embed_viz(const EmbedVizArgs& args, std::ostream* echo) {
  if (args.out_png.empty() && args.out_csv.empty())
    throw std::invalid_argument("embed-viz: an output path (png or csv) is required");
  const ProjectionMethod method = projection_method_from_string(args.method);
  CheckpointContext ctx = open_checkpoint(args.checkpoint, "");
  std::vector<TextTable> tables =
      encode_all_tables(ctx.model, ctx.ckpt.params, ctx.encoder, ctx.registry);
  std::vector<EmbeddingPoint> points =
      project_embeddings(tables, ctx.registry, method, args.seed);
  if (!args.out_csv.empty()) write_embedding_csv(points, args.out_csv);
  if (!args.out_png.empty()) write_scatter_png(points, args.out_png);
  if (echo) {
    *echo << "projected " << points.size() << " class embeddings (" << args.method << ")";
    if (!args.out_png.empty()) *echo << " -> " << args.out_png;
    if (!args.out_csv.empty()) *echo << " -> " << args.out_csv;
    *echo << '\n';
  }
  return points;
}

void cmd_export_embeddings(const ExportEmbeddingsArgs& args, std::ostream* echo) {
  if (args.out_path.empty()) throw std::invalid_argument("export: output path required");
  CheckpointContext ctx = open_checkpoint(args.checkpoint, "");
  std::vector<TextTable> tables =
      encode_all_tables(ctx.model, ctx.ckpt.params, ctx.encoder, ctx.registry);
  save_embedding_cache(tables, ctx.ckpt.config.model.c, args.out_path);
  if (echo)
    *echo << "wrote " << tables.size() << " class-embedding tables to " << args.out_path
          << '\n';
}

}  // namespace mdseg
