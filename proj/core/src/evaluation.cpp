#include "mdseg/evaluation.hpp"

#include <cstdio>
#include <stdexcept>

#include "mdseg/trainer.hpp"

namespace mdseg {

Predictor::Predictor(const SegModel<float>& model, const ParameterStore<float>& params,
                     TaxonomyRegistry registry, std::vector<TextTable> tables, double tau,
                     InferenceConfig inference)
    : model_(&model),
      params_(&params),
      registry_(std::move(registry)),
      tables_(std::move(tables)),
      tau_(tau),
      inference_(inference) {
  inference_.validate();
  if (!(tau_ > 0)) throw std::invalid_argument("predictor: tau must be positive");
  if (static_cast<int>(tables_.size()) != registry_.size())
    throw std::invalid_argument("predictor: one class table per registered dataset required");
  for (int i = 0; i < registry_.size(); ++i) {
    const DatasetTaxonomy& tax = registry_.at(i);
    const TextTable& table = tables_[static_cast<size_t>(i)];
    if (table.dataset_id != tax.dataset_id)
      throw std::invalid_argument("predictor: table order does not match registry (" +
                                  table.dataset_id + " vs " + tax.dataset_id + ")");
    if (table.embeddings.rows() != tax.num_classes() + 1)
      throw std::invalid_argument("predictor: table row count mismatch for " + tax.dataset_id);
  }
  context_ = union_context(tables_);
}

Predictor Predictor::with_encoder(const SegModel<float>& model,
                                  const ParameterStore<float>& params,
                                  const FrozenTextEncoder<float>& encoder,
                                  const TaxonomyRegistry& registry, double tau,
                                  InferenceConfig inference) {
  return Predictor(model, params, registry,
                   encode_all_tables(model, params, encoder, registry), tau, inference);
}

SegModel<float>::Decoded Predictor::decode(const ArrayU8& image) const {
  return model_->decode_image(*params_, image_to_input<float>(image), context_);
}

ArrayF Predictor::classify(const SegModel<float>::Decoded& decoded,
                           const std::string& dataset_id) const {
  for (int i = 0; i < registry_.size(); ++i)
    if (registry_.at(i).dataset_id == dataset_id)
      return SegModel<float>::classify(decoded.queries, tables_[static_cast<size_t>(i)], tau_);
  std::string ids;
  for (const std::string& id : registry_.ids()) ids += (ids.empty() ? "" : ", ") + id;
  throw std::invalid_argument("unknown dataset '" + dataset_id + "' (registered: " + ids + ")");
}

SemanticMap Predictor::semantic(const SegModel<float>::Decoded& decoded,
                                const std::string& dataset_id) const {
  return semantic_inference(classify(decoded, dataset_id), decoded.mask_probs,
                            registry_.get(dataset_id), inference_);
}

PanopticMap Predictor::panoptic(const SegModel<float>::Decoded& decoded,
                                const std::string& dataset_id,
                                const std::vector<std::uint8_t>& is_thing) const {
  return panoptic_inference(classify(decoded, dataset_id), decoded.mask_probs,
                            registry_.get(dataset_id), inference_, is_thing);
}

DatasetEval evaluate_semantic(const Predictor& predictor, const LoadedDataset& val,
                              const std::string& dataset_id) {
  const DatasetTaxonomy& tax = predictor.registry().get(dataset_id);
  SemanticConfusion confusion(tax.num_classes());
  for (const DatasetSample& sample : val.samples) {
    SemanticMap pred = predictor.semantic(predictor.decode(sample.image), dataset_id);
    confusion.add(pred.labels, semantic_map_from_gt(sample.gt, kIgnoreLabel));
  }
  DatasetEval out;
  out.dataset_id = dataset_id;
  out.task = "semantic";
  out.images = val.size();
  out.semantic = miou(confusion);
  return out;
}

DatasetEval evaluate_panoptic(const Predictor& predictor, const LoadedDataset& val,
                              const std::string& dataset_id,
                              const std::vector<std::uint8_t>& is_thing) {
  const DatasetTaxonomy& tax = predictor.registry().get(dataset_id);
  PanopticCounts counts(tax.num_classes());
  for (const DatasetSample& sample : val.samples) {
    PanopticMap pred =
        predictor.panoptic(predictor.decode(sample.image), dataset_id, is_thing);
    counts.add(pred, panoptic_map_from_gt(sample.gt, is_thing));
  }
  DatasetEval out;
  out.dataset_id = dataset_id;
  out.task = "panoptic";
  out.images = val.size();
  out.panoptic = panoptic_quality(counts);
  return out;
}

namespace {
std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}
}  // namespace

std::string format_report(const DatasetEval& eval, const DatasetTaxonomy& taxonomy) {
  if (taxonomy.dataset_id != eval.dataset_id)
    throw std::invalid_argument("report: taxonomy does not match evaluation");
  std::string out;
  out += "dataset " + eval.dataset_id + "\n";
  out += "task " + eval.task + "\n";
  out += "images " + std::to_string(eval.images) + "\n";
  if (eval.task == "semantic") {
    for (int c = 0; c < taxonomy.num_classes(); ++c) {
      const bool present = eval.semantic.present[static_cast<size_t>(c)];
      out += "class " + taxonomy.classes[static_cast<size_t>(c)] + " iou " +
             (present ? num(eval.semantic.iou[static_cast<size_t>(c)]) : std::string("absent")) +
             "\n";
    }
    out += "mean_iou " + num(eval.semantic.mean_iou) + "\n";
  } else {
    for (int c = 0; c < taxonomy.num_classes(); ++c) {
      const size_t i = static_cast<size_t>(c);
      const bool present = eval.panoptic.present[i];
      out += "class " + taxonomy.classes[i];
      if (present)
        out += " pq " + num(eval.panoptic.pq[i]) + " sq " + num(eval.panoptic.sq[i]) +
               " rq " + num(eval.panoptic.rq[i]);
      else
        out += " absent";
      out += "\n";
    }
    out += "pq_mean " + num(eval.panoptic.pq_mean) + "\n";
    out += "sq_mean " + num(eval.panoptic.sq_mean) + "\n";
    out += "rq_mean " + num(eval.panoptic.rq_mean) + "\n";
  }
  return out;
}

}  // namespace mdseg
