#pragma once

#include <string>
#include <vector>

#include "mdseg/dataset_io.hpp"
#include "mdseg/inference.hpp"
#include "mdseg/metrics.hpp"
#include "mdseg/model.hpp"
#include "mdseg/taxonomy.hpp"
#include "mdseg/text_encoder.hpp"

namespace mdseg {

// Inference front end over a trained parameter store.  Mask decoding is
// conditioned once per image on the concatenation of every registered
// dataset's class-embedding table, so the same masks serve any of the
// datasets; classification against one dataset's table happens afterwards.
class Predictor {
 public:
  // tables[i] must belong to registry.at(i).
  Predictor(const SegModel<float>& model, const ParameterStore<float>& params,
            TaxonomyRegistry registry, std::vector<TextTable> tables, double tau,
            InferenceConfig inference = {});

  // Convenience: encode every registered dataset's table with the live encoder.
  static Predictor with_encoder(const SegModel<float>& model,
                                const ParameterStore<float>& params,
                                const FrozenTextEncoder<float>& encoder,
                                const TaxonomyRegistry& registry, double tau,
                                InferenceConfig inference = {});

  const TaxonomyRegistry& registry() const { return registry_; }
  const std::vector<TextTable>& tables() const { return tables_; }
  const InferenceConfig& inference_config() const { return inference_; }
  double tau() const { return tau_; }

  // Decode queries and mask probabilities for one image under the combined
  // conditioning context.  Deterministic: equal inputs give equal outputs.
  SegModel<float>::Decoded decode(const ArrayU8& image) const;

  // Alignment logits (N, K_d + 1) of decoded queries against one dataset's
  // class table.  Unknown ids raise an error listing the registered ids.
  ArrayF classify(const SegModel<float>::Decoded& decoded, const std::string& dataset_id) const;

  SemanticMap semantic(const SegModel<float>::Decoded& decoded,
                       const std::string& dataset_id) const;
  PanopticMap panoptic(const SegModel<float>::Decoded& decoded, const std::string& dataset_id,
                       const std::vector<std::uint8_t>& is_thing = {}) const;

 private:
  const SegModel<float>* model_;
  const ParameterStore<float>* params_;
  TaxonomyRegistry registry_;
  std::vector<TextTable> tables_;
  ArrayF context_;
  double tau_;
  InferenceConfig inference_;
};

struct DatasetEval {
  std::string dataset_id;
  std::string task;  // "semantic" or "panoptic"
  int images = 0;
  SemanticMetrics semantic;  // filled when task == "semantic"
  PanopticMetrics panoptic;  // filled when task == "panoptic"
};

// Decodes every sample once and scores predictions against rasterized ground
// truth (unannotated pixels are excluded from the semantic score).
DatasetEval evaluate_semantic(const Predictor& predictor, const LoadedDataset& val,
                              const std::string& dataset_id);
DatasetEval evaluate_panoptic(const Predictor& predictor, const LoadedDataset& val,
                              const std::string& dataset_id,
                              const std::vector<std::uint8_t>& is_thing = {});

// Plain-text report: one line per class plus the means.
std::string format_report(const DatasetEval& eval, const DatasetTaxonomy& taxonomy);

}  // namespace mdseg
