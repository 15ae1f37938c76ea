#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "mdseg/array.hpp"
#include "mdseg/autodiff.hpp"
#include "mdseg/backbone.hpp"
#include "mdseg/decoder.hpp"
#include "mdseg/losses.hpp"
#include "mdseg/params.hpp"
#include "mdseg/taxonomy.hpp"
#include "mdseg/text_encoder.hpp"

namespace mdseg {

struct ModelConfig {
  int c = 32;    // shared query/text embedding dim
  int ct = 64;   // frozen text encoder token dim
  int ce = 32;   // pixel embedding dim
  std::vector<int> widths = {16, 32, 64, 128};  // encoder stages; last = token dim
  int queries = 20;
  int layers = 3;
  int heads = 4;
  int prompt_len = 8;
  int ffn_mult = 4;
  int gn_groups = 8;
  AttentionOrder attention_order = AttentionOrder::VisualText;

  int feature_dim() const { return widths.back(); }

  void validate() const {
    if (c < 1 || ct < 1 || ce < 1 || queries < 1 || layers < 0 || heads < 1 ||
        prompt_len < 1 || ffn_mult < 1 || gn_groups < 1)
      throw std::invalid_argument("model config: dims must be positive");
    if (widths.size() != 4) throw std::invalid_argument("model config: want 4 stage widths");
    for (int w : widths)
      if (w < 1) throw std::invalid_argument("model config: stage widths must be positive");
    if (c % heads != 0) throw std::invalid_argument("model config: c % heads != 0");
    if (feature_dim() % 4 != 0)
      throw std::invalid_argument("model config: token dim must be divisible by 4");
    if (widths[0] % gn_groups != 0 || c % gn_groups != 0)
      throw std::invalid_argument("model config: group count must divide stage widths");
  }
};

// Full segmentation network: frozen-text pathway, convolutional backbone with
// pixel decoder, text-conditioned query decoder, and the shared mask head.
template <typename T>
class SegModel {
 public:
  explicit SegModel(ModelConfig cfg = {}) : cfg_(cfg) {
    cfg_.validate();
    text_.token_dim = cfg_.ct;
    text_.embed_dim = cfg_.c;
    text_.prompt_len = cfg_.prompt_len;
    typename Backbone<T>::Config bc;
    bc.widths = cfg_.widths;
    bc.ce = cfg_.ce;
    bc.gn_groups = cfg_.gn_groups;
    backbone_ = Backbone<T>(bc);
    typename QueryDecoder<T>::Config dc;
    dc.n_queries = cfg_.queries;
    dc.c = cfg_.c;
    dc.cf = cfg_.feature_dim();
    dc.heads = cfg_.heads;
    dc.ffn_mult = cfg_.ffn_mult;
    dc.layers = cfg_.layers;
    dc.order = cfg_.attention_order;
    decoder_ = QueryDecoder<T>(dc);
    mask_head_.c = cfg_.c;
    mask_head_.ce = cfg_.ce;
  }

  const ModelConfig& config() const { return cfg_; }
  const TextPathway<T>& text_pathway() const { return text_; }
  const Backbone<T>& backbone() const { return backbone_; }
  const QueryDecoder<T>& decoder() const { return decoder_; }

  void init_params(ParameterStore<T>& store, Rng& rng) const {
    text_.init_params(store, rng);
    backbone_.init_params(store, rng);
    decoder_.init_params(store, rng);
    mask_head_.init_params(store, rng);
  }

  struct Forward {
    Var text_table;  // (K+1, C) conditioning table
    Var queries;     // (N, C)
    Var logits;      // (N, K+1)
    typename MaskHead<T>::Masks masks;
  };

  // Training path: the decoder is conditioned on the sample's own taxonomy
  // table and the same table classifies the queries. detach_alignment scores
  // against a gradient-stopped copy of the table, so text gradients flow only
  // through the decoder's text cross-attention (diagnostic).
  Forward forward_train(Tape<T>& tape, ParamBinding<T>& p, const FrozenTextEncoder<T>& enc,
                        const DatasetTaxonomy& taxonomy, const Array<T>& image, double tau,
                        bool detach_alignment = false) const {
    Forward out;
    out.text_table = text_.encode_table(tape, p, enc, taxonomy);
    out.queries = decode_queries(tape, p, image, out.text_table, &out.masks);
    Var align = out.text_table;
    if (detach_alignment) {
      Array<T> frozen = tape.value(out.text_table);
      align = tape.constant(frozen);
    }
    out.logits = alignment_logits(tape, out.queries, align, tau);
    return out;
  }

  // Decode against an arbitrary (M, C) conditioning table (e.g. the
  // row-concatenation of every registered dataset's table).
  Var decode_queries(Tape<T>& tape, ParamBinding<T>& p, const Array<T>& image, Var table,
                     typename MaskHead<T>::Masks* masks) const {
    BackboneFeatures<T> feats = backbone_.extract_features(tape, p, image);
    Var pixel = backbone_.pixel_decode(tape, p, feats);
    int cf = cfg_.feature_dim();
    Var tokens = tape.transpose(tape.reshape(feats.f, {cf, feats.fh * feats.fw}));
    Var vis_pos = tape.constant(sincos_position_grid<T>(feats.fh, feats.fw, cf));
    Var queries = decoder_.decode(tape, p, tokens, vis_pos, table);
    if (masks) *masks = mask_head_.predict_masks(tape, p, queries, pixel);
    return queries;
  }

  struct Decoded {
    ArrayF queries;     // (N, C)
    ArrayF mask_probs;  // (N, H, W)
  };

  // Value-level inference under a fixed parameter state. The context table
  // fixes the conditioning; classification against any one dataset's table
  // happens afterwards via classify().
  Decoded decode_image(const ParameterStore<T>& store, const Array<T>& image,
                       const ArrayF& context) const {
    if (context.ndim() != 2 || context.cols() != cfg_.c)
      throw std::invalid_argument("decode: context table must be (M, C)");
    Tape<T> tape;
    ParamBinding<T> p(tape, store);
    Var table = tape.constant(context.template cast<T>());
    typename MaskHead<T>::Masks masks;
    Var queries = decode_queries(tape, p, image, table, &masks);
    Decoded out;
    out.queries = tape.value(queries).template cast<float>();
    Array<T> probs = tape.value(masks.probs);
    out.mask_probs = Array<T>({tape.value(queries).rows(), masks.h, masks.w},
                              std::move(probs.data))
                         .template cast<float>();
    return out;
  }

  // Eq.-style raw dot-product scores of fixed queries against one table.
  static ArrayF classify(const ArrayF& queries, const TextTable& table, double tau) {
    return alignment_logits_value(queries, table.embeddings, tau);
  }

 private:
  ModelConfig cfg_;
  TextPathway<T> text_;
  Backbone<T> backbone_;
  QueryDecoder<T> decoder_;
  MaskHead<T> mask_head_;
};

// Text tables for every registered dataset, registration order.
template <typename T>
std::vector<TextTable> encode_all_tables(const SegModel<T>& model, const ParameterStore<T>& store,
                                         const FrozenTextEncoder<T>& enc,
                                         const TaxonomyRegistry& registry) {
  std::vector<TextTable> tables;
  tables.reserve(registry.size());
  for (const auto& tax : registry.all())
    tables.push_back(encode_classes(model.text_pathway(), store, enc, tax));
  return tables;
}

// Row-concatenation of the given tables (their order defines the row order).
inline ArrayF union_context(const std::vector<TextTable>& tables) {
  if (tables.empty()) throw std::invalid_argument("union context: no tables");
  int c = tables[0].embeddings.cols();
  int rows = 0;
  for (const auto& t : tables) {
    if (t.embeddings.ndim() != 2 || t.embeddings.cols() != c)
      throw std::invalid_argument("union context: table dims disagree");
    rows += t.embeddings.rows();
  }
  ArrayF out({rows, c});
  float* dst = out.data.data();
  for (const auto& t : tables) {
    std::copy(t.embeddings.data.begin(), t.embeddings.data.end(), dst);
    dst += t.embeddings.numel();
  }
  return out;
}

}  // namespace mdseg
