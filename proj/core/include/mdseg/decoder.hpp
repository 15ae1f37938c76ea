#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mdseg/array.hpp"
#include "mdseg/autodiff.hpp"
#include "mdseg/params.hpp"

namespace mdseg {

// Fixed 2-D sine/cosine positional encoding for a flattened (fh*fw, dim) token
// grid; dim is split evenly between the y and x axes.
template <typename T>
Array<T> sincos_position_grid(int fh, int fw, int dim) {
  if (dim % 4 != 0) throw std::invalid_argument("position grid: dim must be divisible by 4");
  int half = dim / 2;   // per axis
  int pairs = half / 2; // sin/cos pairs per axis
  Array<T> out({fh * fw, dim});
  for (int y = 0; y < fh; ++y)
    for (int x = 0; x < fw; ++x) {
      int row = y * fw + x;
      for (int i = 0; i < pairs; ++i) {
        double freq = std::pow(10000.0, -2.0 * i / half);
        out.at(row, 2 * i) = static_cast<T>(std::sin(y * freq));
        out.at(row, 2 * i + 1) = static_cast<T>(std::cos(y * freq));
        out.at(row, half + 2 * i) = static_cast<T>(std::sin(x * freq));
        out.at(row, half + 2 * i + 1) = static_cast<T>(std::cos(x * freq));
      }
    }
  return out;
}

// q, k, v are already projected to (rows, C); C split across heads.
template <typename T>
Var multihead_attention(Tape<T>& tape, Var q, Var k, Var v, int heads) {
  int c = tape.value(q).cols();
  if (c % heads != 0) throw std::invalid_argument("attention: C % heads != 0");
  int dh = c / heads;
  T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  std::vector<Var> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Var qh = tape.slice_cols(q, h * dh, dh);
    Var kh = tape.slice_cols(k, h * dh, dh);
    Var vh = tape.slice_cols(v, h * dh, dh);
    Var scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_sqrt);
    outs.push_back(tape.matmul(tape.softmax_rows(scores), vh));
  }
  return tape.concat_cols(outs);
}

enum class AttentionOrder { VisualText, TextVisual };

inline const char* to_string(AttentionOrder o) {
  return o == AttentionOrder::VisualText ? "visual-text" : "text-visual";
}
inline AttentionOrder attention_order_from_string(const std::string& s) {
  if (s == "visual-text") return AttentionOrder::VisualText;
  if (s == "text-visual") return AttentionOrder::TextVisual;
  throw std::invalid_argument("unknown attention order '" + s + "'");
}

// Stack of pre-norm decoder layers: self-attention over query slots, cross
// attention into image tokens, cross attention into the class-text table, FFN.
// Query content starts at zero; the learnable per-slot positional encodings
// are added to attention queries/keys, never to values.
template <typename T>
class QueryDecoder {
 public:
  struct Config {
    int n_queries = 20;
    int c = 32;       // query/text dim C
    int cf = 128;     // image token dim C_F
    int heads = 4;
    int ffn_mult = 4;
    int layers = 3;
    AttentionOrder order = AttentionOrder::VisualText;
  };

  explicit QueryDecoder(Config cfg = {}) : cfg_(std::move(cfg)) {}
  const Config& config() const { return cfg_; }

  void init_params(ParameterStore<T>& store, Rng& rng) const {
    init_normal(store.create("decoder.query_pos", {cfg_.n_queries, cfg_.c}), rng, 1.0);
    for (int l = 0; l < cfg_.layers; ++l) {
      std::string pre = layer_prefix(l);
      init_attn(store, rng, pre + "self", cfg_.c);
      init_attn(store, rng, pre + "ci", cfg_.cf);
      init_attn(store, rng, pre + "ct", cfg_.c);
      init_ones(store.create(pre + "ffn.norm.g", {cfg_.c}));
      store.create(pre + "ffn.norm.b", {cfg_.c});
      int hidden = cfg_.ffn_mult * cfg_.c;
      init_xavier_uniform(store.create(pre + "ffn.w1", {hidden, cfg_.c}), rng, cfg_.c, hidden);
      store.create(pre + "ffn.b1", {hidden});
      init_xavier_uniform(store.create(pre + "ffn.w2", {cfg_.c, hidden}), rng, hidden, cfg_.c);
      store.create(pre + "ffn.b2", {cfg_.c});
    }
  }

  // vis_tokens: (S, C_F); vis_pos: fixed (S, C_F); text: (K+1, C).
  // query_pos defaults to the learned parameter; pass a Var to override (tests).
  Var decode(Tape<T>& tape, ParamBinding<T>& p, Var vis_tokens, Var vis_pos, Var text,
             Var query_pos_override = {}) const {
    if (tape.value(text).cols() != cfg_.c)
      throw std::invalid_argument("decoder: text table dim != C");
    if (tape.value(vis_tokens).cols() != cfg_.cf)
      throw std::invalid_argument("decoder: visual token dim != C_F");
    Var pos = query_pos_override.valid() ? query_pos_override : p("decoder.query_pos");
    Var x = tape.zeros({cfg_.n_queries, cfg_.c});
    Var vis_k = tape.add(vis_tokens, vis_pos);
    for (int l = 0; l < cfg_.layers; ++l)
      x = layer(tape, p, layer_prefix(l), x, pos, vis_tokens, vis_k, text);
    return x;
  }

  Var layer(Tape<T>& tape, ParamBinding<T>& p, const std::string& pre, Var x, Var pos,
            Var vis_tokens, Var vis_k, Var text) const {
    x = tape.add(x, self_attn(tape, p, pre + "self", x, pos));
    auto cross_image = [&](Var q) {
      return tape.add(q, attn_pre(tape, p, pre + "ci", q, pos, vis_k, vis_tokens));
    };
    auto cross_text = [&](Var q) {
      return tape.add(q, attn_pre(tape, p, pre + "ct", q, pos, text, text));
    };
    if (cfg_.order == AttentionOrder::VisualText) {
      x = cross_image(x);
      x = cross_text(x);
    } else {
      x = cross_text(x);
      x = cross_image(x);
    }
    // FFN
    Var t = tape.layer_norm_rows(x, p(pre + "ffn.norm.g"), p(pre + "ffn.norm.b"), T(1e-5));
    Var h = tape.gelu(tape.linear(t, p(pre + "ffn.w1"), p(pre + "ffn.b1")));
    return tape.add(x, tape.linear(h, p(pre + "ffn.w2"), p(pre + "ffn.b2")));
  }

 private:
  static std::string layer_prefix(int l) { return "decoder.layer" + std::to_string(l) + "."; }

  void init_attn(ParameterStore<T>& store, Rng& rng, const std::string& pre, int kv_dim) const {
    init_ones(store.create(pre + ".norm.g", {cfg_.c}));
    store.create(pre + ".norm.b", {cfg_.c});
    init_xavier_uniform(store.create(pre + ".wq", {cfg_.c, cfg_.c}), rng, cfg_.c, cfg_.c);
    store.create(pre + ".bq", {cfg_.c});
    init_xavier_uniform(store.create(pre + ".wk", {cfg_.c, kv_dim}), rng, kv_dim, cfg_.c);
    store.create(pre + ".bk", {cfg_.c});
    init_xavier_uniform(store.create(pre + ".wv", {cfg_.c, kv_dim}), rng, kv_dim, cfg_.c);
    store.create(pre + ".bv", {cfg_.c});
    init_xavier_uniform(store.create(pre + ".wo", {cfg_.c, cfg_.c}), rng, cfg_.c, cfg_.c);
    store.create(pre + ".bo", {cfg_.c});
  }

  // pre-norm self-attention: positional offsets on q and k, none on v
  Var self_attn(Tape<T>& tape, ParamBinding<T>& p, const std::string& pre, Var x,
                Var pos) const {
    Var t = tape.layer_norm_rows(x, p(pre + ".norm.g"), p(pre + ".norm.b"), T(1e-5));
    Var qk = tape.add(t, pos);
    Var q = tape.linear(qk, p(pre + ".wq"), p(pre + ".bq"));
    Var k = tape.linear(qk, p(pre + ".wk"), p(pre + ".bk"));
    Var v = tape.linear(t, p(pre + ".wv"), p(pre + ".bv"));
    Var o = multihead_attention(tape, q, k, v, cfg_.heads);
    return tape.linear(o, p(pre + ".wo"), p(pre + ".bo"));
  }

  // cross-attention: pre-norm on the query stream only; keys arrive with any
  // positional offset already applied (none for text tokens)
  Var attn_pre(Tape<T>& tape, ParamBinding<T>& p, const std::string& pre, Var x, Var pos,
               Var k_src, Var v_src) const {
    Var t = tape.layer_norm_rows(x, p(pre + ".norm.g"), p(pre + ".norm.b"), T(1e-5));
    Var q = tape.linear(tape.add(t, pos), p(pre + ".wq"), p(pre + ".bq"));
    Var k = tape.linear(k_src, p(pre + ".wk"), p(pre + ".bk"));
    Var v = tape.linear(v_src, p(pre + ".wv"), p(pre + ".bv"));
    Var o = multihead_attention(tape, q, k, v, cfg_.heads);
    return tape.linear(o, p(pre + ".wo"), p(pre + ".bo"));
  }

  Config cfg_;
};

}  // namespace mdseg
