#pragma once

#include <string>
#include <vector>

#include "mdseg/array.hpp"
#include "mdseg/autodiff.hpp"
#include "mdseg/params.hpp"

namespace mdseg {

// pad (C,H,W) with zeros on the bottom/right so H and W become multiples of m
template <typename T>
Array<T> pad_to_multiple(const Array<T>& img, int m, int* pad_h = nullptr,
                         int* pad_w = nullptr) {
  int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  int hp = (h + m - 1) / m * m;
  int wp = (w + m - 1) / m * m;
  if (pad_h) *pad_h = hp - h;
  if (pad_w) *pad_w = wp - w;
  if (hp == h && wp == w) return img;
  Array<T> out({c, hp, wp}, T(0));
  for (int ci = 0; ci < c; ++ci)
    for (int y = 0; y < h; ++y)
      std::copy_n(&img.at(ci, y, 0), w, &out.at(ci, y, 0));
  return out;
}

template <typename T>
struct BackboneFeatures {
  Var t1, t2, f;      // taps at stride 2, 4 and the stride-8 feature map
  int orig_h = 0, orig_w = 0;
  int pad_h = 0, pad_w = 0;  // zero padding applied bottom/right before encoding
  int fh = 0, fw = 0;        // feature grid size (ceil of orig/stride)
};

// Four-stage convolutional encoder (stride 8) + FPN-style pixel decoder.
template <typename T>
class Backbone {
 public:
  struct Config {
    int in_ch = 3;
    std::vector<int> widths = {16, 32, 64, 128};  // last entry is C_F
    int ce = 32;                                  // pixel embedding dim C_eps
    int gn_groups = 8;
    bool use_norm = true;  // norm-free mode keeps the encoder exactly shift-equivariant
  };

  explicit Backbone(Config cfg = {}) : cfg_(std::move(cfg)) {
    if (cfg_.widths.size() != 4) throw std::invalid_argument("backbone: want 4 stage widths");
  }

  static constexpr int stride() { return 8; }
  int feature_dim() const { return cfg_.widths.back(); }
  int pixel_dim() const { return cfg_.ce; }
  const Config& config() const { return cfg_; }

  void init_params(ParameterStore<T>& store, Rng& rng) const {
    int prev = cfg_.in_ch;
    for (int s = 0; s < 4; ++s) {
      int ch = cfg_.widths[s];
      std::string pre = "backbone.stage" + std::to_string(s + 1);
      auto& w = store.create(pre + ".conv.w", {ch, prev, 3, 3});
      init_he_normal(w, rng, prev * 9);
      store.create(pre + ".conv.b", {ch});
      if (cfg_.use_norm) {
        init_ones(store.create(pre + ".norm.g", {ch}));
        store.create(pre + ".norm.b", {ch});
      }
      prev = ch;
    }
    auto lateral = [&](const std::string& name, int cin) {
      auto& w = store.create(name + ".w", {cfg_.ce, cin, 1, 1});
      init_he_normal(w, rng, cin);
      store.create(name + ".b", {cfg_.ce});
    };
    lateral("pixel.top", cfg_.widths[3]);
    lateral("pixel.lateral2", cfg_.widths[1]);
    lateral("pixel.lateral1", cfg_.widths[0]);
    for (const char* name : {"pixel.fuse2", "pixel.fuse1", "pixel.out"}) {
      auto& w = store.create(std::string(name) + ".w", {cfg_.ce, cfg_.ce, 3, 3});
      init_he_normal(w, rng, cfg_.ce * 9);
      store.create(std::string(name) + ".b", {cfg_.ce});
    }
  }

  BackboneFeatures<T> extract_features(Tape<T>& tape, ParamBinding<T>& p,
                                       const Array<T>& image) const {
    if (image.ndim() != 3 || image.dim(0) != cfg_.in_ch)
      throw std::invalid_argument("backbone: image must be (in_ch,H,W)");
    BackboneFeatures<T> out;
    out.orig_h = image.dim(1);
    out.orig_w = image.dim(2);
    Array<T> padded = pad_to_multiple(image, stride(), &out.pad_h, &out.pad_w);
    out.fh = padded.dim(1) / stride();
    out.fw = padded.dim(2) / stride();

    Var x = tape.constant(padded);
    Var taps[4];
    for (int s = 0; s < 4; ++s) {
      std::string pre = "backbone.stage" + std::to_string(s + 1);
      int stride_s = (s < 3) ? 2 : 1;
      x = tape.conv2d(x, p(pre + ".conv.w"), p(pre + ".conv.b"), stride_s, 1);
      if (cfg_.use_norm)
        x = tape.group_norm(x, p(pre + ".norm.g"), p(pre + ".norm.b"), cfg_.gn_groups,
                            T(1e-5));
      x = tape.gelu(x);
      taps[s] = x;
    }
    out.t1 = taps[0];
    out.t2 = taps[1];
    out.f = taps[3];
    return out;
  }

  // (C_eps, H, W) pixel embeddings at the original resolution
  Var pixel_decode(Tape<T>& tape, ParamBinding<T>& p, const BackboneFeatures<T>& f) const {
    Var x = tape.conv2d(f.f, p("pixel.top.w"), p("pixel.top.b"), 1, 0);
    x = tape.upsample_nearest2x(x);
    x = tape.add(x, tape.conv2d(f.t2, p("pixel.lateral2.w"), p("pixel.lateral2.b"), 1, 0));
    x = tape.gelu(tape.conv2d(x, p("pixel.fuse2.w"), p("pixel.fuse2.b"), 1, 1));
    x = tape.upsample_nearest2x(x);
    x = tape.add(x, tape.conv2d(f.t1, p("pixel.lateral1.w"), p("pixel.lateral1.b"), 1, 0));
    x = tape.gelu(tape.conv2d(x, p("pixel.fuse1.w"), p("pixel.fuse1.b"), 1, 1));
    x = tape.upsample_nearest2x(x);
    x = tape.conv2d(x, p("pixel.out.w"), p("pixel.out.b"), 1, 1);  // linear head
    if (f.pad_h > 0 || f.pad_w > 0) x = tape.crop2d(x, f.orig_h, f.orig_w);
    return x;
  }

 private:
  Config cfg_;
};

// Learned bias-free projection from query dim C to pixel dim C_eps, shared by
// every mask prediction.
template <typename T>
struct MaskHead {
  int c;   // query dim
  int ce;  // pixel embedding dim

  void init_params(ParameterStore<T>& store, Rng& rng) const {
    auto& w = store.create("mask_head.proj.w", {ce, c});
    init_xavier_uniform(w, rng, c, ce);
  }

  struct Masks {
    Var logits;  // (N, H*W)
    Var probs;   // sigmoid(logits)
    int h = 0, w = 0;
  };

  // queries: (N, C); pixel: (C_eps, H, W)
  Masks predict_masks(Tape<T>& tape, ParamBinding<T>& p, Var queries, Var pixel) const {
    int cp = tape.value(pixel).dim(0);
    int h = tape.value(pixel).dim(1);
    int w = tape.value(pixel).dim(2);
    Var proj = tape.linear_nobias(queries, p("mask_head.proj.w"));  // (N, C_eps)
    Var flat = tape.reshape(pixel, {cp, h * w});
    Masks out;
    out.logits = tape.matmul(proj, flat);
    out.probs = tape.sigmoid_(out.logits);
    out.h = h;
    out.w = w;
    return out;
  }
};

}  // namespace mdseg
