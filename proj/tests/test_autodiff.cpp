#include <doctest.h>

#include <mdseg/autodiff.hpp>
#include <mdseg/rng.hpp>

#include <cmath>

#include "gradcheck.hpp"

using namespace mdseg;
using gradcheck::check;
using gradcheck::random_array;
using gradcheck::random_uniform_array;

namespace {
constexpr double kTol = 1e-6;
}

TEST_CASE("autodiff: elementwise ops match finite differences") {
  Rng rng(101);
  auto a = random_array({4, 5}, rng);
  auto b = random_array({4, 5}, rng);
  auto res = check({a, b}, [](TapeD& t, const std::vector<Var>& in) {
    Var s = t.add(in[0], in[1]);
    Var d = t.sub(s, t.scale(in[1], 0.3));
    Var m = t.mul(d, in[0]);
    return t.sum_all(m);
  });
  CHECK(res.max_rel < kTol);

  res = check({a}, [](TapeD& t, const std::vector<Var>& in) {
    return t.sum_all(t.mul(t.tanh_(in[0]), t.sigmoid_(in[0])));
  });
  CHECK(res.max_rel < kTol);

  res = check({a}, [](TapeD& t, const std::vector<Var>& in) {
    return t.sum_all(t.gelu(in[0]));
  });
  CHECK(res.max_rel < kTol);
}

TEST_CASE("autodiff: matmul, transpose and linear layers") {
  Rng rng(102);
  auto x = random_array({3, 4}, rng);
  auto w = random_array({5, 4}, rng);
  auto b = random_array({5}, rng);
  auto res = check({x, w, b}, [](TapeD& t, const std::vector<Var>& in) {
    return t.sum_all(t.tanh_(t.linear(in[0], in[1], in[2])));
  });
  CHECK(res.max_rel < kTol);

  res = check({x, w}, [](TapeD& t, const std::vector<Var>& in) {
    return t.sum_all(t.linear_nobias(in[0], in[1]));
  });
  CHECK(res.max_rel < kTol);

  auto m1 = random_array({3, 4}, rng);
  auto m2 = random_array({4, 6}, rng);
  res = check({m1, m2}, [](TapeD& t, const std::vector<Var>& in) {
    return t.sum_all(t.mul(t.matmul(in[0], in[1]), t.matmul(in[0], in[1])));
  });
  CHECK(res.max_rel < kTol);

  res = check({m1}, [](TapeD& t, const std::vector<Var>& in) {
    Var tr = t.transpose(in[0]);
    return t.sum_all(t.matmul(tr, in[0]));
  });
  CHECK(res.max_rel < kTol);
}

TEST_CASE("autodiff: slicing and concatenation round-trip gradients") {
  Rng rng(103);
  auto a = random_array({6, 8}, rng);
  auto res = check({a}, [](TapeD& t, const std::vector<Var>& in) {
    Var top = t.slice_rows(in[0], 0, 2);
    Var rest = t.slice_rows(in[0], 2, 4);
    Var rows = t.concat_rows({rest, top});
    Var left = t.slice_cols(rows, 0, 3);
    Var right = t.slice_cols(rows, 3, 5);
    Var cols = t.concat_cols({right, left});
    return t.sum_all(t.mul(cols, cols));
  });
  CHECK(res.max_rel < kTol);

  res = check({a}, [](TapeD& t, const std::vector<Var>& in) {
    Var r = t.reshape(in[0], {4, 12});
    return t.sum_all(t.mul(r, r));
  });
  CHECK(res.max_rel < kTol);
}

TEST_CASE("autodiff: softmax rows") {
  Rng rng(104);
  auto a = random_array({5, 7}, rng, 2.0);
  auto w = random_array({5, 7}, rng);
  auto res = check({a, w}, [](TapeD& t, const std::vector<Var>& in) {
    return t.sum_all(t.mul(t.softmax_rows(in[0]), in[1]));
  });
  CHECK(res.max_rel < kTol);

  TapeD t;
  Var s = t.softmax_rows(t.constant(random_array({3, 9}, rng, 3.0)));
  const auto& v = t.value(s);
  for (int i = 0; i < 3; ++i) {
    double sum = 0;
    for (int j = 0; j < 9; ++j) sum += v.at(i, j);
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("autodiff: layer norm and group norm") {
  Rng rng(105);
  auto x = random_array({4, 10}, rng, 1.5, 0.3);
  auto gm = random_array({10}, rng, 0.5, 1.0);
  auto bt = random_array({10}, rng, 0.5);
  auto res = check({x, gm, bt}, [](TapeD& t, const std::vector<Var>& in) {
    Var y = t.layer_norm_rows(in[0], in[1], in[2], 1e-5);
    return t.sum_all(t.mul(y, y));
  });
  CHECK(res.max_rel < kTol);

  auto xc = random_array({6, 4, 5}, rng, 1.2, -0.2);
  auto gg = random_array({6}, rng, 0.4, 1.0);
  auto gb = random_array({6}, rng, 0.4);
  res = check({xc, gg, gb}, [](TapeD& t, const std::vector<Var>& in) {
    Var y = t.group_norm(in[0], in[1], in[2], 3, 1e-5);
    return t.sum_all(t.mul(y, t.tanh_(y)));
  });
  CHECK(res.max_rel < kTol);
}

TEST_CASE("autodiff: l2 row normalization") {
  Rng rng(106);
  auto x = random_array({4, 6}, rng);
  auto w = random_array({4, 6}, rng);
  auto res = check({x, w}, [](TapeD& t, const std::vector<Var>& in) {
    return t.sum_all(t.mul(t.l2_normalize_rows(in[0]), in[1]));
  });
  CHECK(res.max_rel < kTol);

  TapeD t;
  Var y = t.l2_normalize_rows(t.constant(random_array({3, 5}, rng, 4.0)));
  const auto& v = t.value(y);
  for (int i = 0; i < 3; ++i) {
    double n = 0;
    for (int j = 0; j < 5; ++j) n += v.at(i, j) * v.at(i, j);
    CHECK(std::abs(n - 1.0) < 1e-10);
  }
}

TEST_CASE("autodiff: conv2d against finite differences") {
  Rng rng(107);
  auto x = random_array({3, 7, 6}, rng);
  auto w = random_array({4, 3, 3, 3}, rng, 0.5);
  auto b = random_array({4}, rng, 0.3);

  for (int stride : {1, 2}) {
    auto res = check({x, w, b}, [stride](TapeD& t, const std::vector<Var>& in) {
      Var y = t.conv2d(in[0], in[1], in[2], stride, 1);
      return t.sum_all(t.mul(y, y));
    });
    CAPTURE(stride);
    CHECK(res.max_rel < kTol);
  }

  // 1x1 kernel, no padding
  auto w1 = random_array({2, 3, 1, 1}, rng, 0.5);
  auto b1 = random_array({2}, rng, 0.3);
  auto res = check({x, w1, b1}, [](TapeD& t, const std::vector<Var>& in) {
    return t.sum_all(t.gelu(t.conv2d(in[0], in[1], in[2], 1, 0)));
  });
  CHECK(res.max_rel < kTol);
}

TEST_CASE("autodiff: conv2d identity kernel reproduces input") {
  ArrayD x({1, 4, 4});
  for (size_t i = 0; i < x.numel(); ++i) x[i] = static_cast<double>(i) * 0.25 - 1.0;
  ArrayD w({1, 1, 3, 3}, 0.0);
  w[4] = 1.0;  // center tap
  ArrayD b({1}, 0.0);
  TapeD t;
  Var y = t.conv2d(t.constant(x), t.constant(w), t.constant(b), 1, 1);
  const auto& v = t.value(y);
  REQUIRE(v.shape == x.shape);
  for (size_t i = 0; i < x.numel(); ++i) CHECK(v[i] == doctest::Approx(x[i]).epsilon(1e-12));
}

TEST_CASE("autodiff: upsample and crop") {
  Rng rng(108);
  auto x = random_array({2, 3, 4}, rng);
  auto res = check({x}, [](TapeD& t, const std::vector<Var>& in) {
    Var u = t.upsample_nearest2x(in[0]);
    Var c = t.crop2d(u, 5, 7);
    return t.sum_all(t.mul(c, c));
  });
  CHECK(res.max_rel < kTol);

  TapeD t;
  Var u = t.upsample_nearest2x(t.constant(x));
  const auto& v = t.value(u);
  CHECK(v.dim(1) == 6);
  CHECK(v.dim(2) == 8);
  CHECK(v.at(1, 5, 7) == x.at(1, 2, 3));
  CHECK(v.at(0, 0, 1) == x.at(0, 0, 0));
}

TEST_CASE("autodiff: weighted softmax cross entropy") {
  Rng rng(109);
  auto z = random_array({6, 5}, rng, 2.0);
  std::vector<int> labels = {0, 4, 2, 2, 1, 3};
  std::vector<double> weights = {1.0, 0.1, 1.0, 0.1, 1.0, 1.0};
  auto res = check({z}, [&](TapeD& t, const std::vector<Var>& in) {
    return t.softmax_ce_weighted(in[0], labels, weights);
  });
  CHECK(res.max_rel < kTol);

  // all-zero logits, single unweighted row: loss = ln(K)
  TapeD t;
  Var l = t.softmax_ce_weighted(t.constant(ArrayD({1, 3}, 0.0)), {2}, {1.0});
  CHECK(t.value(l)[0] == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("autodiff: focal loss") {
  Rng rng(110);
  auto p = random_uniform_array({1, 24}, rng, 0.05, 0.95);
  ArrayD gt({1, 24});
  for (size_t i = 0; i < gt.numel(); ++i) gt[i] = (i % 3 == 0) ? 1.0 : 0.0;
  auto res = check({p}, [&](TapeD& t, const std::vector<Var>& in) {
    return t.focal_loss_probs(in[0], gt, 2.0, 0.25);
  });
  CHECK(res.max_rel < kTol);

  // single positive element at p=0.5: 0.25 * 0.25 * ln 2
  TapeD t;
  Var f = t.focal_loss_probs(t.constant(ArrayD({1}, 0.5)), ArrayD({1}, 1.0), 2.0, 0.25);
  CHECK(t.value(f)[0] == doctest::Approx(0.25 * 0.25 * std::log(2.0)).epsilon(1e-12));

  // gamma=0, alpha=0.5 halves plain binary cross entropy
  Var g = t.focal_loss_probs(t.constant(ArrayD({1}, 0.3)), ArrayD({1}, 1.0), 0.0, 0.5);
  CHECK(t.value(g)[0] == doctest::Approx(-0.5 * std::log(0.3)).epsilon(1e-12));
}

TEST_CASE("autodiff: dice loss") {
  Rng rng(111);
  auto p = random_uniform_array({1, 30}, rng, 0.05, 0.95);
  ArrayD gt({1, 30});
  for (size_t i = 0; i < gt.numel(); ++i) gt[i] = (i % 4 == 0) ? 1.0 : 0.0;
  auto res = check({p}, [&](TapeD& t, const std::vector<Var>& in) {
    return t.dice_loss_probs(in[0], gt, 1.0);
  });
  CHECK(res.max_rel < kTol);

  TapeD t;
  // identical binary masks: exactly zero with smoothing
  ArrayD m({8});
  for (size_t i = 0; i < 8; ++i) m[i] = (i < 3) ? 1.0 : 0.0;
  Var d0 = t.dice_loss_probs(t.constant(m), m, 1.0);
  CHECK(t.value(d0)[0] == doctest::Approx(0.0).epsilon(1e-15));

  // half-overlapping hard masks without smoothing: exactly 0.5
  ArrayD pred({4}, 0.0), tgt({4}, 0.0);
  pred[0] = pred[1] = 1.0;  // {a,b}
  tgt[1] = tgt[2] = 1.0;    // {b,c}
  Var dh = t.dice_loss_probs(t.constant(pred), tgt, 0.0);
  CHECK(t.value(dh)[0] == doctest::Approx(0.5).epsilon(1e-15));

  // disjoint non-empty masks, no smoothing: exactly 1
  ArrayD p2({4}, 0.0), t2({4}, 0.0);
  p2[0] = 1.0;
  t2[3] = 1.0;
  Var dd = t.dice_loss_probs(t.constant(p2), t2, 0.0);
  CHECK(t.value(dd)[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("autodiff: detach blocks gradient flow") {
  Rng rng(112);
  auto a = random_array({3, 3}, rng);
  TapeD t;
  Var x = t.leaf(a);
  Var y = t.sum_all(t.mul(t.detach(x), x));
  t.backward(y);
  const auto& g = t.grad(x);
  // d/dx of const*x is const (the detached value), not 2x
  for (size_t i = 0; i < a.numel(); ++i) CHECK(g[i] == doctest::Approx(a[i]).epsilon(1e-12));
}

TEST_CASE("autodiff: repeated forward passes are bitwise deterministic") {
  Rng rng(113);
  auto x = random_array({3, 9, 9}, rng).cast<float>();
  auto w = random_array({4, 3, 3, 3}, rng, 0.4).cast<float>();
  auto b = random_array({4}, rng, 0.1).cast<float>();
  auto run = [&]() {
    TapeF t;
    Var y = t.conv2d(t.constant(x), t.constant(w), t.constant(b), 2, 1);
    Var z = t.sum_all(t.gelu(y));
    return t.value(z)[0];
  };
  float first = run();
  for (int i = 0; i < 3; ++i) CHECK(run() == first);
}
