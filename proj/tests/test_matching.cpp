#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <doctest.h>
#include <mdseg/losses.hpp>
#include <mdseg/matching.hpp>
#include <mdseg/rng.hpp>

using namespace mdseg;

namespace {

ArrayD random_cost(int n, int m, uint64_t seed) {
  Rng rng(seed);
  ArrayD c({n, m});
  for (auto& v : c.data) v = rng.uniform(-1.0, 1.0);
  return c;
}

void check_valid(const MatchResult& r, int n, int m) {
  REQUIRE(static_cast<int>(r.pred_to_gt.size()) == n);
  std::vector<int> seen(static_cast<size_t>(m), 0);
  int matched = 0;
  for (int g : r.pred_to_gt) {
    if (g < 0) continue;
    REQUIRE(g < m);
    ++seen[static_cast<size_t>(g)];
    ++matched;
  }
  CHECK(matched == m);  // every segment assigned exactly once
  for (int s : seen) CHECK(s == 1);
  CHECK(r.matched() == m);
}

double recompute_cost(const ArrayD& c, const MatchResult& r) {
  double t = 0;
  for (int i = 0; i < c.rows(); ++i)
    if (r.pred_to_gt[static_cast<size_t>(i)] >= 0)
      t += c.at(i, r.pred_to_gt[static_cast<size_t>(i)]);
  return t;
}

GtInstance segment(int cls, std::vector<uint8_t> mask, int h, int w) {
  GtInstance s;
  s.class_index = cls;
  s.mask = ArrayU8({h, w}, std::move(mask));
  return s;
}

}  // namespace

TEST_CASE("ground truth validation") {
  GroundTruthSet gt;
  gt.height = 2;
  gt.width = 2;
  gt.instances.push_back(segment(1, {1, 0, 0, 0}, 2, 2));
  CHECK_NOTHROW(gt.validate(3));
  CHECK(gt.instances[0].area() == 1);

  auto bad = gt;
  bad.instances[0].class_index = 3;  // background index is not a segment class
  CHECK_THROWS_AS(bad.validate(3), std::invalid_argument);
  bad = gt;
  bad.instances[0].class_index = -1;
  CHECK_THROWS_AS(bad.validate(3), std::invalid_argument);
  bad = gt;
  bad.instances[0].mask = ArrayU8({2, 3}, 0);
  CHECK_THROWS_AS(bad.validate(3), std::invalid_argument);
  bad = gt;
  bad.instances[0].mask.fill(0);
  CHECK_THROWS_AS(bad.validate(3), std::invalid_argument);
}

TEST_CASE("pair cost: certain class and identical mask cost -1") {
  LossConfig cfg;
  ArrayD probs({3}, {0.0, 1.0, 0.0});
  ArrayD mask({4}, {1.0, 0.0, 1.0, 0.0});
  auto seg = segment(1, {1, 0, 1, 0}, 2, 2);
  CHECK(match_cost(probs, mask, seg, cfg) == doctest::Approx(-1.0));
}

TEST_CASE("pair cost: composes class, focal, and dice terms") {
  LossConfig cfg;
  // formula with the default weights: -0.7 + 20*0.01 + 1*0.4 = -0.1
  CHECK(-0.7 + cfg.lambda_focal * 0.01 + cfg.lambda_dice * 0.4 == doctest::Approx(-0.1));

  Rng rng(7);
  ArrayD probs({4});
  double z = 0;
  for (auto& v : probs.data) {
    v = rng.uniform(0.05, 1.0);
    z += v;
  }
  for (auto& v : probs.data) v /= z;
  ArrayD mask({6});
  for (auto& v : mask.data) v = rng.uniform(0.1, 0.9);
  auto seg = segment(2, {1, 1, 0, 0, 1, 0}, 2, 3);
  ArrayD target = seg.mask.cast<double>();
  target.shape = {6};
  double want = -probs[2] +
                cfg.lambda_focal * focal_loss_value(mask, target, cfg.focal_gamma, cfg.focal_alpha) +
                cfg.lambda_dice * dice_loss_value(mask, target, cfg.dice_smooth);
  CHECK(match_cost(probs, mask, seg, cfg) == doctest::Approx(want).epsilon(1e-12));

  auto out_of_range = segment(4, {1, 1, 0, 0, 1, 0}, 2, 3);
  CHECK_THROWS_AS(match_cost(probs, mask, out_of_range, cfg), std::invalid_argument);
}

TEST_CASE("cost matrix: softmaxes logits and spans queries x segments") {
  LossConfig cfg;
  GroundTruthSet gt;
  gt.height = 2;
  gt.width = 2;
  gt.instances.push_back(segment(0, {1, 1, 0, 0}, 2, 2));
  gt.instances.push_back(segment(1, {0, 0, 1, 1}, 2, 2));

  ArrayD logits({2, 3}, 0.0);  // uniform softmax rows: p = 1/3
  ArrayD masks({2, 4});
  Rng rng(17);
  for (auto& v : masks.data) v = rng.uniform(0.1, 0.9);
  auto cost = build_match_cost(logits, masks, gt, cfg);
  REQUIRE(cost.rows() == 2);
  REQUIRE(cost.cols() == 2);

  ArrayD uniform({3}, 1.0 / 3.0);
  for (int i = 0; i < 2; ++i) {
    ArrayD mrow({4});
    for (int j = 0; j < 4; ++j) mrow[static_cast<size_t>(j)] = masks.at(i, j);
    for (int j = 0; j < 2; ++j)
      CHECK(cost.at(i, j) ==
            doctest::Approx(match_cost(uniform, mrow, gt.instances[static_cast<size_t>(j)], cfg))
                .epsilon(1e-12));
  }
}

TEST_CASE("assignment: one query, one segment") {
  ArrayD c({1, 1}, {-0.5});
  auto r = hungarian_match(c);
  REQUIRE(r.pred_to_gt.size() == 1);
  CHECK(r.pred_to_gt[0] == 0);
  CHECK(r.total_cost == doctest::Approx(-0.5));
}

TEST_CASE("assignment: unique diagonal optimum") {
  ArrayD c({2, 2}, {1.0, 2.0, 2.0, 1.0});
  auto r = hungarian_match(c);
  CHECK(r.pred_to_gt[0] == 0);
  CHECK(r.pred_to_gt[1] == 1);
  CHECK(r.total_cost == doctest::Approx(2.0));
  auto b = brute_force_match(c);
  CHECK(b.pred_to_gt == r.pred_to_gt);
  CHECK(b.total_cost == doctest::Approx(2.0));
}

TEST_CASE("assignment: 200 random 6x4 instances match the exhaustive oracle") {
  for (uint64_t seed = 0; seed < 200; ++seed) {
    auto c = random_cost(6, 4, 1000 + seed);
    auto h = hungarian_match(c);
    auto b = brute_force_match(c);
    check_valid(h, 6, 4);
    check_valid(b, 6, 4);
    CHECK(h.total_cost == doctest::Approx(b.total_cost).epsilon(1e-9));
    CHECK(recompute_cost(c, h) == doctest::Approx(h.total_cost).epsilon(1e-12));
    CHECK(recompute_cost(c, b) == doctest::Approx(b.total_cost).epsilon(1e-12));
  }
}

TEST_CASE("assignment: oracle agreement across shapes") {
  const std::pair<int, int> shapes[] = {{1, 1}, {2, 2}, {5, 5}, {7, 3}, {8, 5}, {6, 6}};
  for (auto [n, m] : shapes) {
    for (uint64_t seed = 0; seed < 40; ++seed) {
      auto c = random_cost(n, m, 5000 + 100 * static_cast<uint64_t>(n) + seed);
      auto h = hungarian_match(c);
      auto b = brute_force_match(c);
      check_valid(h, n, m);
      CHECK(h.total_cost == doctest::Approx(b.total_cost).epsilon(1e-9));
    }
  }
}

TEST_CASE("assignment: no segments yields an empty assignment at zero cost") {
  ArrayD c({4, 0});
  auto h = hungarian_match(c);
  auto b = brute_force_match(c);
  for (int g : h.pred_to_gt) CHECK(g == -1);
  CHECK(h.total_cost == 0.0);
  CHECK(h.matched() == 0);
  CHECK(b.pred_to_gt == h.pred_to_gt);
  CHECK(b.total_cost == 0.0);
}

TEST_CASE("assignment: more segments than queries is an error") {
  ArrayD c({2, 3}, 0.0);
  CHECK_THROWS_AS(hungarian_match(c), std::invalid_argument);
  CHECK_THROWS_AS(brute_force_match(c), std::invalid_argument);
}

TEST_CASE("assignment: exhaustive oracle refuses oversized instances") {
  ArrayD c({9, 8}, 0.0);
  CHECK_THROWS_AS(brute_force_match(c), std::invalid_argument);
  CHECK_NOTHROW(hungarian_match(c));
}

TEST_CASE("assignment: never beaten by random injections") {
  Rng rng(99);
  auto c = random_cost(8, 5, 4242);
  auto h = hungarian_match(c);
  check_valid(h, 8, 5);
  std::vector<int> preds(8);
  std::iota(preds.begin(), preds.end(), 0);
  for (int trial = 0; trial < 500; ++trial) {
    rng.shuffle(preds.begin(), preds.end());
    double cost = 0;
    for (int j = 0; j < 5; ++j) cost += c.at(preds[static_cast<size_t>(j)], j);
    CHECK(h.total_cost <= cost + 1e-12);
  }
}

TEST_CASE("assignment: constant shifts on a fully-assigned line keep the optimum") {
  // square instance: every query row is assigned, so a row shift is neutral
  auto sq = random_cost(5, 5, 777);
  auto base = hungarian_match(sq);
  auto shifted = sq;
  for (int j = 0; j < 5; ++j) shifted.at(2, j) += 3.25;
  auto after = hungarian_match(shifted);
  CHECK(after.pred_to_gt == base.pred_to_gt);
  CHECK(after.total_cost == doctest::Approx(base.total_cost + 3.25).epsilon(1e-9));

  // rectangular instance: every segment column is assigned
  auto rc = random_cost(6, 4, 778);
  auto rbase = hungarian_match(rc);
  auto rshift = rc;
  for (int i = 0; i < 6; ++i) rshift.at(i, 1) += -1.75;
  auto rafter = hungarian_match(rshift);
  CHECK(rafter.pred_to_gt == rbase.pred_to_gt);
  CHECK(rafter.total_cost == doctest::Approx(rbase.total_cost - 1.75).epsilon(1e-9));
}

TEST_CASE("assignment: ties resolved toward low query indices by the oracle") {
  ArrayD c({3, 2}, 0.0);
  auto b = brute_force_match(c);
  CHECK(b.pred_to_gt[0] == 0);
  CHECK(b.pred_to_gt[1] == 1);
  CHECK(b.pred_to_gt[2] == -1);
  CHECK(b.total_cost == 0.0);
  auto h = hungarian_match(c);
  CHECK(h.total_cost == doctest::Approx(0.0));
  check_valid(h, 3, 2);
}

TEST_CASE("assignment: full pipeline picks the intended segments") {
  // two queries strongly aligned to distinct classes with matching masks
  LossConfig cfg;
  GroundTruthSet gt;
  gt.height = 2;
  gt.width = 2;
  gt.instances.push_back(segment(1, {0, 0, 1, 1}, 2, 2));
  gt.instances.push_back(segment(0, {1, 1, 0, 0}, 2, 2));

  ArrayD logits({3, 3}, 0.0);
  logits.at(0, 0) = 12.0;  // query 0 -> class 0 -> segment 1
  logits.at(2, 1) = 12.0;  // query 2 -> class 1 -> segment 0
  ArrayD masks({3, 4}, 0.01);
  masks.at(0, 0) = masks.at(0, 1) = 0.99;
  masks.at(2, 2) = masks.at(2, 3) = 0.99;

  auto cost = build_match_cost(logits, masks, gt, cfg);
  auto r = hungarian_match(cost);
  CHECK(r.pred_to_gt[0] == 1);
  CHECK(r.pred_to_gt[1] == -1);
  CHECK(r.pred_to_gt[2] == 0);
}
