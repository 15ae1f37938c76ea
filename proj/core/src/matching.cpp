#include "mdseg/matching.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mdseg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

MatchResult result_from_columns(const ArrayD& cost, const std::vector<int>& col_to_row) {
  MatchResult r;
  r.pred_to_gt.assign(static_cast<size_t>(cost.rows()), -1);
  for (int j = 0; j < static_cast<int>(col_to_row.size()); ++j) {
    int i = col_to_row[static_cast<size_t>(j)];
    r.pred_to_gt[static_cast<size_t>(i)] = j;
    r.total_cost += cost.at(i, j);
  }
  return r;
}

}  // namespace

MatchResult hungarian_match(const ArrayD& cost) {
  if (cost.ndim() != 2) throw std::invalid_argument("matcher: want a 2-d cost matrix");
  const int n_pred = cost.rows(), n_gt = cost.cols();
  if (n_gt > n_pred)
    throw std::invalid_argument("matcher: more segments than queries");
  // NaN entries make every comparison below false and the augmenting search
  // never terminates; inf entries turn the potentials into inf - inf = NaN
  for (size_t k = 0; k < cost.data.size(); ++k)
    if (!std::isfinite(cost.data[k]))
      throw std::invalid_argument("matcher: cost matrix contains non-finite entries");
  MatchResult empty;
  empty.pred_to_gt.assign(static_cast<size_t>(n_pred), -1);
  if (n_gt == 0) return empty;

  // Potential-based shortest-augmenting-path assignment, solved with
  // segments as the fully-assigned side.  1-indexed internally.
  const int n = n_gt, m = n_pred;
  std::vector<double> u(static_cast<size_t>(n) + 1, 0), v(static_cast<size_t>(m) + 1, 0);
  std::vector<int> p(static_cast<size_t>(m) + 1, 0), way(static_cast<size_t>(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(m) + 1, kInf);
    std::vector<char> used(static_cast<size_t>(m) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      int i0 = p[static_cast<size_t>(j0)], j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        double cur = cost.at(j - 1, i0 - 1) - u[static_cast<size_t>(i0)] -
                     v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> col_to_row(static_cast<size_t>(n_gt), -1);
  for (int j = 1; j <= m; ++j)
    if (p[static_cast<size_t>(j)] != 0)
      col_to_row[static_cast<size_t>(p[static_cast<size_t>(j)] - 1)] = j - 1;
  return result_from_columns(cost, col_to_row);
}

MatchResult brute_force_match(const ArrayD& cost) {
  if (cost.ndim() != 2) throw std::invalid_argument("matcher: want a 2-d cost matrix");
  const int n_pred = cost.rows(), n_gt = cost.cols();
  if (n_gt > n_pred)
    throw std::invalid_argument("matcher: more segments than queries");
  if (n_gt > 7) throw std::invalid_argument("reference matcher: too many segments");
  MatchResult best;
  best.pred_to_gt.assign(static_cast<size_t>(n_pred), -1);
  if (n_gt == 0) return best;

  std::vector<int> col_to_row(static_cast<size_t>(n_gt), -1), best_cols;
  std::vector<char> taken(static_cast<size_t>(n_pred), 0);
  double best_cost = kInf;
  // Enumerates queries in ascending order per column, accepting only strict
  // improvements, so the first optimum found has the lowest query indices.
  auto recurse = [&](auto&& self, int col, double acc) -> void {
    if (col == n_gt) {
      if (acc < best_cost) {
        best_cost = acc;
        best_cols = col_to_row;
      }
      return;
    }
    for (int i = 0; i < n_pred; ++i) {
      if (taken[static_cast<size_t>(i)]) continue;
      taken[static_cast<size_t>(i)] = 1;
      col_to_row[static_cast<size_t>(col)] = i;
      self(self, col + 1, acc + cost.at(i, col));
      taken[static_cast<size_t>(i)] = 0;
    }
  };
  recurse(recurse, 0, 0.0);
  return result_from_columns(cost, best_cols);
}

}  // namespace mdseg
