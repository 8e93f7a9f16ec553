#pragma once

#include <Eigen/Dense>

#include <limits>
#include <utility>
#include <vector>

namespace dropsim {

namespace detail {

// Shortest-augmenting-path solver for the rectangular assignment problem
// (minimize total cost). Expects rows <= cols; returns col index per row.
inline std::vector<int> lap_min(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  const double inf = std::numeric_limits<double>::infinity();

  // 1-indexed potentials; p[j] = row matched to column j (0 = none).
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> col_of_row(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] != 0) col_of_row[p[j] - 1] = j - 1;
  return col_of_row;
}

}  // namespace detail

/// Globally optimal bipartite assignment maximizing total similarity
/// (rectangular Hungarian). Every row or column of the shorter side is
/// assigned; gating is the caller's responsibility.
inline std::vector<std::pair<int, int>> solve_assignment_max(const Eigen::MatrixXd& similarity) {
  std::vector<std::pair<int, int>> matches;
  if (similarity.rows() == 0 || similarity.cols() == 0) return matches;
  const bool transposed = similarity.rows() > similarity.cols();
  const Eigen::MatrixXd cost =
      transposed ? Eigen::MatrixXd(-similarity.transpose()) : Eigen::MatrixXd(-similarity);
  const std::vector<int> col_of_row = detail::lap_min(cost);
  matches.reserve(col_of_row.size());
  for (int r = 0; r < static_cast<int>(col_of_row.size()); ++r) {
    const int c = col_of_row[r];
    if (c < 0) continue;
    if (transposed) {
      matches.emplace_back(c, r);
    } else {
      matches.emplace_back(r, c);
    }
  }
  return matches;
}

/// Greedy alternative: repeatedly takes the highest remaining similarity.
inline std::vector<std::pair<int, int>> solve_assignment_greedy(const Eigen::MatrixXd& similarity) {
  std::vector<std::pair<int, int>> matches;
  std::vector<bool> row_used(similarity.rows(), false), col_used(similarity.cols(), false);
  const int n = static_cast<int>(std::min(similarity.rows(), similarity.cols()));
  for (int k = 0; k < n; ++k) {
    int best_r = -1, best_c = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < similarity.rows(); ++r) {
      if (row_used[r]) continue;
      for (int c = 0; c < similarity.cols(); ++c) {
        if (col_used[c]) continue;
        if (similarity(r, c) > best) {
          best = similarity(r, c);
          best_r = r;
          best_c = c;
        }
      }
    }
    if (best_r < 0) break;
    row_used[best_r] = true;
    col_used[best_c] = true;
    matches.emplace_back(best_r, best_c);
  }
  return matches;
}

}  // namespace dropsim
