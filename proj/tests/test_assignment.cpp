#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <random>

#include "dropsim/assignment.hpp"

using namespace dropsim;

namespace {

/// Exhaustive optimum over all injective column choices; ground truth for
/// the Hungarian solver on small instances.
double brute_force_best(const Eigen::MatrixXd& sim) {
  const int rows = static_cast<int>(sim.rows());
  const int cols = static_cast<int>(sim.cols());
  std::vector<int> perm(cols);
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1e300;
  do {
    double total = 0.0;
    for (int r = 0; r < std::min(rows, cols); ++r) total += sim(r, perm[r]);
    best = std::max(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  if (rows > cols) {
    // Choose which rows take part via the transpose.
    return brute_force_best(sim.transpose());
  }
  return best;
}

double total_similarity(const Eigen::MatrixXd& sim,
                        const std::vector<std::pair<int, int>>& matches) {
  double total = 0.0;
  for (const auto& [r, c] : matches) total += sim(r, c);
  return total;
}

}  // namespace

TEST_CASE("assignment beats greedy on the classic cross case") {
  Eigen::MatrixXd sim(2, 2);
  // Greedy grabs (0,0)=0.9 then is stuck with (1,1)=0.1 for a total of
  // 1.0; optimal picks the diagonal-free pairing worth 1.4.
  sim << 0.9, 0.8, 0.6, 0.1;
  const auto matches = solve_assignment_max(sim);
  REQUIRE(matches.size() == 2);
  CHECK(total_similarity(sim, matches) == Catch::Approx(1.4));

  const auto greedy = solve_assignment_greedy(sim);
  CHECK(total_similarity(sim, greedy) == Catch::Approx(1.0));
}

TEST_CASE("assignment matches brute force on random rectangular instances") {
  std::mt19937 gen(99);
  std::uniform_real_distribution<double> value(-2.0, 2.0);
  std::uniform_int_distribution<int> dim(1, 6);
  for (int trial = 0; trial < 400; ++trial) {
    const int rows = dim(gen);
    const int cols = dim(gen);
    Eigen::MatrixXd sim(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) sim(r, c) = value(gen);

    const auto matches = solve_assignment_max(sim);
    CHECK(matches.size() == static_cast<size_t>(std::min(rows, cols)));
    CHECK(total_similarity(sim, matches) == Catch::Approx(brute_force_best(sim)).margin(1e-9));

    // No row or column may appear twice.
    std::vector<int> row_seen(rows, 0), col_seen(cols, 0);
    for (const auto& [r, c] : matches) {
      ++row_seen[r];
      ++col_seen[c];
    }
    CHECK(*std::max_element(row_seen.begin(), row_seen.end()) <= 1);
    CHECK(*std::max_element(col_seen.begin(), col_seen.end()) <= 1);
  }
}

TEST_CASE("assignment handles empty inputs") {
  CHECK(solve_assignment_max(Eigen::MatrixXd(0, 0)).empty());
  CHECK(solve_assignment_max(Eigen::MatrixXd(0, 3)).empty());
  CHECK(solve_assignment_max(Eigen::MatrixXd(2, 0)).empty());
}

TEST_CASE("assignment is deterministic") {
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> value(0.0, 1.0);
  Eigen::MatrixXd sim(5, 7);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 7; ++c) sim(r, c) = value(gen);
  const auto a = solve_assignment_max(sim);
  const auto b = solve_assignment_max(sim);
  CHECK(a == b);
}
