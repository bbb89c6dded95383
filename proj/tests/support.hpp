#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "factorial/design.hpp"
#include "factorial/error.hpp"
#include "factorial/randomization.hpp"
#include "factorial/weighting.hpp"

namespace factorial::testing {

// Balanced N=8 over 2^2: cells {1,3}, {2,4}, {5,7}, {6,10}.
inline AssignmentTable n8_example() {
  return AssignmentTable(FactorSpec({"A", "B"}), {0, 0, 1, 1, 2, 2, 3, 3}, {1, 3, 2, 4, 5, 7, 6, 10});
}

inline AssignmentTable random_data(int k, std::uint64_t seed, std::size_t min_size = 2, std::size_t max_size = 12) {
  SplitMix64 rng(seed);
  return random_dataset(random_sizes(k, min_size, max_size, rng), seed);
}

inline std::vector<double> random_delta(int k, SplitMix64& rng) {
  std::vector<double> d(static_cast<std::size_t>(k));
  for (auto& v : d) v = 0.05 + 0.9 * rng.uniform();
  return d;
}

// Normal-equations least squares: (X'X)^{-1} X'y.
inline Eigen::VectorXd normal_equations(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  return (x.transpose() * x).ldlt().solve(x.transpose() * y);
}

// HC0 from its textbook sandwich form.
inline Eigen::MatrixXd naive_hc0(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::MatrixXd bread = (x.transpose() * x).inverse();
  const Eigen::VectorXd r = y - x * normal_equations(x, y);
  const Eigen::MatrixXd meat = x.transpose() * r.array().square().matrix().asDiagonal() * x;
  return bread * meat * bread;
}

inline Eigen::VectorXd outcomes(const AssignmentTable& d) {
  return Eigen::Map<const Eigen::VectorXd>(d.outcomes().data(), static_cast<Eigen::Index>(d.unit_count()));
}

// Definition-level general effect: sum over cells of pi(z_other) times the
// signed indicator (-1)^{|S| - sum_{k in S} z_k}.
inline Eigen::MatrixXd brute_force_contrasts(const WeightingScheme& pi) {
  const int k = pi.factor_count();
  const std::size_t q = std::size_t{1} << k;
  const auto subsets = canonical_subsets(k);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(subsets.size()), static_cast<Eigen::Index>(q));
  for (std::size_t r = 0; r < subsets.size(); ++r) {
    const std::uint32_t s = subsets[r].mask();
    const std::uint32_t other = ((1U << k) - 1U) & ~s;
    for (std::size_t z = 0; z < q; ++z) {
      int ones = 0;
      double weight = 0.0;
      for (int f = 0; f < k; ++f) {
        if ((s >> f) & 1U) ones += cell_level(z, f, k);
      }
      // Marginal mass of z's levels on the complement of s.
      for (std::size_t w = 0; w < q; ++w) {
        bool same = true;
        for (int f = 0; f < k; ++f) {
          if (((other >> f) & 1U) && cell_level(w, f, k) != cell_level(z, f, k)) same = false;
        }
        if (same) weight += pi.mass(w);
      }
      const int sign = ((subsets[r].size() - ones) % 2 == 0) ? 1 : -1;
      g(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(z)) = sign * weight;
    }
  }
  return g;
}

inline WeightingScheme random_joint_scheme(int k, SplitMix64& rng) {
  std::vector<double> m(std::size_t{1} << k);
  double total = 0.0;
  for (auto& v : m) total += (v = 0.05 + rng.uniform());
  for (auto& v : m) v /= total;
  return from_joint(k, m, 1e-9);
}

}  // namespace factorial::testing

#define EXPECT_FACTORIAL_ERROR(stmt, expected)              \
  do {                                                      \
    try {                                                   \
      stmt;                                                 \
      ADD_FAILURE() << "no error thrown by " #stmt;         \
    } catch (const ::factorial::Error& e) {                 \
      EXPECT_EQ(e.code(), expected) << e.what();            \
    }                                                       \
  } while (0)
