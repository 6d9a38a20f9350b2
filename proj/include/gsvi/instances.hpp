#pragma once

// Random problem instances shared by the oracle suite, the benchmarks and the tests.

#include <random>
#include <vector>

#include "gsvi/graph.hpp"

namespace gsvi::instances {

using Rng = std::mt19937_64;

inline Vec random_vector(Eigen::Index n, Rng& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

/// Square, row-stochastic and invertible: 0.6 I + 0.4 S with S a random
/// row-stochastic matrix (diagonally dominant, so never singular).
inline BaseInterpolator random_theta(Eigen::Index n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Triplet> t;
  for (Eigen::Index r = 0; r < n; ++r) {
    Vec row(n);
    for (Eigen::Index c = 0; c < n; ++c) row[c] = u(rng);
    row *= 0.4 / row.sum();
    row[r] += 0.6;
    for (Eigen::Index c = 0; c < n; ++c)
      t.emplace_back(static_cast<int>(r), static_cast<int>(c), row[c]);
  }
  BaseInterpolator theta;
  theta.theta = sparse_from_triplets<double>(n, n, t);
  theta.kind = BaseInterpolator::Kind::custom;
  return theta;
}

/// Signed M x N perturbation with roughly `per_row` entries in [-1, 1] per row.
inline DirectedPerturbation random_perturbation(Eigen::Index m, Eigen::Index n, double gain,
                                                Rng& rng, int per_row = 3) {
  std::uniform_real_distribution<double> w(-1.0, 1.0);
  std::uniform_int_distribution<Eigen::Index> col(0, n - 1);
  std::vector<Triplet> t;
  for (Eigen::Index r = 0; r < m; ++r)
    for (int k = 0; k < per_row; ++k)
      t.emplace_back(static_cast<int>(r), static_cast<int>(col(rng)), w(rng));
  return {sparse_from_triplets<double>(m, n, t), gain};
}

/// Laplacian of a random positive graph (a ring plus random chords).
inline DenoisingLaplacian random_laplacian(Eigen::Index n, double gain, Rng& rng) {
  std::uniform_real_distribution<double> w(0.05, 1.0);
  std::uniform_int_distribution<Eigen::Index> node(0, n - 1);
  std::vector<WeightedEdge> edges;
  if (n > 1)
    for (Eigen::Index i = 0; i < n; ++i)
      edges.push_back({static_cast<int>(i), static_cast<int>((i + 1) % n), w(rng)});
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto a = node(rng), b = node(rng);
    if (a != b) edges.push_back({static_cast<int>(a), static_cast<int>(b), w(rng)});
  }
  return DenoisingLaplacian::from_edges(n, edges, gain);
}

}  // namespace gsvi::instances
