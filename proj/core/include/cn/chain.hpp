#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cn/dataset.hpp"
#include "cn/model.hpp"

namespace cn {

// Multi-dimensional outcomes handled as a chain of scalar conditionals:
// link j models Y_{order[j]} given the features plus the outcomes earlier in
// the order, so the product of the links is the joint law.

struct ChainConfig {
  TrainingConfig link_cfg;  // per-link seeds derive from link_cfg.seed
  std::vector<int> order;   // permutation of outcome columns; empty = natural
  Eigen::Index sample_count_for_cdf = 5000;
};

struct ChainModel {
  std::vector<TrainedCnModel> links;
  std::vector<int> order;
  Eigen::Index sample_count_for_cdf = 5000;

  Eigen::Index outcome_width() const { return static_cast<Eigen::Index>(links.size()); }
  // Width of the original feature vector (link j adds j outcome columns).
  Eigen::Index feature_width() const {
    return links.empty() ? 0 : links.front().feature_mean.size();
  }
};

ChainModel train_chain(const LabeledDataset& data, const ChainConfig& cfg);

struct JointSample {
  Matrix draws;  // count x m, original units, outcome columns in natural order
  Eigen::Index saturated = 0;  // inversions that ran off the grid
};

// Ancestral sampling: per draw, uniform levels u_j feed the g-side inversion
// of each link in order. Deterministic in (chain, x, count, seed); draw d
// uses its own derived stream, so any chunking yields identical results.
JointSample sample_joint(const ChainModel& chain, const Vector& x, Eigen::Index count,
                         std::uint64_t seed);

// P(Y_1 <= z_1, Y_2 <= z_2 | x) for two-outcome chains: a Monte-Carlo set of
// link-1 draws (sample_count_for_cdf of them, seeded from x, cached nowhere)
// against the link-2 CDF. Deterministic per (chain, x); monotone in both
// arguments because the draw set is shared.
double joint_cdf(const ChainModel& chain, double z1, double z2, const Vector& x);

// joint_cdf over a grid, sharing one draw set: entry (i, j) pairs z1s(i)
// with z2s(j).
Matrix joint_cdf_grid(const ChainModel& chain, const Vector& z1s, const Vector& z2s,
                      const Vector& x);

void chain_save(const ChainModel& chain, const std::string& path);
ChainModel chain_load(const std::string& path);

}  // namespace cn
