#ifndef DGP_PARTITION_HPP_
#define DGP_PARTITION_HPP_

#include <vector>

#include <Eigen/Dense>

#include "dgp/gp.hpp"
#include "dgp/rng.hpp"

namespace dgp {

enum class PartitionKind { Spatial1d, Random, KdTree };

// Axis-aligned split node of a k-d partition. Leaves carry the shard index.
struct KdNode {
  int dim = -1;            // -1 for a leaf
  double threshold = 0.0;  // x[dim] <= threshold goes left
  int left = -1;
  int right = -1;
  int shard = -1;
};

struct Partition {
  PartitionKind kind = PartitionKind::Spatial1d;
  int m = 1;
  std::vector<int> assignment;  // shard index (0-based) per observation
  std::vector<Region> regions;
  Points centers;               // m x d, one center of gravity per shard
  std::vector<KdNode> tree;     // KdTree only; node 0 is the root

  bool spatial() const { return kind != PartitionKind::Random; }

  // Shard whose region contains x. Throws DomainError when no region does
  // (1-d: x outside [0, 1]; random partitions own no region).
  int owner(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;

  std::vector<Eigen::Index> shard_sizes() const;
};

struct PartitionResult {
  Partition partition;
  std::vector<Dataset> shards;
};

// Equidistant intervals ((k-1)/m, k/m], the first one closed at 0.
PartitionResult partition_spatial_1d(const Dataset& data, int m);

// Random permutation cut into m blocks whose sizes differ by at most one.
PartitionResult partition_random(const Dataset& data, int m, Rng& rng);

// Recursive median splits on the coordinate of largest variance until m
// cells exist. The rng is accepted for interface symmetry; splits are
// deterministic.
PartitionResult partition_spatial_kd(const Dataset& data, int m, Rng& rng);

// Shard index for a 1-d covariate in [0, 1] (0-based).
int interval_index(double x, int m);

}  // namespace dgp

#endif  // DGP_PARTITION_HPP_
