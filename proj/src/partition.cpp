#include "dgp/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dgp/errors.hpp"

namespace dgp {

namespace {

void check_m(int m) {
  if (m < 1) throw ContractError("number of shards must be at least 1");
}

std::vector<Dataset> gather(const Dataset& data, const std::vector<int>& assignment, int m) {
  std::vector<std::vector<Eigen::Index>> members(m);
  for (Eigen::Index i = 0; i < data.size(); ++i) members[assignment[i]].push_back(i);
  std::vector<Dataset> shards(m);
  for (int k = 0; k < m; ++k) {
    const auto& idx = members[k];
    Dataset& s = shards[k];
    s.x.resize(static_cast<Eigen::Index>(idx.size()), data.dim());
    s.y.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      s.x.row(r) = data.x.row(idx[r]);
      s.y[r] = data.y[idx[r]];
    }
    s.source = data.source + "#shard" + std::to_string(k);
  }
  return shards;
}

Points centroids(const std::vector<Dataset>& shards, Eigen::Index dim) {
  Points c = Points::Zero(static_cast<Eigen::Index>(shards.size()), dim);
  for (std::size_t k = 0; k < shards.size(); ++k)
    if (!shards[k].empty()) c.row(k) = shards[k].x.colwise().mean();
  return c;
}

}  // namespace

int interval_index(double x, int m) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("covariate outside [0, 1]");
  auto upper = [m](int k) { return static_cast<double>(k) / m; };
  int k = static_cast<int>(std::ceil(x * m));
  k = std::clamp(k, 1, m);
  // Make the floating-point result agree with the stored interval bounds.
  while (k > 1 && x <= upper(k - 1)) --k;
  while (k < m && x > upper(k)) ++k;
  return k - 1;
}

int Partition::owner(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  switch (kind) {
    case PartitionKind::Spatial1d:
      if (x.size() != 1) throw DomainError("1-d partition queried with a multi-d point");
      return interval_index(x[0], m);
    case PartitionKind::KdTree: {
      int node = 0;
      while (tree[node].dim >= 0)
        node = x[tree[node].dim] <= tree[node].threshold ? tree[node].left : tree[node].right;
      return tree[node].shard;
    }
    case PartitionKind::Random:
      break;
  }
  throw DomainError("random partition owns no region");
}

std::vector<Eigen::Index> Partition::shard_sizes() const {
  std::vector<Eigen::Index> sizes(m, 0);
  for (int a : assignment) ++sizes[a];
  return sizes;
}

PartitionResult partition_spatial_1d(const Dataset& data, int m) {
  check_m(m);
  data.validate();
  if (data.dim() != 1 && !data.empty()) throw DomainError("1-d spatial partition needs d = 1");
  PartitionResult out;
  Partition& p = out.partition;
  p.kind = PartitionKind::Spatial1d;
  p.m = m;
  p.assignment.resize(data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i) p.assignment[i] = interval_index(data.x(i, 0), m);
  p.centers.resize(m, 1);
  for (int k = 0; k < m; ++k) {
    Region r;
    r.kind = Region::Kind::Interval;
    r.lo = static_cast<double>(k) / m;
    r.hi = static_cast<double>(k + 1) / m;
    r.cell_id = k;
    r.centroid = Eigen::RowVectorXd::Constant(1, (k + 0.5) / m);
    p.centers(k, 0) = r.centroid[0];
    p.regions.push_back(std::move(r));
  }
  out.shards = gather(data, p.assignment, m);
  return out;
}

PartitionResult partition_random(const Dataset& data, int m, Rng& rng) {
  check_m(m);
  data.validate();
  const Eigen::Index n = data.size();
  std::vector<Eigen::Index> perm(n);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);

  PartitionResult out;
  Partition& p = out.partition;
  p.kind = PartitionKind::Random;
  p.m = m;
  p.assignment.resize(n);
  const Eigen::Index base = n / m, extra = n % m;
  Eigen::Index pos = 0;
  for (int k = 0; k < m; ++k) {
    const Eigen::Index len = base + (k < extra ? 1 : 0);
    for (Eigen::Index r = 0; r < len; ++r) p.assignment[perm[pos++]] = k;
  }
  // Blocks keep permutation order, so rebuild shards from the permutation.
  out.shards.resize(m);
  pos = 0;
  for (int k = 0; k < m; ++k) {
    const Eigen::Index len = base + (k < extra ? 1 : 0);
    Dataset& s = out.shards[k];
    s.x.resize(len, data.dim());
    s.y.resize(len);
    for (Eigen::Index r = 0; r < len; ++r, ++pos) {
      s.x.row(r) = data.x.row(perm[pos]);
      s.y[r] = data.y[perm[pos]];
    }
    s.source = data.source + "#shard" + std::to_string(k);
  }
  p.centers = centroids(out.shards, data.dim());
  return out;
}

PartitionResult partition_spatial_kd(const Dataset& data, int m, Rng& /*rng*/) {
  check_m(m);
  data.validate();
  const Eigen::Index n = data.size();
  if (m > n) throw DomainError("k-d partition needs m <= n (m = " + std::to_string(m) +
                               ", n = " + std::to_string(n) + ")");

  struct Cell {
    std::vector<Eigen::Index> members;
    int node;
  };
  std::vector<Cell> cells;
  std::vector<KdNode> tree(1);
  {
    std::vector<Eigen::Index> all(n);
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    cells.push_back({std::move(all), 0});
  }

  while (static_cast<int>(cells.size()) < m) {
    // Split the most populated cell; ties go to the leftmost.
    std::size_t target = 0;
    for (std::size_t c = 1; c < cells.size(); ++c)
      if (cells[c].members.size() > cells[target].members.size()) target = c;
    Cell cell = std::move(cells[target]);

    int best_dim = 0;
    double best_var = -1.0;
    for (Eigen::Index d = 0; d < data.dim(); ++d) {
      double mean = 0.0, sq = 0.0;
      for (Eigen::Index i : cell.members) mean += data.x(i, d);
      mean /= static_cast<double>(cell.members.size());
      for (Eigen::Index i : cell.members) sq += (data.x(i, d) - mean) * (data.x(i, d) - mean);
      if (sq > best_var) {
        best_var = sq;
        best_dim = static_cast<int>(d);
      }
    }
    std::stable_sort(cell.members.begin(), cell.members.end(),
                     [&](Eigen::Index a, Eigen::Index b) {
                       return data.x(a, best_dim) < data.x(b, best_dim);
                     });
    const std::size_t half = cell.members.size() / 2;
    const int left_node = static_cast<int>(tree.size());
    tree.push_back({});
    tree.push_back({});
    KdNode& split = tree[cell.node];
    split.dim = best_dim;
    split.threshold = data.x(cell.members[half - 1], best_dim);
    split.left = left_node;
    split.right = left_node + 1;

    Cell left{{cell.members.begin(), cell.members.begin() + static_cast<std::ptrdiff_t>(half)},
              left_node};
    Cell right{{cell.members.begin() + static_cast<std::ptrdiff_t>(half), cell.members.end()},
               left_node + 1};
    cells[target] = std::move(left);
    cells.insert(cells.begin() + static_cast<std::ptrdiff_t>(target) + 1, std::move(right));
  }

  PartitionResult out;
  Partition& p = out.partition;
  p.kind = PartitionKind::KdTree;
  p.m = m;
  p.assignment.resize(n);
  for (int k = 0; k < m; ++k) {
    tree[cells[k].node].shard = k;
    for (Eigen::Index i : cells[k].members) p.assignment[i] = k;
  }
  p.tree = std::move(tree);
  out.shards = gather(data, p.assignment, m);
  p.centers = centroids(out.shards, data.dim());
  for (int k = 0; k < m; ++k) {
    Region r;
    r.kind = Region::Kind::Cell;
    r.cell_id = k;
    r.centroid = p.centers.row(k);
    p.regions.push_back(std::move(r));
  }
  return out;
}

}  // namespace dgp
