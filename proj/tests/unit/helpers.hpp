#ifndef DGP_TESTS_HELPERS_HPP_
#define DGP_TESTS_HELPERS_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "dgp/gp.hpp"
#include "dgp/partition.hpp"
#include "dgp/rng.hpp"

namespace dgp::test {

inline Dataset random_dataset(Eigen::Index n, std::uint64_t seed, Eigen::Index dim = 1) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  Dataset d;
  d.x.resize(n, dim);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) d.x(i, j) = u(rng);
    d.y[i] = std::sin(6.0 * d.x(i, 0)) + 0.3 * z(rng);
  }
  return d;
}

// Two-shard spatial partition of [0, 1] with centers 0.25 and 0.75 and no data.
inline Partition halves() {
  Dataset empty;
  empty.x.resize(0, 1);
  return partition_spatial_1d(empty, 2).partition;
}

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("dgp_test_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace dgp::test

#endif  // DGP_TESTS_HELPERS_HPP_
