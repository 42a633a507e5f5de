#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Core>

namespace saddle {

/// Seeded generator with platform-independent output.
///
/// std::mt19937_64 is bit-exact across standard libraries, the distribution
/// adaptors in <random> are not, so the transforms are implemented here.
/// Independent substreams are derived from (seed, label, index) so that
/// adding a consumer in one place never shifts the sequence seen elsewhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  static Rng derive(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);
  Rng substream(std::string_view label, std::uint64_t index = 0) const;

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform on {0, ..., n-1}; n > 0.
  std::size_t index(std::size_t n);
  bool bernoulli(double p);
  double normal();

  Eigen::VectorXd uniform_vector(Eigen::Index d, double lo, double hi);
  Eigen::VectorXd normal_vector(Eigen::Index d);
  /// Uniformly distributed direction on the unit sphere.
  Eigen::VectorXd unit_vector(Eigen::Index d);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

std::uint64_t mix_seed(std::uint64_t seed, std::string_view label, std::uint64_t index);

}  // namespace saddle
