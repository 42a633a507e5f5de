#include "saddle/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "saddle/errors.hpp"

namespace saddle {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::string_view label, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ fnv1a(label) ^ splitmix64(index + 0x5851f42d4c957f2dULL));
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

Rng Rng::derive(std::uint64_t seed, std::string_view label, std::uint64_t index) {
  return Rng(mix_seed(seed, label, index));
}

Rng Rng::substream(std::string_view label, std::uint64_t index) const {
  return derive(seed_, label, index);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw ContractViolation("Rng::index: empty range");
  // rejection sampling keeps the draw exactly uniform
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return static_cast<std::size_t>(r % range);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

double Rng::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_normal_ = true;
  return radius * std::cos(angle);
}

Eigen::VectorXd Rng::uniform_vector(Eigen::Index d, double lo, double hi) {
  Eigen::VectorXd v(d);
  for (Eigen::Index j = 0; j < d; ++j) v[j] = uniform(lo, hi);
  return v;
}

Eigen::VectorXd Rng::normal_vector(Eigen::Index d) {
  Eigen::VectorXd v(d);
  for (Eigen::Index j = 0; j < d; ++j) v[j] = normal();
  return v;
}

Eigen::VectorXd Rng::unit_vector(Eigen::Index d) {
  Eigen::VectorXd v;
  double norm = 0.0;
  do {
    v = normal_vector(d);
    norm = v.norm();
  } while (norm == 0.0);
  return v / norm;
}

}  // namespace saddle
