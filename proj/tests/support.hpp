#pragma once

// Seeded generators for property tests.

#include <cmath>
#include <cstdint>
#include <random>

#include "uscal/geom.hpp"

namespace uscal::test {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double gauss(double sigma = 1.0) { return std::normal_distribution<double>(0.0, sigma)(rng_); }

  Vec3 vec3(double half_range) {
    return {uniform(-half_range, half_range), uniform(-half_range, half_range), uniform(-half_range, half_range)};
  }

  Vec3 unit() {
    Vec3 v;
    do {
      v = Vec3(gauss(), gauss(), gauss());
    } while (v.norm() < 1e-6);
    return v.normalized();
  }

  Mat3 rotation(double max_angle_rad = kPi) { return axis_angle(unit(), uniform(0.0, max_angle_rad)); }

  RigidTransform transform(double max_translation, double max_angle_rad = kPi) {
    return {rotation(max_angle_rad), vec3(max_translation)};
  }

  /// Rotation by exactly `angle_rad` about a random axis plus a translation
  /// of exactly `distance` in a random direction.
  RigidTransform perturbation(double distance, double angle_rad) {
    return {axis_angle(unit(), angle_rad), distance * unit()};
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline double rotation_error_deg(const Mat3& a, const Mat3& b) { return rad2deg(rotation_angle(a.transpose() * b)); }

}  // namespace uscal::test
