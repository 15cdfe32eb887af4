#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace hammer {

// Joint order throughout: (swing, boom, arm, bucket).
using JointVec = Eigen::Vector4d;
using JointConfig = JointVec;  // rad
using JointVel = JointVec;     // rad/s

inline constexpr int kJoints = 4;
inline constexpr double kControlDt = 0.05;  // 20 Hz

/// Discrete joint command; every component is -1, 0 or +1.
struct DiscreteAction {
  std::array<int, kJoints> v{0, 0, 0, 0};

  static DiscreteAction zero() { return {}; }

  int operator[](int j) const { return v[static_cast<std::size_t>(j)]; }
  int& operator[](int j) { return v[static_cast<std::size_t>(j)]; }

  bool valid() const {
    for (int c : v)
      if (c < -1 || c > 1) return false;
    return true;
  }
  bool is_zero() const { return v[0] == 0 && v[1] == 0 && v[2] == 0 && v[3] == 0; }
  JointVec as_vector() const { return {double(v[0]), double(v[1]), double(v[2]), double(v[3])}; }

  friend bool operator==(const DiscreteAction&, const DiscreteAction&) = default;
};

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent, reproducible streams.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return mix_seed(mix_seed(base) ^ mix_seed(stream + 0x632BE59BD9B4E019ull));
}

inline Rng make_rng(std::uint64_t base, std::uint64_t stream = 0) { return Rng(derive_seed(base, stream)); }

// Distribution helpers written out explicitly so sample streams do not depend
// on the standard library's distribution implementations.
inline double uniform01(Rng& rng) { return double(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline int uniform_int(Rng& rng, int lo, int hi) {  // inclusive
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(rng() % span);
}

// Box-Muller, one draw per call (no cached second variate).
inline double standard_normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// Input violates a documented precondition or configuration invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Work started but could not be completed.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SamplingBudgetExhausted : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class NonFiniteError : public RuntimeFailure {
 public:
  NonFiniteError(const std::string& what, long index) : RuntimeFailure(what), index_(index) {}
  long index() const { return index_; }

 private:
  long index_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace hammer
