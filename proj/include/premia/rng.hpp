#ifndef PREMIA_RNG_HPP
#define PREMIA_RNG_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <random>

namespace premia {

/// splitmix64 finalizer; the standard constants.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Counter-mixed per-task seed: combining the master seed with a task
/// index gives order-independent parallel determinism.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t counter) {
  return mix64(master ^ mix64(counter));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }

  Eigen::VectorXd normal_vector(long n) {
    Eigen::VectorXd v(n);
    for (long i = 0; i < n; ++i) v(i) = normal_(engine_);
    return v;
  }

  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace premia

#endif
