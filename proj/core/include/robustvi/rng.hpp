#ifndef ROBUSTVI_RNG_HPP
#define ROBUSTVI_RNG_HPP

#include <Eigen/Core>
#include <cstdint>
#include <random>

namespace robustvi {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(splitmix64(seed)); }

// Derives an independent stream for the given substream index. Streams are a
// pure function of (seed, index), so chains stay reproducible no matter how
// they are scheduled across workers.
inline Rng make_stream_rng(std::uint64_t seed, std::uint64_t stream_index) {
  return Rng(splitmix64(seed ^ splitmix64(stream_index + 1)));
}

inline Eigen::VectorXd draw_standard_normal(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> z;
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i) = z(rng);
  }
  return out;
}

}  // namespace robustvi

#endif
