#pragma once

#include <cstdint>
#include <random>
#include <span>

#include <Eigen/Dense>

namespace episodic {

using Rng = std::mt19937_64;

// Fixed stream splitting from a master seed. Stream 0 drives the
// environment (transitions, Nature), streams 1 and 2 drive agents 1 and 2.
inline Rng make_stream(std::uint64_t master_seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32), stream, 0x9e3779b9u};
  return Rng(seq);
}

inline constexpr std::uint32_t kEnvironmentStream = 0;
inline constexpr std::uint32_t agent_stream(int agent) { return 1 + static_cast<std::uint32_t>(agent); }

// Inverse-CDF draw from a probability vector; falls back to the last positive
// entry when rounding leaves the cumulative sum just under u.
inline int sample_index(std::span<const double> probs, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = static_cast<int>(i);
    if (u < acc) return last_positive;
  }
  return last_positive;
}

inline int sample_index(const Eigen::VectorXd& probs, Rng& rng) {
  return sample_index(std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size())), rng);
}

}  // namespace episodic
