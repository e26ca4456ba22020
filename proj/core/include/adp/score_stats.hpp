#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace adp::stats {

// Probability vector over visual tokens: entries >= 0, sum 1.
struct ScoreDistribution {
  std::vector<double> p;
};

// p_i = phi_i / sum(phi). When any entry is negative the vector is first
// shifted by its minimum so the smallest score maps to zero mass.
// Throws DegenerateInput when the (shifted) scores sum to zero.
ScoreDistribution normalize(std::span<const double> phi);

// 1 / sum p_i^2, the effective number of tokens holding the mass.
double participation_ratio(const ScoreDistribution& dist);

// Shannon entropy in nats, 0 ln 0 = 0.
double entropy(const ScoreDistribution& dist);
inline double nats_to_bits(double nats) { return nats / 0.69314718055994530942; }

// P(at least `min_retained` of `targets` marked tokens survive when `kept` of
// `tokens` are retained uniformly at random); hypergeometric upper tail.
double random_retention_probability(std::uint64_t tokens, std::uint64_t targets, std::uint64_t kept,
                                    std::uint64_t min_retained);

struct MonteCarloEstimate {
  double probability = 0.0;
  double standard_error = 0.0;
  std::uint64_t trials = 0;
};

// Simulates the same event by drawing uniform k-subsets (partial Fisher-Yates).
MonteCarloEstimate simulate_random_retention(std::uint64_t tokens, std::uint64_t targets,
                                             std::uint64_t kept, std::uint64_t min_retained,
                                             std::uint64_t trials, std::uint64_t seed);

}  // namespace adp::stats
