#include "adp/score_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "adp/errors.hpp"

namespace adp::stats {

ScoreDistribution normalize(std::span<const double> phi) {
  if (phi.empty()) throw DegenerateInput("normalize: empty score vector");
  for (double v : phi) {
    if (!std::isfinite(v)) throw InvalidArgument("normalize: non-finite score");
  }
  const double lo = *std::min_element(phi.begin(), phi.end());
  const double shift = lo < 0.0 ? lo : 0.0;
  ScoreDistribution dist;
  dist.p.reserve(phi.size());
  double total = 0.0;
  for (double v : phi) {
    dist.p.push_back(v - shift);
    total += v - shift;
  }
  if (!(total > 0.0)) throw DegenerateInput("normalize: scores sum to zero");
  for (double& p : dist.p) p /= total;
  return dist;
}

double participation_ratio(const ScoreDistribution& dist) {
  if (dist.p.empty()) throw DegenerateInput("participation_ratio: empty distribution");
  double sq = 0.0;
  for (double p : dist.p) sq += p * p;
  return 1.0 / sq;
}

double entropy(const ScoreDistribution& dist) {
  double h = 0.0;
  for (double p : dist.p) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double random_retention_probability(std::uint64_t tokens, std::uint64_t targets, std::uint64_t kept,
                                    std::uint64_t min_retained) {
  if (targets > tokens) throw InvalidArgument("random_retention_probability: m > V");
  if (kept > tokens) throw InvalidArgument("random_retention_probability: k > V");
  if (min_retained > targets) throw InvalidArgument("random_retention_probability: r > m");

  const std::uint64_t others = tokens - targets;
  // Support of j (retained targets): max(0, k - (V - m)) .. min(m, k).
  const std::uint64_t j_lo = kept > others ? kept - others : 0;
  const std::uint64_t j_hi = std::min(targets, kept);
  if (min_retained > j_hi) return 0.0;
  if (min_retained <= j_lo) return 1.0;

  // log P(j_lo) from log-binomials, then the pmf ratio recurrence
  //   P(j+1)/P(j) = (m-j)(k-j) / ((j+1)(V-m-k+j+1)).
  auto log_choose = [](std::uint64_t n, std::uint64_t r) {
    r = std::min(r, n - r);
    long double s = 0.0L;
    for (std::uint64_t i = 1; i <= r; ++i) {
      s += std::log(static_cast<long double>(n - r + i)) - std::log(static_cast<long double>(i));
    }
    return s;
  };
  const long double log_p0 =
      log_choose(targets, j_lo) + log_choose(others, kept - j_lo) - log_choose(tokens, kept);

  long double pmf = std::exp(log_p0);
  long double tail = 0.0L;
  long double head = 0.0L;
  for (std::uint64_t j = j_lo; j <= j_hi; ++j) {
    if (j >= min_retained) {
      tail += pmf;
    } else {
      head += pmf;
    }
    if (j == j_hi) break;
    const long double num = static_cast<long double>(targets - j) * static_cast<long double>(kept - j);
    const long double den =
        static_cast<long double>(j + 1) * static_cast<long double>(others - (kept - j) + 1);
    pmf *= num / den;
  }
  // Normalising by head + tail cancels the rounding of the starting term.
  return static_cast<double>(tail / (head + tail));
}

MonteCarloEstimate simulate_random_retention(std::uint64_t tokens, std::uint64_t targets,
                                             std::uint64_t kept, std::uint64_t min_retained,
                                             std::uint64_t trials, std::uint64_t seed) {
  if (targets > tokens || kept > tokens || min_retained > targets) {
    throw InvalidArgument("simulate_random_retention: parameter out of range");
  }
  if (trials == 0) throw InvalidArgument("simulate_random_retention: trials must be positive");
  std::mt19937_64 rng(seed);
  std::vector<std::uint64_t> perm(tokens);
  std::uint64_t hits = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    std::iota(perm.begin(), perm.end(), std::uint64_t{0});
    std::uint64_t retained = 0;
    for (std::uint64_t i = 0; i < kept; ++i) {
      std::uniform_int_distribution<std::uint64_t> pick(i, tokens - 1);
      std::swap(perm[i], perm[pick(rng)]);
      if (perm[i] < targets) ++retained;  // tokens [0, m) are the targets
    }
    if (retained >= min_retained) ++hits;
  }
  MonteCarloEstimate est;
  est.trials = trials;
  est.probability = static_cast<double>(hits) / static_cast<double>(trials);
  est.standard_error =
      std::sqrt(est.probability * (1.0 - est.probability) / static_cast<double>(trials));
  return est;
}

}  // namespace adp::stats
