#pragma once

#include "drspec/observables.hpp"

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace drspec {

struct NoiseConfig {
  double tau_d = 25.0;        // decoherence time; infinity disables the envelope
  std::int64_t n_meas = 10000;  // projective measurements per time point
  std::uint64_t seed = 0;

  void validate() const;
};

/// p_signal(t) = p(t) exp(-t / tau_d) with t measured from the start of the hold.
TimeSeries apply_decoherence(const TimeSeries& series, double tau_d);

/// Counting-noise realization: raw counts and counts / n_meas on the probability scale.
struct SimulatedSeries {
  TimeSeries normalized;
  std::vector<std::int64_t> counts;
  std::vector<int> indices;  // positions in the source series
  bool snr_ok = true;        // sqrt(n_meas * p_signal(0)) > 1
};

/// Uniform double in [0, 1) from the top 53 bits of one generator output.
double uniform01(std::mt19937_64& rng);

/// Poisson(lambda) by the product-of-uniforms method: the count of factors needed for the
/// running product to drop below exp(-lambda), minus one. For lambda above kPoissonChunk the
/// draw is the sum of independent draws over chunks of at most kPoissonChunk, keeping
/// exp(-chunk) far from underflow.
std::int64_t poisson_sample(double lambda, std::mt19937_64& rng);
inline constexpr double kPoissonChunk = 500.0;

/// Generator for one (time point, realization) pair; streams are independent of evaluation
/// order, so subsets and parallel schedules reproduce the same draws.
std::mt19937_64 counting_stream(std::uint64_t seed, std::uint64_t realization,
                                std::uint64_t time_index);

double snr_estimate(double p_signal0, std::int64_t n_meas);

/// Poisson counts at `indices` of `signal` (all points when empty).
SimulatedSeries simulate_counts(const TimeSeries& signal, const NoiseConfig& cfg,
                                std::uint64_t realization, std::span<const int> indices = {});

}  // namespace drspec
