#include "drspec/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace drspec {

void NoiseConfig::validate() const {
  if (!(tau_d > 0.0)) throw InvalidArgument("noise: tau_d must be positive");
  if (n_meas < 1) throw InvalidArgument("noise: n_meas must be >= 1");
}

TimeSeries apply_decoherence(const TimeSeries& series, double tau_d) {
  if (!(tau_d > 0.0)) throw InvalidArgument("apply_decoherence: tau_d must be positive");
  TimeSeries out = series;
  if (std::isinf(tau_d)) return out;
  for (int k = 0; k < out.size(); ++k) out.values[k] *= std::exp(-out.t[k] / tau_d);
  return out;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

namespace {

std::int64_t knuth(double lambda, std::mt19937_64& rng) {
  const double limit = std::exp(-lambda);
  std::int64_t n = 0;
  double prod = 1.0;
  do {
    prod *= uniform01(rng);
    ++n;
  } while (prod >= limit);
  return n - 1;
}

}  // namespace

std::int64_t poisson_sample(double lambda, std::mt19937_64& rng) {
  if (!std::isfinite(lambda) || lambda < 0.0)
    throw InvalidArgument("poisson_sample: lambda must be finite and >= 0, got " +
                          std::to_string(lambda));
  if (lambda == 0.0) return 0;
  std::int64_t total = 0;
  const auto chunks = static_cast<std::int64_t>(std::ceil(lambda / kPoissonChunk));
  const double piece = lambda / static_cast<double>(chunks);
  for (std::int64_t c = 0; c < chunks; ++c) total += knuth(piece, rng);
  return total;
}

std::mt19937_64 counting_stream(std::uint64_t seed, std::uint64_t realization,
                                std::uint64_t time_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(realization),
                    static_cast<std::uint32_t>(realization >> 32),
                    static_cast<std::uint32_t>(time_index),
                    static_cast<std::uint32_t>(time_index >> 32)};
  return std::mt19937_64(seq);
}

double snr_estimate(double p_signal0, std::int64_t n_meas) {
  return std::sqrt(static_cast<double>(n_meas) * std::max(p_signal0, 0.0));
}

SimulatedSeries simulate_counts(const TimeSeries& signal, const NoiseConfig& cfg,
                                std::uint64_t realization, std::span<const int> indices) {
  cfg.validate();
  std::vector<int> idx(indices.begin(), indices.end());
  if (idx.empty()) {
    idx.resize(signal.size());
    std::iota(idx.begin(), idx.end(), 0);
  }
  SimulatedSeries out;
  out.indices = idx;
  out.counts.resize(idx.size());
  TimeSeries& ts = out.normalized;
  ts.b_stop = signal.b_stop;
  ts.m_star = signal.m_star;
  ts.dt_meas = signal.dt_meas;
  ts.t.resize(static_cast<Eigen::Index>(idx.size()));
  ts.values.resize(static_cast<Eigen::Index>(idx.size()));
  const double n = static_cast<double>(cfg.n_meas);
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const int k = idx[j];
    if (k < 0 || k >= signal.size())
      throw InvalidArgument("simulate_counts: index " + std::to_string(k) + " out of range");
    const double p = signal.values[k];
    if (!(p >= 0.0 && p <= 1.0 + 1e-12))
      throw InvalidArgument("simulate_counts: probability outside [0, 1]");
    auto rng = counting_stream(cfg.seed, realization, static_cast<std::uint64_t>(k));
    out.counts[j] = poisson_sample(n * p, rng);
    ts.t[j] = signal.t[k];
    ts.values[j] = static_cast<double>(out.counts[j]) / n;
  }
  out.snr_ok = signal.size() == 0 || snr_estimate(signal.values[0], cfg.n_meas) > 1.0;
  return out;
}

}  // namespace drspec
