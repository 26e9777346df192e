#pragma once

#include "drspec/observables.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <vector>

namespace drspec {

using cplx = std::complex<double>;

/// Angular-frequency grid of an n_step-point transform with sample spacing dt_meas.
/// Bin k in (-n_step/2, n_step/2] sits at omega_k = 2 pi k / (n_step dt_meas).
struct FrequencyGrid {
  int n_step = 2048;
  double dt_meas = 0.5;

  double omega(int k) const;
  double bin_width() const;
  double nyquist() const;
  /// Signed bin of DFT index j in [0, n_step).
  int signed_bin(int j) const;
  void validate() const;
};

/// Sparse map bin -> coefficient. Estimates of real signals carry both k and -k.
struct SpectrumEstimate {
  FrequencyGrid grid;
  std::map<int, cplx> coeffs;

  cplx at(int k) const;
};

/// Unitary transform X_k = n^{-1/2} sum_j x_j exp(+2 pi i k j / n) (forward) or with the
/// opposite sign (inverse). Radix-2 when n is a power of two, direct sum otherwise.
std::vector<cplx> unitary_dft(std::span<const cplx> x, bool inverse);

SpectrumEstimate dft(const TimeSeries& series);
/// Complex series on the full grid from a spectrum (missing bins are zero).
std::vector<cplx> idft_complex(const SpectrumEstimate& spec);
/// Real part of idft_complex.
Eigen::VectorXd idft(const SpectrumEstimate& spec);

/// Folds a non-negative angular frequency into [0, omega_nyquist] (real-signal folding).
double alias_frequency(double omega_high, double omega_nyquist);

SpectrumEstimate low_pass_filter(const SpectrumEstimate& spec, double omega_cutoff);
/// Zeroes bins with |coeff| < tau.
SpectrumEstimate threshold_filter(const SpectrumEstimate& spec, double tau);

/// Rows: sample indices; columns: DFT indices 1 .. n_step-1 (k = 0 removed); entries are
/// the inverse-transform kernel n^{-1/2} exp(-2 pi i k j / n). Rejects index 0, indices
/// outside the grid and duplicates.
Eigen::MatrixXcd partial_idft_matrix(const FrequencyGrid& grid, std::span<const int> samples);

/// Real-signal sensing map on the positive bins k = 1 .. n_step/2 - 1 (DC and Nyquist
/// excluded). Negative bins are bound by conjugate symmetry, so
///   y_j = (2 / sqrt(n)) Re sum_k P_k exp(-2 pi i k t_j / n),
/// which equals the partial inverse DFT applied to the symmetric spectrum.
class SensingOperator {
 public:
  SensingOperator(const FrequencyGrid& grid, std::span<const int> samples);

  int rows() const { return static_cast<int>(samples_.size()); }
  int unknowns() const { return static_cast<int>(cos_.cols()); }
  const FrequencyGrid& grid() const { return grid_; }
  const std::vector<int>& samples() const { return samples_; }
  /// Bin number of unknown u.
  int bin(int u) const { return u + 1; }

  Eigen::VectorXd apply(const Eigen::VectorXcd& p) const;
  /// Real-linear adjoint: <apply(P), r> = Re <P, adjoint(r)>.
  Eigen::VectorXcd adjoint(const Eigen::VectorXd& r) const;
  /// Operator restricted to a subset of its rows (positions into samples()).
  SensingOperator subset(std::span<const int> rows) const;

 private:
  SensingOperator() = default;
  FrequencyGrid grid_;
  std::vector<int> samples_;
  Eigen::MatrixXd cos_, sin_;  // scaled by 2 / sqrt(n)
};

enum class SamplingPattern { random, window };

/// m_step distinct sample indices from {1, ..., n_step-1}, sorted. `random` draws a seeded
/// uniform subset without replacement; `window` takes 1 .. m_step.
std::vector<int> select_sample_indices(int n_step, int m_step, std::uint64_t seed,
                                       SamplingPattern pattern = SamplingPattern::random);

/// Uniform integer in [0, bound) by rejection, identical on every platform.
std::uint64_t uniform_below(std::uint64_t bound, std::mt19937_64& rng);

}  // namespace drspec
