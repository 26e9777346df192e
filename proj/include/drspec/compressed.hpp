#pragma once

#include "drspec/signal.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace drspec {

/// Relative thresholds log-spaced over [lo, hi].
std::vector<double> log_tau_grid(double lo = 0.05, double hi = 1.0, int count = 20);

struct RecoveryConfig {
  int n_step = 2048;
  int m_step = 200;
  std::vector<double> tau_grid = log_tau_grid();  // relative to ||M^dagger p||_inf
  double epsilon = 1e-6;
  int max_iter = 1000;
  std::uint64_t seed = 0;
  int expected_sparsity = 4;  // advisory only
  SamplingPattern pattern = SamplingPattern::random;
  bool subtract_mean = true;  // the DC column is not part of the sensing map
  bool debias = false;        // least-squares refit on the recovered support

  void validate() const;
  /// Empty when m_step >= s log(n_step); otherwise a warning text.
  std::string sparsity_warning() const;
};

/// max{(|c| - tau)/|c|, 0} * c.
cplx soft_threshold(cplx coeff, double tau);

struct SparsaResult {
  Eigen::VectorXcd coeffs;         // one entry per SensingOperator unknown
  std::vector<double> objective;   // after every accepted iteration, starting point first
  int iterations = 0;
  bool converged = false;
};

/// 1/2 ||y - A P||^2 + tau ||P_full||_1, where P_full is the conjugate-symmetric spectrum
/// (each positive bin counted twice).
double recovery_objective(const SensingOperator& op, const Eigen::VectorXd& y,
                          const Eigen::VectorXcd& p, double tau_abs);

/// Iterative shrinkage with Barzilai-Borwein steps and a monotone safeguard: the step is
/// halved until the objective does not increase. Stops when ||P_i - P_{i-1}|| is below
/// epsilon * max(||P_{i-1}||, 1e-30) or at max_iter (converged = false).
SparsaResult sparsa_recover(const SensingOperator& op, const Eigen::VectorXd& y,
                            const RecoveryConfig& cfg, double tau_abs,
                            const Eigen::VectorXcd* warm_start = nullptr);

/// Least-squares refit of the nonzero coefficients with the support held fixed, removing the
/// shrinkage bias. Returns the input unchanged when the support is not overdetermined or the
/// restricted system is rank deficient.
Eigen::VectorXcd debias(const SensingOperator& op, const Eigen::VectorXd& y,
                        const Eigen::VectorXcd& coeffs);

/// ||M^dagger y||_inf for the full complex partial inverse DFT; the smallest threshold with
/// the all-zero minimizer.
double tau_scale(const SensingOperator& op, const Eigen::VectorXd& y);

struct CrossValidation {
  double tau_rel = 0.0;
  double tau_abs = 0.0;           // tau_rel * tau_scale on the full sample set
  std::vector<double> residuals;  // test residual per entry of the tau grid
  int failures = 0;               // non-converged trials
};

/// Random equal split of the samples into training and test halves; every relative tau is
/// fitted on the training half (warm-started from the next larger tau) and scored by the
/// test residual. Throws NumericalFailure when no trial converges.
CrossValidation cross_validate_tau(const SensingOperator& op, const Eigen::VectorXd& y,
                                   const RecoveryConfig& cfg, std::uint64_t split_seed);

/// Estimate on the signed-bin grid, coefficients at k and -k = conj.
SpectrumEstimate to_spectrum(const SensingOperator& op, const Eigen::VectorXcd& coeffs);

struct Peak {
  double omega = 0.0;
  cplx amplitude;
  double magnitude = 0.0;
};

struct RecoveredPeaks {
  std::vector<Peak> peaks;  // ascending omega
};

/// 3 x median of the nonzero positive-bin magnitudes (0 when none).
double default_peak_floor(const SpectrumEstimate& spec);

/// Runs of adjacent nonzero positive bins merge into one candidate at the magnitude-weighted
/// mean frequency, carrying the summed amplitude and summed magnitude; candidates whose
/// magnitude exceeds `floor` are peaks.
RecoveredPeaks extract_peaks(const SpectrumEstimate& spec, double floor);

enum class PeakFlag { accepted, spurious_low, spurious_high };
const char* to_string(PeakFlag f);

struct PeakClass {
  PeakFlag flag = PeakFlag::accepted;
  int line = -1;  // index of the matched line when accepted
};

/// Nearest line within `match_tol` accepts the peak; otherwise it is spurious_high above
/// max(lines) + high_margin and spurious_low below.
PeakClass classify_peak(double omega, std::span<const double> lines, double match_tol = 0.05,
                        double high_margin = 0.2);

}  // namespace drspec
