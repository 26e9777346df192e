#include "drspec/signal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

namespace drspec {

double FrequencyGrid::omega(int k) const {
  return 2.0 * std::numbers::pi * k / (n_step * dt_meas);
}
double FrequencyGrid::bin_width() const { return omega(1); }
double FrequencyGrid::nyquist() const { return std::numbers::pi / dt_meas; }
int FrequencyGrid::signed_bin(int j) const { return j > n_step / 2 ? j - n_step : j; }

void FrequencyGrid::validate() const {
  if (n_step < 2) throw InvalidArgument("frequency grid: n_step must be >= 2");
  if (!(dt_meas > 0.0)) throw InvalidArgument("frequency grid: dt_meas must be positive");
}

cplx SpectrumEstimate::at(int k) const {
  const auto it = coeffs.find(k);
  return it == coeffs.end() ? cplx{} : it->second;
}

namespace {

bool power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

void fft_radix2(std::vector<cplx>& a, double sign) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < len / 2; ++j) {
        const cplx w = std::polar(1.0, ang * static_cast<double>(j));
        const cplx u = a[i + j];
        const cplx v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
      }
    }
  }
}

}  // namespace

std::vector<cplx> unitary_dft(std::span<const cplx> x, bool inverse) {
  const std::size_t n = x.size();
  const double sign = inverse ? -1.0 : 1.0;
  std::vector<cplx> out(x.begin(), x.end());
  if (n == 0) return out;
  if (power_of_two(n)) {
    fft_radix2(out, sign);
  } else {
    for (std::size_t k = 0; k < n; ++k) {
      cplx acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double ang = sign * 2.0 * std::numbers::pi *
                           static_cast<double>((k * j) % n) / static_cast<double>(n);
        acc += x[j] * std::polar(1.0, ang);
      }
      out[k] = acc;
    }
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (cplx& v : out) v *= scale;
  return out;
}

SpectrumEstimate dft(const TimeSeries& series) {
  SpectrumEstimate spec;
  spec.grid = FrequencyGrid{series.size(), series.dt_meas};
  spec.grid.validate();
  std::vector<cplx> x(series.values.data(), series.values.data() + series.size());
  const std::vector<cplx> X = unitary_dft(x, false);
  for (int j = 0; j < series.size(); ++j) spec.coeffs[spec.grid.signed_bin(j)] = X[j];
  return spec;
}

std::vector<cplx> idft_complex(const SpectrumEstimate& spec) {
  spec.grid.validate();
  const int n = spec.grid.n_step;
  std::vector<cplx> X(n);
  for (const auto& [k, c] : spec.coeffs) {
    if (k < n / 2 + 1 - n || k > n / 2) throw InvalidArgument("idft: bin out of range");
    X[(k + n) % n] = c;
  }
  return unitary_dft(X, true);
}

Eigen::VectorXd idft(const SpectrumEstimate& spec) {
  const std::vector<cplx> x = idft_complex(spec);
  Eigen::VectorXd out(static_cast<Eigen::Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j].real();
  return out;
}

double alias_frequency(double omega_high, double omega_nyquist) {
  if (!(omega_high >= 0.0)) throw InvalidArgument("alias_frequency: omega must be >= 0");
  if (!(omega_nyquist > 0.0)) throw InvalidArgument("alias_frequency: Nyquist must be > 0");
  const double r = std::fmod(omega_high, 2.0 * omega_nyquist);
  return r > omega_nyquist ? 2.0 * omega_nyquist - r : r;
}

SpectrumEstimate low_pass_filter(const SpectrumEstimate& spec, double omega_cutoff) {
  SpectrumEstimate out = spec;
  for (auto& [k, c] : out.coeffs)
    if (std::abs(spec.grid.omega(k)) > omega_cutoff) c = 0.0;
  return out;
}

SpectrumEstimate threshold_filter(const SpectrumEstimate& spec, double tau) {
  SpectrumEstimate out = spec;
  for (auto& [k, c] : out.coeffs)
    if (std::abs(c) < tau) c = 0.0;
  return out;
}

namespace {

void check_samples(const FrequencyGrid& grid, std::span<const int> samples) {
  grid.validate();
  std::vector<int> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] < 1 || sorted[i] >= grid.n_step)
      throw InvalidArgument("sensing: sample index " + std::to_string(sorted[i]) +
                            " outside 1 .. n_step-1");
    if (i > 0 && sorted[i] == sorted[i - 1])
      throw InvalidArgument("sensing: duplicate sample index " + std::to_string(sorted[i]));
  }
}

// exp(-2 pi i k j / n) with the product reduced mod n for accuracy.
cplx kernel(long k, long j, long n) {
  return std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>((k * j) % n) /
                             static_cast<double>(n));
}

}  // namespace

Eigen::MatrixXcd partial_idft_matrix(const FrequencyGrid& grid, std::span<const int> samples) {
  check_samples(grid, samples);
  const long n = grid.n_step;
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  Eigen::MatrixXcd m(static_cast<Eigen::Index>(samples.size()), n - 1);
  for (std::size_t r = 0; r < samples.size(); ++r)
    for (long k = 1; k < n; ++k) m(r, k - 1) = scale * kernel(k, samples[r], n);
  return m;
}

SensingOperator::SensingOperator(const FrequencyGrid& grid, std::span<const int> samples)
    : grid_(grid), samples_(samples.begin(), samples.end()) {
  check_samples(grid, samples);
  const long n = grid.n_step;
  const long unknowns = std::max<long>(n / 2 - 1 + (n % 2), 0);
  const double scale = 2.0 / std::sqrt(static_cast<double>(n));
  cos_.resize(static_cast<Eigen::Index>(samples_.size()), unknowns);
  sin_.resize(static_cast<Eigen::Index>(samples_.size()), unknowns);
  for (std::size_t r = 0; r < samples_.size(); ++r)
    for (long u = 0; u < unknowns; ++u) {
      const cplx e = kernel(u + 1, samples_[r], n);
      // Re(P e) = Re P Re e - Im P Im e
      cos_(r, u) = scale * e.real();
      sin_(r, u) = -scale * e.imag();
    }
}

Eigen::VectorXd SensingOperator::apply(const Eigen::VectorXcd& p) const {
  return cos_ * p.real() + sin_ * p.imag();
}

Eigen::VectorXcd SensingOperator::adjoint(const Eigen::VectorXd& r) const {
  Eigen::VectorXcd out(unknowns());
  out.real() = cos_.transpose() * r;
  out.imag() = sin_.transpose() * r;
  return out;
}

SensingOperator SensingOperator::subset(std::span<const int> rows) const {
  SensingOperator s;
  s.grid_ = grid_;
  s.cos_.resize(static_cast<Eigen::Index>(rows.size()), cos_.cols());
  s.sin_.resize(static_cast<Eigen::Index>(rows.size()), sin_.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= this->rows()) throw InvalidArgument("sensing: row subset");
    s.samples_.push_back(samples_[rows[i]]);
    s.cos_.row(i) = cos_.row(rows[i]);
    s.sin_.row(i) = sin_.row(rows[i]);
  }
  return s;
}

std::uint64_t uniform_below(std::uint64_t bound, std::mt19937_64& rng) {
  if (bound == 0) throw InvalidArgument("uniform_below: empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do x = rng();
  while (x >= limit);
  return x % bound;
}

std::vector<int> select_sample_indices(int n_step, int m_step, std::uint64_t seed,
                                       SamplingPattern pattern) {
  if (m_step < 1 || m_step > n_step - 1)
    throw InvalidArgument("sample selection: m_step must lie in 1 .. n_step-1");
  std::vector<int> pool(n_step - 1);
  std::iota(pool.begin(), pool.end(), 1);
  if (pattern == SamplingPattern::window) {
    pool.resize(m_step);
    return pool;
  }
  std::mt19937_64 rng(seed);
  for (int i = 0; i < m_step; ++i) {
    const auto j = i + static_cast<int>(uniform_below(pool.size() - i, rng));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(m_step);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace drspec
