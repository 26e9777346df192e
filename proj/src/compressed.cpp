#include "drspec/compressed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace drspec {

std::vector<double> log_tau_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1)
    throw InvalidArgument("tau grid: need 0 < lo <= hi and count >= 1");
  std::vector<double> g(count);
  for (int i = 0; i < count; ++i)
    g[i] = count == 1 ? hi : lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
  return g;
}

void RecoveryConfig::validate() const {
  if (n_step < 4) throw InvalidArgument("recovery: n_step must be >= 4");
  if (m_step < 1 || m_step >= n_step) throw InvalidArgument("recovery: m_step out of range");
  if (tau_grid.empty()) throw InvalidArgument("recovery: empty tau grid");
  for (double t : tau_grid)
    if (!(t > 0.0)) throw InvalidArgument("recovery: tau grid entries must be positive");
  if (!(epsilon > 0.0)) throw InvalidArgument("recovery: epsilon must be positive");
  if (max_iter < 1) throw InvalidArgument("recovery: max_iter must be >= 1");
}

std::string RecoveryConfig::sparsity_warning() const {
  const double need = expected_sparsity * std::log(static_cast<double>(n_step));
  if (m_step >= need) return {};
  return "m_step = " + std::to_string(m_step) + " is below s log(n_step) = " +
         std::to_string(need);
}

cplx soft_threshold(cplx coeff, double tau) {
  const double mag = std::abs(coeff);
  if (mag <= tau) return {};
  return coeff * ((mag - tau) / mag);
}

double recovery_objective(const SensingOperator& op, const Eigen::VectorXd& y,
                          const Eigen::VectorXcd& p, double tau_abs) {
  const double fit = 0.5 * (y - op.apply(p)).squaredNorm();
  return fit + 2.0 * tau_abs * p.cwiseAbs().sum();
}

SparsaResult sparsa_recover(const SensingOperator& op, const Eigen::VectorXd& y,
                            const RecoveryConfig& cfg, double tau_abs,
                            const Eigen::VectorXcd* warm_start) {
  if (y.size() != op.rows()) throw InvalidArgument("sparsa: sample count mismatch");
  if (!(tau_abs > 0.0)) throw InvalidArgument("sparsa: tau must be positive");
  const int nu = op.unknowns();
  SparsaResult res;
  res.coeffs = warm_start ? *warm_start : Eigen::VectorXcd::Zero(nu);
  if (res.coeffs.size() != nu) throw InvalidArgument("sparsa: warm start size mismatch");

  // Penalty per unknown is 2 tau |P_k|; its prox at step 1/alpha shrinks by 2 tau / alpha.
  Eigen::VectorXd resid = y - op.apply(res.coeffs);
  double f = 0.5 * resid.squaredNorm() + 2.0 * tau_abs * res.coeffs.cwiseAbs().sum();
  res.objective.push_back(f);
  Eigen::VectorXcd grad = -op.adjoint(resid);
  double alpha = 1.0;
  constexpr double kAlphaMin = 1e-30, kAlphaMax = 1e30;

  Eigen::VectorXcd next(nu);
  for (int it = 0; it < cfg.max_iter; ++it) {
    ++res.iterations;
    const double ref = std::max(res.coeffs.norm(), 1e-30);
    bool accepted = false, stalled = false;
    Eigen::VectorXd resid_next;
    double f_next = 0.0;
    for (;;) {
      for (int u = 0; u < nu; ++u)
        next[u] = soft_threshold(res.coeffs[u] - grad[u] / alpha, 2.0 * tau_abs / alpha);
      const double step = (next - res.coeffs).norm();
      if (step <= cfg.epsilon * ref) {
        stalled = true;
        break;
      }
      resid_next = y - op.apply(next);
      f_next = 0.5 * resid_next.squaredNorm() + 2.0 * tau_abs * next.cwiseAbs().sum();
      if (f_next <= f) {
        accepted = true;
        break;
      }
      alpha *= 2.0;
      if (alpha > kAlphaMax) {
        stalled = true;
        break;
      }
    }
    if (stalled) {
      res.converged = true;
      break;
    }
    if (!accepted) break;
    const Eigen::VectorXcd delta = next - res.coeffs;
    // A delta = resid - resid_next
    const double ad2 = (resid - resid_next).squaredNorm();
    const double d2 = delta.squaredNorm();
    res.coeffs = next;
    resid = std::move(resid_next);
    f = f_next;
    res.objective.push_back(f);
    grad = -op.adjoint(resid);
    if (std::sqrt(d2) < cfg.epsilon * ref) {
      res.converged = true;
      break;
    }
    alpha = std::clamp(d2 > 0.0 ? ad2 / d2 : alpha, kAlphaMin, kAlphaMax);
  }
  return res;
}

Eigen::VectorXcd debias(const SensingOperator& op, const Eigen::VectorXd& y,
                        const Eigen::VectorXcd& coeffs) {
  if (y.size() != op.rows()) throw InvalidArgument("debias: sample count mismatch");
  if (coeffs.size() != op.unknowns()) throw InvalidArgument("debias: coefficient size mismatch");
  std::vector<int> support;
  for (int u = 0; u < coeffs.size(); ++u)
    if (coeffs[u] != cplx(0.0)) support.push_back(u);
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(coeffs.size());
  if (support.empty()) return out;
  const auto cols = static_cast<Eigen::Index>(2 * support.size());
  if (cols > op.rows()) return coeffs;  // underdetermined: keep the shrunk estimate
  Eigen::MatrixXd a(op.rows(), cols);
  Eigen::VectorXcd unit = Eigen::VectorXcd::Zero(coeffs.size());
  for (std::size_t j = 0; j < support.size(); ++j) {
    unit[support[j]] = 1.0;
    a.col(2 * j) = op.apply(unit);
    unit[support[j]] = cplx(0.0, 1.0);
    a.col(2 * j + 1) = op.apply(unit);
    unit[support[j]] = 0.0;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < cols) return coeffs;
  const Eigen::VectorXd x = qr.solve(y);
  for (std::size_t j = 0; j < support.size(); ++j) out[support[j]] = cplx(x[2 * j], x[2 * j + 1]);
  return out;
}

double tau_scale(const SensingOperator& op, const Eigen::VectorXd& y) {
  // The real-signal adjoint sums the k and -k contributions, twice the complex M^dagger.
  return 0.5 * op.adjoint(y).cwiseAbs().maxCoeff();
}

CrossValidation cross_validate_tau(const SensingOperator& op, const Eigen::VectorXd& y,
                                   const RecoveryConfig& cfg, std::uint64_t split_seed) {
  cfg.validate();
  const int m = op.rows();
  if (m < 20) throw InvalidArgument("cross-validation needs at least 20 samples");
  if (y.size() != m) throw InvalidArgument("cross-validation: sample count mismatch");

  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(split_seed);
  for (int i = m - 1; i > 0; --i)
    std::swap(perm[i], perm[uniform_below(static_cast<std::uint64_t>(i) + 1, rng)]);
  std::vector<int> train(perm.begin(), perm.begin() + m / 2);
  std::vector<int> test(perm.begin() + m / 2, perm.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());

  const SensingOperator op_train = op.subset(train);
  const SensingOperator op_test = op.subset(test);
  Eigen::VectorXd y_train(train.size()), y_test(test.size());
  for (std::size_t i = 0; i < train.size(); ++i) y_train[i] = y[train[i]];
  for (std::size_t i = 0; i < test.size(); ++i) y_test[i] = y[test[i]];

  const double scale_train = tau_scale(op_train, y_train);
  CrossValidation cv;
  cv.residuals.assign(cfg.tau_grid.size(), std::numeric_limits<double>::infinity());
  std::vector<std::size_t> order(cfg.tau_grid.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return cfg.tau_grid[a] > cfg.tau_grid[b]; });

  const double scale_full = tau_scale(op, y);
  if (!(scale_train > 0.0) || !(scale_full > 0.0)) {
    // All-zero data: every threshold gives the zero solution.
    cv.tau_rel = *std::max_element(cfg.tau_grid.begin(), cfg.tau_grid.end());
    cv.tau_abs = std::max(cv.tau_rel * scale_full, std::numeric_limits<double>::min());
    std::fill(cv.residuals.begin(), cv.residuals.end(), y_test.norm());
    return cv;
  }

  Eigen::VectorXcd warm = Eigen::VectorXcd::Zero(op.unknowns());
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_idx = order.front();
  for (std::size_t idx : order) {
    const SparsaResult r = sparsa_recover(op_train, y_train, cfg,
                                          cfg.tau_grid[idx] * scale_train, &warm);
    warm = r.coeffs;
    // Non-converged trials are flagged but still scored.
    if (!r.converged) ++cv.failures;
    const double score = (y_test - op_test.apply(r.coeffs)).norm();
    cv.residuals[idx] = score;
    // Strict improvement only: ties keep the larger threshold.
    if (score < best) {
      best = score;
      best_idx = idx;
    }
  }
  if (cv.failures == static_cast<int>(order.size()))
    throw NumericalFailure("cross-validation: no threshold trial converged");
  cv.tau_rel = cfg.tau_grid[best_idx];
  cv.tau_abs = cv.tau_rel * scale_full;
  return cv;
}

SpectrumEstimate to_spectrum(const SensingOperator& op, const Eigen::VectorXcd& coeffs) {
  SpectrumEstimate s;
  s.grid = op.grid();
  for (int u = 0; u < op.unknowns(); ++u) {
    if (coeffs[u] == cplx{}) continue;
    s.coeffs[op.bin(u)] = coeffs[u];
    s.coeffs[-op.bin(u)] = std::conj(coeffs[u]);
  }
  return s;
}

double default_peak_floor(const SpectrumEstimate& spec) {
  std::vector<double> mags;
  for (const auto& [k, c] : spec.coeffs)
    if (k > 0 && std::abs(c) > 0.0) mags.push_back(std::abs(c));
  if (mags.empty()) return 0.0;
  const auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
  std::nth_element(mags.begin(), mid, mags.end());
  double median = *mid;
  if (mags.size() % 2 == 0) median = 0.5 * (median + *std::max_element(mags.begin(), mid));
  return 3.0 * median;
}

RecoveredPeaks extract_peaks(const SpectrumEstimate& spec, double floor) {
  RecoveredPeaks out;
  int last_bin = std::numeric_limits<int>::min();
  double wsum = 0.0, mag_sum = 0.0;
  cplx amp_sum{};
  auto flush = [&] {
    if (mag_sum > floor && mag_sum > 0.0)
      out.peaks.push_back(Peak{wsum / mag_sum, amp_sum, mag_sum});
    wsum = mag_sum = 0.0;
    amp_sum = {};
  };
  for (const auto& [k, c] : spec.coeffs) {  // std::map iterates in ascending bin order
    const double mag = std::abs(c);
    if (k <= 0 || mag == 0.0) continue;
    if (k != last_bin + 1) flush();
    wsum += mag * spec.grid.omega(k);
    mag_sum += mag;
    amp_sum += c;
    last_bin = k;
  }
  flush();
  return out;
}

const char* to_string(PeakFlag f) {
  switch (f) {
    case PeakFlag::accepted: return "accepted";
    case PeakFlag::spurious_low: return "spurious_low";
    case PeakFlag::spurious_high: return "spurious_high";
  }
  return "unknown";
}

PeakClass classify_peak(double omega, std::span<const double> lines, double match_tol,
                        double high_margin) {
  PeakClass pc;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const double d = std::abs(omega - lines[i]);
    if (d < best) {
      best = d;
      pc.line = static_cast<int>(i);
    }
  }
  if (best <= match_tol) return pc;
  pc.line = -1;
  const double top = lines.empty() ? 0.0 : *std::max_element(lines.begin(), lines.end());
  pc.flag = omega > top + high_margin ? PeakFlag::spurious_high : PeakFlag::spurious_low;
  return pc;
}

}  // namespace drspec
