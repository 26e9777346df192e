#include "checks.hpp"

#include "drspec/compressed.hpp"
#include "drspec/evolution.hpp"
#include "drspec/noise.hpp"
#include "drspec/signal.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace drspec::checks {

namespace {

using cd = std::complex<double>;

Eigen::VectorXcd random_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i) v[i] = {g(rng), g(rng)};
  return v;
}

void note(Outcome& o, const std::string& what) {
  ++o.failures;
  if (o.detail.empty()) o.detail = what;
}

}  // namespace

Outcome unitarity(int cases, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> npart(2, 120);
  std::uniform_real_distribution<double> field(0.0, 2.5), dur(0.0, 5.0);
  Outcome o;
  for (int c = 0; c < cases; ++c, ++o.cases) {
    ModelParams p;
    p.n_part = npart(rng);
    const SpinHamiltonian h = build_hamiltonian(p, field(rng));
    Eigen::VectorXcd a = random_vector(p.dim(), rng), b = random_vector(p.dim(), rng);
    a.normalize();
    const cd before = a.dot(b);
    const double nb = b.norm();
    const double t = dur(rng);
    apply_exponential(h, t, a);
    apply_exponential(h, t, b);
    if (std::abs(a.norm() - 1.0) > 1e-12 || std::abs(b.norm() - nb) > 1e-12 * nb ||
        std::abs(a.dot(b) - before) > 1e-11 * nb) {
      std::ostringstream os;
      os << "N=" << p.n_part << " b=" << h.b_field << " t=" << t;
      note(o, os.str());
    }
  }
  return o;
}

Outcome parity_conservation(int cases, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> npart(2, 120);
  std::uniform_real_distribution<double> b0(0.8, 3.0), tau(0.5, 20.0), dt(0.01, 0.5);
  Outcome o;
  for (int c = 0; c < cases; ++c, ++o.cases) {
    ModelParams p;
    p.n_part = npart(rng);
    p.b0 = b0(rng);
    p.tau_ramp = tau(rng);
    const SpinHamiltonian h = build_hamiltonian(p, 0.0);
    // random state of definite parity
    const int sign = (rng() & 1) ? 1 : -1;
    Eigen::VectorXcd v = random_vector(p.dim(), rng);
    v = v + sign * Eigen::VectorXcd(v.reverse());
    SpinState s{v / v.norm()};
    const RampSchedule sched{p.b0, p.tau_ramp, 10.0};
    const double step = dt(rng);
    for (int k = 0; k < 5; ++k) {
      s = (k % 2 ? trotter_midpoint_step(s, h, sched, k * step, step)
                 : cfet4_step(s, h, sched, k * step, step));
    }
    const double wrong = (s.amplitudes - sign * Eigen::VectorXcd(s.amplitudes.reverse())).norm() / 2;
    if (wrong > 1e-12) note(o, "N=" + std::to_string(p.n_part));
  }
  return o;
}

Outcome parseval(int cases, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len(1, 300), pow2(0, 11);
  Outcome o;
  for (int c = 0; c < cases; ++c, ++o.cases) {
    const int n = (c % 2) ? len(rng) : (1 << pow2(rng));
    const Eigen::VectorXcd x = random_vector(n, rng);
    const auto big = unitary_dft(std::span<const cd>(x.data(), n), false);
    double ex = 0.0, eX = 0.0;
    for (int i = 0; i < n; ++i) {
      ex += std::norm(x[i]);
      eX += std::norm(big[i]);
    }
    if (std::abs(ex - eX) > 1e-12 * std::max(1.0, ex)) note(o, "n=" + std::to_string(n));
  }
  return o;
}

Outcome dft_roundtrip(int cases, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len(2, 300), pow2(1, 11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Outcome o;
  for (int c = 0; c < cases; ++c, ++o.cases) {
    const int n = (c % 2) ? len(rng) : (1 << pow2(rng));
    TimeSeries ts;
    ts.dt_meas = 0.1 + u(rng);
    ts.t.resize(n);
    ts.values.resize(n);
    for (int i = 0; i < n; ++i) {
      ts.t[i] = i * ts.dt_meas;
      ts.values[i] = u(rng);
    }
    const Eigen::VectorXd back = idft(dft(ts));
    if ((back - ts.values).cwiseAbs().maxCoeff() > 1e-12) note(o, "n=" + std::to_string(n));
    const auto cplx_back = idft_complex(dft(ts));
    double imag = 0.0;
    for (const cd& z : cplx_back) imag = std::max(imag, std::abs(z.imag()));
    if (imag > 1e-12) note(o, "imaginary residue n=" + std::to_string(n));
  }
  return o;
}

Outcome soft_threshold_nonexpansive(int cases, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 2.0);
  std::uniform_real_distribution<double> tau(0.0, 3.0);
  Outcome o;
  for (int c = 0; c < cases; ++c, ++o.cases) {
    const cd x{g(rng), g(rng)}, y{g(rng), g(rng)};
    const double t = tau(rng);
    const cd sx = soft_threshold(x, t), sy = soft_threshold(y, t);
    if (std::abs(sx - sy) > std::abs(x - y) * (1 + 1e-15) + 1e-15) note(o, "pair");
    if (std::abs(sx) > std::abs(x)) note(o, "shrinkage grew a coefficient");
  }
  return o;
}

Outcome objective_monotone(int cases, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> tones(1, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g;
  Outcome o;
  const FrequencyGrid grid{128, 0.5};
  for (int c = 0; c < cases; ++c, ++o.cases) {
    const std::vector<int> idx = select_sample_indices(grid.n_step, 40, rng());
    const SensingOperator op(grid, idx);
    Eigen::VectorXcd truth = Eigen::VectorXcd::Zero(op.unknowns());
    for (int k = tones(rng); k > 0; --k)
      truth[static_cast<int>(u(rng) * op.unknowns())] = std::polar(0.1 + u(rng), 6.283 * u(rng));
    Eigen::VectorXd y = op.apply(truth);
    for (int i = 0; i < y.size(); ++i) y[i] += 0.05 * g(rng);
    RecoveryConfig rc;
    rc.n_step = grid.n_step;
    rc.m_step = 40;
    rc.max_iter = 300;
    const double tau_abs = (0.02 + 0.9 * u(rng)) * tau_scale(op, y);
    const SparsaResult r = sparsa_recover(op, y, rc, tau_abs);
    for (std::size_t i = 1; i < r.objective.size(); ++i)
      if (r.objective[i] > r.objective[i - 1] * (1 + 1e-14) + 1e-300) {
        note(o, "iteration " + std::to_string(i));
        break;
      }
    if (std::abs(r.objective.back() - recovery_objective(op, y, r.coeffs, tau_abs)) >
        1e-12 * std::max(1.0, r.objective.back()))
      note(o, "reported objective differs from recomputation");
  }
  return o;
}

Moments poisson_moments(double lambda, long draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double mean = 0.0, m2 = 0.0;
  for (long i = 0; i < draws; ++i) {
    const double x = static_cast<double>(poisson_sample(lambda, rng));
    const double d = x - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (x - mean);
  }
  return {mean, m2 / static_cast<double>(draws - 1)};
}

double poisson_zero_fraction(double lambda, long draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  long zeros = 0;
  for (long i = 0; i < draws; ++i) zeros += poisson_sample(lambda, rng) == 0;
  return static_cast<double>(zeros) / static_cast<double>(draws);
}

ChiSquare poisson_chi_square(double lambda, long draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int top = static_cast<int>(lambda + 20 * std::sqrt(lambda) + 20);
  std::vector<long> hist(top + 1, 0);
  for (long i = 0; i < draws; ++i) hist[std::min<std::int64_t>(poisson_sample(lambda, rng), top)]++;

  // pmf by log-space evaluation, top cell takes the upper tail
  std::vector<double> pmf(top + 1);
  double acc = 0.0;
  for (int k = 0; k < top; ++k) {
    pmf[k] = std::exp(k * std::log(lambda) - lambda - std::lgamma(k + 1.0));
    acc += pmf[k];
  }
  pmf[top] = std::max(0.0, 1.0 - acc);

  // cells grow outward-in from each tail until the expected count reaches 5; a short
  // remainder next to the mode joins its neighbour
  struct Cell {
    double expected = 0.0;
    long observed = 0;
  };
  const double n = static_cast<double>(draws);
  const int mode = static_cast<int>(lambda);
  auto sweep = [&](int from, int to, int step) {
    std::vector<Cell> cells;
    Cell run;
    for (int k = from; k != to + step; k += step) {
      run.expected += pmf[k] * n;
      run.observed += hist[k];
      if (run.expected >= 5.0) {
        cells.push_back(run);
        run = {};
      }
    }
    if (run.expected > 0.0) {
      if (cells.empty()) {
        cells.push_back(run);
      } else {
        cells.back().expected += run.expected;
        cells.back().observed += run.observed;
      }
    }
    return cells;
  };
  std::vector<Cell> cells = sweep(0, mode, 1);
  const std::vector<Cell> upper = sweep(top, mode + 1, -1);
  cells.insert(cells.end(), upper.rbegin(), upper.rend());

  ChiSquare out;
  for (const Cell& c : cells) {
    const double d = static_cast<double>(c.observed) - c.expected;
    out.statistic += d * d / c.expected;
  }
  out.dof = static_cast<int>(cells.size()) - 1;
  boost::math::chi_squared dist(out.dof);
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
  return out;
}

}  // namespace drspec::checks

namespace drspec::checks {

SparseTrial sparse_tone_trial(int n_step, int m_step, int tones, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const FrequencyGrid grid{n_step, 0.5};
  const std::vector<int> idx = select_sample_indices(n_step, m_step, rng());
  const SensingOperator op(grid, idx);
  Eigen::VectorXcd truth = Eigen::VectorXcd::Zero(op.unknowns());
  std::uniform_real_distribution<double> amp(0.5, 1.0), phase(0.0, 2 * M_PI);
  for (int placed = 0; placed < tones;) {
    const auto u = static_cast<int>(uniform_below(static_cast<std::uint64_t>(op.unknowns()), rng));
    if (truth[u] != cd(0.0)) continue;
    truth[u] = std::polar(0.05 * amp(rng), phase(rng));
    ++placed;
  }
  const Eigen::VectorXd y = op.apply(truth);
  RecoveryConfig rc;
  rc.n_step = n_step;
  rc.m_step = m_step;
  const CrossValidation cv = cross_validate_tau(op, y, rc, rng());
  const Eigen::VectorXcd got = debias(op, y, sparsa_recover(op, y, rc, cv.tau_abs).coeffs);
  SparseTrial out;
  out.support_ok = true;
  for (int u = 0; u < op.unknowns(); ++u)
    if ((truth[u] != cd(0.0)) != (got[u] != cd(0.0))) out.support_ok = false;
  out.coeff_error = (got - truth).cwiseAbs().maxCoeff();
  return out;
}

}  // namespace drspec::checks
