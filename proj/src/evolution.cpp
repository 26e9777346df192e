#include "drspec/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <string>

namespace drspec {

using cd = std::complex<double>;

double RampSchedule::field(double t) const { return b0 * std::exp(-t / tau_ramp); }

void RampSchedule::validate() const {
  if (!std::isfinite(b0) || b0 <= 0.0) throw InvalidArgument("ramp: b0 must be positive");
  if (!std::isfinite(tau_ramp) || tau_ramp <= 0.0)
    throw InvalidArgument("ramp: tau_ramp must be positive");
  if (!std::isfinite(t_stop) || t_stop < 0.0)
    throw InvalidArgument("ramp: t_stop must be non-negative");
}

double ramp_stop_time(double b0, double tau_ramp, double b_target) {
  if (!(b_target > 0.0) || !(b_target <= b0))
    throw InvalidArgument("ramp: stopping field must lie in (0, b0], got " +
                          std::to_string(b_target));
  if (!(tau_ramp > 0.0)) throw InvalidArgument("ramp: tau_ramp must be positive");
  return tau_ramp * std::log(b0 / b_target);
}

RampSchedule RampSchedule::to_field(double b0, double tau_ramp, double b_target) {
  RampSchedule s{b0, tau_ramp, ramp_stop_time(b0, tau_ramp, b_target)};
  s.validate();
  return s;
}

void IntegratorConfig::validate() const {
  if (!std::isfinite(dt) || dt <= 0.0) throw InvalidArgument("integrator: dt must be positive");
}

namespace cfet4 {
double h1() { return 37.0 / 66.0 - 400.0 / 957.0 * std::sqrt(5.0 / 3.0); }
double h2() { return -4.0 / 33.0; }
double h3() { return 37.0 / 66.0 + 400.0 / 957.0 * std::sqrt(5.0 / 3.0); }
double h4() { return -11.0 / 162.0; }
double h5() { return 92.0 / 81.0; }
}  // namespace cfet4

namespace {

// J_0..J_kmax at x >= 0 by Miller's backward recurrence, normalized with
// J_0 + 2 sum J_{2k} = 1.
std::vector<double> bessel_j_sequence(double x, int kmax) {
  std::vector<double> j(kmax + 1, 0.0);
  if (x == 0.0) {
    j[0] = 1.0;
    return j;
  }
  const int start = kmax + 20 + static_cast<int>(std::sqrt(40.0 * (kmax + 1)));
  double next = 0.0, cur = 1e-300, norm = 0.0;
  for (int k = start; k >= 1; --k) {
    const double prev = 2.0 * k / x * cur - next;
    next = cur;
    cur = prev;
    // cur is now the unnormalized J_{k-1}
    if (k - 1 <= kmax) j[k - 1] = cur;
    if ((k - 1) % 2 == 0 && k - 1 > 0) norm += 2.0 * cur;
    if (std::abs(cur) > 1e250) {
      const double s = 1e-250;
      cur *= s;
      next *= s;
      norm *= s;
      for (int i = k - 1; i <= kmax; ++i) j[i] *= s;
    }
  }
  norm += cur;
  for (double& v : j) v /= norm;
  return j;
}

int chebyshev_order(double x) {
  return static_cast<int>(std::ceil(x + 10.0 * std::cbrt(x) + 20.0));
}

}  // namespace

namespace {

// Action of exp(-i duration H(b)) for H = diag + b * ladder (tridiagonal), in place on v.
void chebyshev_exponential(const SpinHamiltonian& h, double b, double duration,
                           Eigen::VectorXcd& v) {
  const int n = h.dim();
  if (v.size() != n) throw InvalidArgument("apply_exponential: dimension mismatch");
  if (duration == 0.0) return;
  const double* d = h.diagonal.data();
  const double* l = h.ladder.data();
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int i = 0; i < n; ++i) {
    const double r = std::abs(b) * ((i > 0 ? l[i - 1] : 0.0) + (i + 1 < n ? l[i] : 0.0));
    lo = std::min(lo, d[i] - r);
    hi = std::max(hi, d[i] + r);
  }
  const double center = 0.5 * (hi + lo);
  const double half = std::max(0.5 * (hi - lo), std::numeric_limits<double>::min());
  const double x = half * std::abs(duration);
  // exp(-i s x Hn) = sum_k (2 - delta_k0) (-i s)^k J_k(x) T_k(Hn), s = sign(duration)
  const cd unit = duration > 0.0 ? cd(0.0, -1.0) : cd(0.0, 1.0);
  const std::vector<double> jk = bessel_j_sequence(x, chebyshev_order(x));
  int order = static_cast<int>(jk.size()) - 1;
  while (order > 1 && order > x && std::abs(jk[order]) < 1e-18) --order;

  // Hn = (H - center) / half, folded into scaled diagonal and off-diagonal.
  thread_local std::vector<double> dn, on;
  thread_local std::vector<cd> w0, w1, acc;
  dn.resize(n);
  on.resize(n);
  w0.resize(n);
  w1.resize(n);
  acc.resize(n);
  const double inv = 1.0 / half;
  for (int i = 0; i < n; ++i) dn[i] = (d[i] - center) * inv;
  for (int i = 0; i + 1 < n; ++i) on[i] = b * l[i] * inv;
  on[n - 1] = 0.0;

  cd* a = acc.data();
  cd* t0 = w0.data();
  cd* t1 = w1.data();
  cd* vin = v.data();
  const cd c1 = 2.0 * jk[1] * unit;
  for (int i = 0; i < n; ++i) {
    cd hv = dn[i] * vin[i];
    if (i > 0) hv += on[i - 1] * vin[i - 1];
    if (i + 1 < n) hv += on[i] * vin[i + 1];
    t0[i] = vin[i];
    t1[i] = hv;
    a[i] = jk[0] * vin[i] + c1 * hv;
  }
  cd phase = unit;
  for (int k = 2; k <= order; ++k) {
    phase *= unit;
    const cd ck = 2.0 * jk[k] * phase;
    // t0 <- 2 Hn t1 - t0, overwriting in place; t0[i] is read only at row i
    cd prev = 0.0;
    for (int i = 0; i < n; ++i) {
      cd hv = dn[i] * t1[i];
      if (i > 0) hv += on[i - 1] * prev;
      if (i + 1 < n) hv += on[i] * t1[i + 1];
      prev = t1[i];
      const cd t2 = 2.0 * hv - t0[i];
      t0[i] = t2;
      a[i] += ck * t2;
    }
    std::swap(t0, t1);
  }
  const cd global = std::polar(1.0, -center * duration);
  for (int i = 0; i < n; ++i) vin[i] = global * a[i];
}

}  // namespace

void apply_exponential(const SpinHamiltonian& h, double duration, Eigen::VectorXcd& v) {
  chebyshev_exponential(h, h.b_field, duration, v);
}

FrozenPropagator::FrozenPropagator(const SpinHamiltonian& h) : eig_(diagonalize(h)) {}
FrozenPropagator::FrozenPropagator(EigenSystem eig) : eig_(std::move(eig)) {}

SpinState FrozenPropagator::apply(const SpinState& state, double duration) const {
  if (state.dim() != eig_.dim()) throw InvalidArgument("propagator: dimension mismatch");
  const Eigen::VectorXcd coeff = eig_.states.transpose().cast<cd>() * state.amplitudes;
  Eigen::VectorXcd rotated(coeff.size());
  for (Eigen::Index k = 0; k < coeff.size(); ++k)
    rotated[k] = coeff[k] * std::polar(1.0, -eig_.energies[k] * duration);
  return SpinState{eig_.states.cast<cd>() * rotated};
}

SpinState propagate_exponential(const SpinState& state, const SpinHamiltonian& h,
                                double duration) {
  return FrozenPropagator(h).apply(state, duration);
}

SpinState initial_ground_state(const ModelParams& params) {
  params.validate();
  const GapMinimum crit = critical_field(params);
  if (!(params.b0 > crit.b_crit))
    throw InvalidArgument("initial field b0 = " + std::to_string(params.b0) +
                          " does not exceed the critical field " + std::to_string(crit.b_crit));
  const EigenSystem eig = diagonalize(build_hamiltonian(params, params.b0));
  const Eigen::VectorXd g = eig.states.col(eig.coupled_indices().front());
  Eigen::Index imax = 0;
  g.cwiseAbs().maxCoeff(&imax);
  const double sign = g[imax] < 0.0 ? -1.0 : 1.0;
  return SpinState{(sign * g).cast<cd>()};
}

std::array<double, 3> cfet4_fields(const RampSchedule& schedule, double t, double dt) {
  using namespace cfet4;
  const double f1 = schedule.field(t + (0.5 - kNodeOffset) * dt);
  const double f2 = schedule.field(t + 0.5 * dt);
  const double f3 = schedule.field(t + (0.5 + kNodeOffset) * dt);
  return {h1() * f1 + h2() * f2 + h3() * f3,   // late-weighted, applied last
          h4() * f1 + h5() * f2 + h4() * f3,
          h3() * f1 + h2() * f2 + h1() * f3};  // early-weighted, applied first
}

SpinState cfet4_step(const SpinState& state, const SpinHamiltonian& h,
                     const RampSchedule& schedule, double t, double dt) {
  const auto b = cfet4_fields(schedule, t, dt);
  Eigen::VectorXcd v = state.amplitudes;
  chebyshev_exponential(h, b[2], cfet4::kSubstepOuter * dt, v);
  chebyshev_exponential(h, b[1], cfet4::kSubstepInner * dt, v);
  chebyshev_exponential(h, b[0], cfet4::kSubstepOuter * dt, v);
  return SpinState{std::move(v)};
}

SpinState trotter_midpoint_step(const SpinState& state, const SpinHamiltonian& h,
                                const RampSchedule& schedule, double t, double dt) {
  Eigen::VectorXcd v = state.amplitudes;
  chebyshev_exponential(h, schedule.field(t + 0.5 * dt), dt, v);
  return SpinState{std::move(v)};
}

namespace {

SpinState step(const SpinState& s, const SpinHamiltonian& h, const RampSchedule& schedule,
               double t, double dt, Integrator method) {
  return method == Integrator::cfet4 ? cfet4_step(s, h, schedule, t, dt)
                                     : trotter_midpoint_step(s, h, schedule, t, dt);
}

// Full steps before t_stop and the remaining partial step (zero if t_stop is on the grid).
std::pair<long, double> split_duration(double t_stop, double dt) {
  long n = static_cast<long>(std::floor(t_stop / dt + 1e-9));
  double rest = t_stop - static_cast<double>(n) * dt;
  if (rest <= 1e-12 * dt) rest = 0.0;
  return {n, rest};
}

}  // namespace

SpinState evolve_ramp(const ModelParams& params, const SpinState& initial,
                      const RampSchedule& schedule, const IntegratorConfig& cfg,
                      const RampObserver& observer) {
  params.validate();
  schedule.validate();
  cfg.validate();
  if (initial.dim() != params.dim()) throw InvalidArgument("evolve_ramp: state dimension");
  const SpinHamiltonian h = build_hamiltonian(params, 0.0);
  const auto [n, rest] = split_duration(schedule.t_stop, cfg.dt);
  SpinState s = initial;
  for (long k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    s = step(s, h, schedule, t, cfg.dt, cfg.method);
    if (observer) observer(t + cfg.dt, s);
  }
  if (rest > 0.0) {
    s = step(s, h, schedule, static_cast<double>(n) * cfg.dt, rest, cfg.method);
    if (observer) observer(schedule.t_stop, s);
  }
  return s;
}

SpinState evolve_ramp(const ModelParams& params, const RampSchedule& schedule,
                      const IntegratorConfig& cfg, const RampObserver& observer) {
  return evolve_ramp(params, initial_ground_state(params), schedule, cfg, observer);
}

std::vector<SpinState> evolve_ramp_to_fields(const ModelParams& params,
                                             std::span<const double> b_stops,
                                             const IntegratorConfig& cfg) {
  params.validate();
  cfg.validate();
  std::vector<RampSchedule> schedules;
  schedules.reserve(b_stops.size());
  for (double b : b_stops) schedules.push_back(RampSchedule::to_field(params.b0, params.tau_ramp, b));
  std::vector<std::size_t> order(b_stops.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return schedules[a].t_stop < schedules[b].t_stop;
  });

  const SpinHamiltonian h = build_hamiltonian(params, 0.0);
  const RampSchedule ramp{params.b0, params.tau_ramp, 0.0};
  std::vector<SpinState> out(b_stops.size());
  if (b_stops.empty()) return out;
  SpinState s = initial_ground_state(params);
  long done = 0;
  for (std::size_t idx : order) {
    const auto [n, rest] = split_duration(schedules[idx].t_stop, cfg.dt);
    for (; done < n; ++done)
      s = step(s, h, ramp, static_cast<double>(done) * cfg.dt, cfg.dt, cfg.method);
    out[idx] = rest > 0.0
                   ? step(s, h, ramp, static_cast<double>(n) * cfg.dt, rest, cfg.method)
                   : s;
  }
  return out;
}

}  // namespace drspec
