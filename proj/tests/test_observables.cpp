#include "drspec/evolution.hpp"
#include "drspec/observables.hpp"
#include "drspec/signal.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>

using namespace drspec;

namespace {

using cd = std::complex<double>;

ModelParams model(int n, double tau = 2.0) {
  ModelParams p;
  p.n_part = n;
  p.tau_ramp = tau;
  return p;
}

SpinState basis_state(int dim, int index) {
  SpinState s{Eigen::VectorXcd::Zero(dim)};
  s.amplitudes[index] = 1.0;
  return s;
}

// standard ramp: tau = 2 N/j0
SpinState standard_ramp(double b_stop) {
  const ModelParams p = model(400, 800.0);
  return evolve_ramp(p, RampSchedule::to_field(p.b0, p.tau_ramp, b_stop), IntegratorConfig{0.05});
}

}  // namespace

TEST_CASE("product-state probabilities of a basis state") {
  const SpinState s = basis_state(11, 5);  // m = 0
  const Eigen::VectorXd p = product_state_probs(s);
  CHECK(p[5] == 1.0);
  CHECK(p.sum() == 1.0);
  CHECK(highest_probable_index(s) == 5);
}

TEST_CASE("symmetric two-point distribution resolves to +m") {
  SpinState s{Eigen::VectorXcd::Zero(9)};
  s.amplitudes[1] = std::sqrt(0.5);
  s.amplitudes[7] = cd(0.0, std::sqrt(0.5));
  CHECK(highest_probable_index(s) == 7);
}

TEST_CASE("an eigenstate gives a constant series") {
  const EigenSystem eig = diagonalize(build_hamiltonian(model(40), 0.35));
  const SpinState s{eig.states.col(2).cast<cd>()};
  const TimeSeries ts = occupancy_timeseries(s, eig, 20, 256, 0.5);
  CHECK(ts.size() == 256);
  CHECK((ts.values.array() - ts.values[0]).abs().maxCoeff() < 1e-12);
  CHECK(ts.t[3] == doctest::Approx(1.5));
}

TEST_CASE("two-level superposition oscillates at the level spacing") {
  const EigenSystem eig = diagonalize(build_hamiltonian(model(40), 0.35));
  const auto idx = eig.coupled_indices();
  const int k0 = idx[0], k2 = idx[1];
  const double c0 = std::sqrt(0.7), c2 = std::sqrt(0.3);
  const SpinState s{(c0 * eig.states.col(k0) + c2 * eig.states.col(k2)).cast<cd>()};
  const int m = 27;
  const TimeSeries ts = occupancy_timeseries(s, eig, m, 500, 0.37);
  const double a = c0 * eig.states(m, k0), b = c2 * eig.states(m, k2);
  const double w = eig.energies[k2] - eig.energies[k0];
  for (int j = 0; j < ts.size(); ++j) {
    const double t = 0.37 * j;
    CHECK(ts.values[j] == doctest::Approx(a * a + b * b + 2 * a * b * std::cos(w * t)).epsilon(1e-11));
  }
}

TEST_CASE("series from the Hamiltonian overload measures the most probable state") {
  const ModelParams p = model(60, 6.0);
  const SpinState s = evolve_ramp(p, RampSchedule::to_field(p.b0, p.tau_ramp, 0.3), IntegratorConfig{0.05});
  const SpinHamiltonian h = build_hamiltonian(p, 0.3);
  const TimeSeries a = occupancy_timeseries(s, h, 128, 0.5);
  const TimeSeries b = occupancy_timeseries(s, diagonalize(h), highest_probable_index(s), 128, 0.5);
  CHECK(a.m_star == highest_probable_index(s));
  CHECK(a.b_stop == 0.3);
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(a.values[0] == doctest::Approx(product_state_probs(s)[a.m_star]).epsilon(1e-12));
}

TEST_CASE("instantaneous populations") {
  const EigenSystem eig = diagonalize(build_hamiltonian(model(50), 0.6));
  std::vector<int> all(eig.dim());
  for (int k = 0; k < eig.dim(); ++k) all[k] = k;
  const SpinState g{eig.states.col(0).cast<cd>()};
  const auto pg = instantaneous_populations(g, eig, all);
  CHECK(pg[0] == doctest::Approx(1.0).epsilon(1e-14));
  for (int k = 1; k < eig.dim(); ++k) CHECK(pg[k] < 1e-20);

  const ModelParams p = model(50, 4.0);
  const SpinState s = evolve_ramp(p, RampSchedule::to_field(p.b0, p.tau_ramp, 0.6), IntegratorConfig{0.05});
  double sum = 0.0;
  for (double x : instantaneous_populations(s, eig, all)) sum += x;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("measured product state along the standard ramp") {
  const int half = 200;
  CHECK(highest_probable_index(standard_ramp(0.5004)) - half == 0);
  CHECK(std::abs(highest_probable_index(standard_ramp(0.4505)) - half) == 86);
  CHECK(std::abs(highest_probable_index(standard_ramp(0.3508)) - half) == 143);
}

TEST_CASE("dominant tone just above the critical field") {
  const ModelParams p = model(400, 800.0);
  const SpinState s = standard_ramp(0.5004);
  const EigenSystem eig = diagonalize(build_hamiltonian(p, 0.5004));
  const TimeSeries ts = occupancy_timeseries(s, eig, highest_probable_index(s), 2048, 0.5);
  const SpectrumEstimate spec = dft(ts);
  int best = 1;
  for (int k = 1; k < 1024; ++k)
    if (std::abs(spec.at(k)) > std::abs(spec.at(best))) best = k;
  CHECK(std::abs(spec.grid.omega(best) - 0.1698) <= spec.grid.bin_width());
}

TEST_CASE("slow ramp leaves almost no excitation past the gap") {
  // tau = 4 N/j0
  const ModelParams p = model(400, 1600.0);
  const SpinState s = evolve_ramp(p, RampSchedule::to_field(p.b0, p.tau_ramp, 0.4), IntegratorConfig{0.1});
  const EigenSystem eig = diagonalize(build_hamiltonian(p, 0.4));
  const auto pops = instantaneous_populations(s, eig, std::vector<int>{0});
  CHECK(1.0 - pops[0] < 0.05);
}
