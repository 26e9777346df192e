#include "drspec/observables.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

namespace drspec {

using cd = std::complex<double>;

Eigen::VectorXd product_state_probs(const SpinState& state) {
  return state.amplitudes.cwiseAbs2();
}

int highest_probable_index(const SpinState& state) {
  if (state.dim() == 0) throw InvalidArgument("highest_probable_index: empty state");
  const Eigen::VectorXd p = product_state_probs(state);
  const double pmax = p.maxCoeff();
  for (int i = state.dim() - 1; i >= 0; --i)
    if (p[i] >= pmax * (1.0 - 1e-9)) return i;
  return 0;
}

TimeSeries occupancy_timeseries(const SpinState& state_at_stop, const EigenSystem& eig_stop,
                                int m_star, int n_step, double dt_meas) {
  if (n_step < 2) throw InvalidArgument("occupancy_timeseries: n_step must be >= 2");
  if (!(dt_meas > 0.0)) throw InvalidArgument("occupancy_timeseries: dt_meas must be positive");
  if (state_at_stop.dim() != eig_stop.dim())
    throw InvalidArgument("occupancy_timeseries: dimension mismatch");
  if (m_star < 0 || m_star >= eig_stop.dim())
    throw InvalidArgument("occupancy_timeseries: m_star out of range");

  // <m*| exp(-iHt) |psi> = sum_k w_k exp(-i E_k t),  w_k = V[m*, k] <k|psi>
  const Eigen::VectorXcd coeff = eig_stop.states.transpose().cast<cd>() * state_at_stop.amplitudes;
  const int dim = eig_stop.dim();
  std::vector<cd> weight, rot, cur;
  std::vector<double> energy;
  for (int k = 0; k < dim; ++k) {
    const cd w = eig_stop.states(m_star, k) * coeff[k];
    if (std::abs(w) == 0.0) continue;
    weight.push_back(w);
    energy.push_back(eig_stop.energies[k]);
    rot.push_back(std::polar(1.0, -energy.back() * dt_meas));
  }

  TimeSeries ts;
  ts.t.resize(n_step);
  ts.values.resize(n_step);
  ts.m_star = m_star;
  ts.dt_meas = dt_meas;
  // Phases are recomputed directly every 64 steps to bound recurrence drift.
  cur.resize(weight.size());
  for (int n = 0; n < n_step; ++n) {
    const double t = n * dt_meas;
    if (n % 64 == 0)
      for (std::size_t j = 0; j < cur.size(); ++j)
        cur[j] = weight[j] * std::polar(1.0, -energy[j] * t);
    cd amp = 0.0;
    for (std::size_t j = 0; j < cur.size(); ++j) {
      amp += cur[j];
      cur[j] *= rot[j];
    }
    ts.t[n] = t;
    ts.values[n] = std::min(1.0, std::norm(amp));
  }
  return ts;
}

TimeSeries occupancy_timeseries(const SpinState& state_at_stop, const SpinHamiltonian& h_stop,
                                int n_step, double dt_meas) {
  TimeSeries ts = occupancy_timeseries(state_at_stop, diagonalize(h_stop),
                                       highest_probable_index(state_at_stop), n_step, dt_meas);
  ts.b_stop = h_stop.b_field;
  return ts;
}

std::vector<double> instantaneous_populations(const SpinState& state, const EigenSystem& eig,
                                              std::span<const int> k_list) {
  if (state.dim() != eig.dim()) throw InvalidArgument("instantaneous_populations: dimension");
  std::vector<double> out;
  out.reserve(k_list.size());
  for (int k : k_list) {
    if (k < 0 || k >= eig.dim())
      throw InvalidArgument("instantaneous_populations: index " + std::to_string(k));
    out.push_back(std::norm(eig.states.col(k).cast<cd>().dot(state.amplitudes)));
  }
  return out;
}

}  // namespace drspec
