#pragma once

#include "drspec/evolution.hpp"
#include "drspec/spin_model.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace drspec {

/// Observable samples on the uniform hold grid t_k = k * dt_meas, k = 0 .. n_step-1, with the
/// clock starting at t_stop.
struct TimeSeries {
  Eigen::VectorXd t;
  Eigen::VectorXd values;
  double b_stop = 0.0;
  int m_star = 0;  // basis index of the measured product state
  double dt_meas = 0.0;

  int size() const { return static_cast<int>(values.size()); }
};

/// |amplitude|^2 per basis state.
Eigen::VectorXd product_state_probs(const SpinState& state);

/// Argmax of product_state_probs. Members of a +-m pair equal to 1e-9 relative count as a
/// tie and the larger basis index (m >= 0) wins.
int highest_probable_index(const SpinState& state);

/// values[k] = |<m_star| exp(-i k dt_meas H) |psi>|^2 via one eigendecomposition.
TimeSeries occupancy_timeseries(const SpinState& state_at_stop, const EigenSystem& eig_stop,
                                int m_star, int n_step, double dt_meas);

/// Same, diagonalizing h_stop and measuring the most probable product state at t_stop.
TimeSeries occupancy_timeseries(const SpinState& state_at_stop, const SpinHamiltonian& h_stop,
                                int n_step, double dt_meas);

/// |<psi_k|state>|^2 for each requested eigen-index k.
std::vector<double> instantaneous_populations(const SpinState& state, const EigenSystem& eig,
                                              std::span<const int> k_list);

}  // namespace drspec
