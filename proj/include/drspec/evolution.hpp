#pragma once

#include "drspec/spin_model.hpp"

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <span>
#include <vector>

namespace drspec {

/// Complex amplitudes over the N+1 total-spin basis states, same ordering as SpinHamiltonian.
struct SpinState {
  Eigen::VectorXcd amplitudes;

  int dim() const { return static_cast<int>(amplitudes.size()); }
  double norm() const { return amplitudes.norm(); }
};

/// Exponential field ramp b(t) = b0 exp(-t / tau_ramp), stopped at t_stop.
struct RampSchedule {
  double b0 = 2.0;
  double tau_ramp = 2.0;
  double t_stop = 0.0;

  double field(double t) const;
  void validate() const;

  /// Schedule that stops exactly when the field reaches b_target.
  static RampSchedule to_field(double b0, double tau_ramp, double b_target);
};

/// Time at which b0 exp(-t/tau) equals b_target.
double ramp_stop_time(double b0, double tau_ramp, double b_target);

enum class Integrator { cfet4, trotter_midpoint };

struct IntegratorConfig {
  double dt = 0.01;
  Integrator method = Integrator::cfet4;

  void validate() const;
};

/// Coefficients of the optimized fourth-order commutator-free exponential integrator.
namespace cfet4 {
inline const double kSubstepOuter = 11.0 / 40.0;
inline const double kSubstepInner = 9.0 / 20.0;
inline const double kNodeOffset = 0.3872983346207417;  // sqrt(3/20)
double h1();
double h2();
double h3();
double h4();
double h5();
}  // namespace cfet4

/// In-place action of exp(-i * duration * H) on `v` through a Chebyshev expansion whose
/// truncation error is below double rounding. Used for the per-substep exponentials of the
/// ramp integrators, where every substep sees a different field.
void apply_exponential(const SpinHamiltonian& h, double duration, Eigen::VectorXcd& v);

/// exp(-i t H) for a frozen Hamiltonian through its eigendecomposition, which is computed
/// once and reused for any number of durations.
class FrozenPropagator {
 public:
  explicit FrozenPropagator(const SpinHamiltonian& h);
  explicit FrozenPropagator(EigenSystem eig);

  SpinState apply(const SpinState& state, double duration) const;
  const EigenSystem& eigensystem() const { return eig_; }

 private:
  EigenSystem eig_;
};

/// One-shot convenience over FrozenPropagator.
SpinState propagate_exponential(const SpinState& state, const SpinHamiltonian& h,
                                double duration);

/// Ground state of H(b0); the largest-magnitude amplitude is made real positive.
/// Throws InvalidArgument when b0 does not exceed the critical field.
SpinState initial_ground_state(const ModelParams& params);

/// Fields at which the three CFET exponentials are evaluated for the step [t, t+dt].
std::array<double, 3> cfet4_fields(const RampSchedule& schedule, double t, double dt);

SpinState cfet4_step(const SpinState& state, const SpinHamiltonian& h,
                     const RampSchedule& schedule, double t, double dt);

SpinState trotter_midpoint_step(const SpinState& state, const SpinHamiltonian& h,
                                const RampSchedule& schedule, double t, double dt);

using RampObserver = std::function<void(double t, const SpinState& state)>;

/// Evolves `initial` from t = 0 to schedule.t_stop in steps of cfg.dt; the last step is
/// shortened to t_stop mod dt. The observer, when set, sees the state after every step.
SpinState evolve_ramp(const ModelParams& params, const SpinState& initial,
                      const RampSchedule& schedule, const IntegratorConfig& cfg,
                      const RampObserver& observer = {});

/// Same, starting from initial_ground_state(params).
SpinState evolve_ramp(const ModelParams& params, const RampSchedule& schedule,
                      const IntegratorConfig& cfg, const RampObserver& observer = {});

/// States at several stopping fields from a single trajectory (ramp from params.b0 with
/// constant params.tau_ramp). Each result is identical to
/// a separate evolve_ramp call to that field: the shared trajectory stays on the dt grid and
/// every stop branches off with its own partial step. Results follow the order of b_stops.
std::vector<SpinState> evolve_ramp_to_fields(const ModelParams& params,
                                             std::span<const double> b_stops,
                                             const IntegratorConfig& cfg);

}  // namespace drspec
