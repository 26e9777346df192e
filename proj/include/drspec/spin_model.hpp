#pragma once

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <vector>

namespace drspec {

/// Thrown for invalid model, schedule or configuration input.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical routine fails (eigensolver breakdown, no bracketed minimum).
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Physical system: N spin-1/2 particles with uniform Ising coupling j0/N and a transverse
/// field ramped down from b0 with time constant tau_ramp. Energies are in units of j0
/// only by convention; j0 itself is stored so that j0 != 1 works throughout.
struct ModelParams {
  int n_part = 400;
  double j0 = 1.0;
  double b0 = 2.0;
  double tau_ramp = 2.0;

  void validate() const;
  int dim() const { return n_part + 1; }
  /// Total spin S = N/2 of the maximal sector.
  double spin() const { return 0.5 * n_part; }
};

/// Real symmetric tridiagonal Hamiltonian of the maximal total-spin sector in the S_z basis,
/// ordered m = -N/2 ... +N/2 (basis index i <-> m = i - N/2).
///
///   H(m, m)   = -(j0/2) (m^2/N - 1/4)
///   H(m, m+1) = b * (1/2) sqrt(S(S+1) - m(m+1))
///
/// `ladder` holds the field-independent S_x elements so the same object can be re-fielded
/// without recomputing square roots.
struct SpinHamiltonian {
  int n_part = 0;
  double j0 = 1.0;
  double b_field = 0.0;
  Eigen::VectorXd diagonal;
  Eigen::VectorXd ladder;

  int dim() const { return static_cast<int>(diagonal.size()); }
  Eigen::VectorXd offdiagonal() const { return b_field * ladder; }
  SpinHamiltonian with_field(double b) const;

  /// out = H * in.
  void apply(const Eigen::VectorXcd& in, Eigen::VectorXcd& out) const;
  Eigen::MatrixXd dense() const;
  /// Gershgorin bounds on the spectrum.
  std::pair<double, double> spectral_bounds() const;
};

/// Full eigendecomposition with spin-reflection parity labels.
struct EigenSystem {
  Eigen::VectorXd energies;        // ascending
  Eigen::MatrixXd states;          // column k is the eigenvector of energies[k]
  std::vector<int> parities;       // +1 / -1 under m -> -m
  int ground_parity = +1;          // parity of the sector holding the ground state

  int dim() const { return static_cast<int>(energies.size()); }
  /// Indices (into energies) of the levels sharing the ground-state parity, ascending.
  std::vector<int> coupled_indices() const;
  /// E_n - E_0 for the coupled levels above the ground state, ascending.
  std::vector<double> coupled_excitations() const;
};

SpinHamiltonian build_hamiltonian(const ModelParams& params, double b);

EigenSystem diagonalize(const SpinHamiltonian& h);

/// Parity of the ground-state sector for b > 0. The transverse-field ground state has
/// alternating-sign amplitudes, which maps onto itself up to (-1)^N under m -> -m.
int ground_state_parity(int n_part);

/// Lowest `count` energies of the ground-parity sector (eigenvalues only).
std::vector<double> coupled_levels(const SpinHamiltonian& h, int count);

/// Permutation of basis indices implementing m -> -m: perm[i] = dim - 1 - i.
std::vector<int> parity_operator(int dim);

struct GapMinimum {
  double b_crit = 0.0;
  double gap = 0.0;
};

/// Grid point minimizing E2 - E0 (ground state to first same-parity excitation).
/// Throws NumericalFailure if the minimum sits on a grid endpoint.
GapMinimum minimum_gap(const ModelParams& params, std::span<const double> b_grid);

/// Location of the gap minimum to ~1e-6 j0, found by a coarse scan plus golden-section
/// refinement over (0, 2 j0].
GapMinimum critical_field(const ModelParams& params);

}  // namespace drspec
