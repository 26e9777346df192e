#include "drspec/spin_model.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace drspec {

namespace {

// One spin-reflection sector written as a tridiagonal matrix in the symmetrized basis
//   u_j = (|i_j> + parity |mirror(i_j)>) / sqrt(2),   i_j in the upper half of the basis,
// plus the unpaired center state m = 0 when N is even and the sector is even.
struct Sector {
  int parity = +1;
  bool has_center = false;  // coordinate 0 is the (unpaired) center state
  int first_upper = 0;      // full index of the first paired coordinate
  Eigen::VectorXd diag;
  Eigen::VectorXd off;
};

Sector make_sector(const SpinHamiltonian& h, int parity) {
  const int n = h.n_part;
  const Eigen::VectorXd off_full = h.offdiagonal();
  Sector s;
  s.parity = parity;
  if (n % 2 == 0) {
    const int c = n / 2;
    s.has_center = (parity == +1);
    s.first_upper = c + 1;
    const int paired = n / 2;
    const int size = paired + (s.has_center ? 1 : 0);
    s.diag.resize(size);
    s.off.resize(std::max(size - 1, 0));
    int j = 0;
    if (s.has_center) {
      s.diag[0] = h.diagonal[c];
      if (size > 1) s.off[0] = std::sqrt(2.0) * off_full[c];
      j = 1;
    }
    for (int k = 0; k < paired; ++k, ++j) {
      const int i = c + 1 + k;
      s.diag[j] = h.diagonal[i];
      if (j + 1 < size) s.off[j] = off_full[i];
    }
  } else {
    const int half = (n + 1) / 2;
    s.first_upper = half;
    const int size = half;
    s.diag.resize(size);
    s.off.resize(std::max(size - 1, 0));
    for (int j = 0; j < size; ++j) {
      const int i = half + j;
      s.diag[j] = h.diagonal[i];
      if (j + 1 < size) s.off[j] = off_full[i];
    }
    // <u_0|H|u_0> picks up the coupling between m = +1/2 and its mirror m = -1/2.
    s.diag[0] += parity * off_full[half - 1];
  }
  return s;
}

struct TridiagResult {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

// Symmetric tridiagonal eigensolver (LAPACK dstevr, MRRR). count < 0 requests all levels.
TridiagResult solve_tridiagonal(const Eigen::VectorXd& diag, const Eigen::VectorXd& off,
                                bool want_vectors, int count = -1) {
  const lapack_int n = static_cast<lapack_int>(diag.size());
  TridiagResult out;
  if (n == 0) return out;
  Eigen::VectorXd d = diag;
  Eigen::VectorXd e = Eigen::VectorXd::Zero(std::max<lapack_int>(n, 1));
  e.head(off.size()) = off;
  const bool all = count < 0 || count >= n;
  const lapack_int iu = all ? n : static_cast<lapack_int>(count);
  out.values.resize(n);
  if (want_vectors) out.vectors.resize(n, all ? n : iu);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(n));
  lapack_int found = 0;
  double dummy = 0.0;
  const lapack_int info = LAPACKE_dstevr(
      LAPACK_COL_MAJOR, want_vectors ? 'V' : 'N', all ? 'A' : 'I', n, d.data(), e.data(),
      0.0, 0.0, 1, iu, 0.0, &found, out.values.data(),
      want_vectors ? out.vectors.data() : &dummy, want_vectors ? n : 1, support.data());
  if (info != 0) {
    throw NumericalFailure("tridiagonal eigensolver failed (dstevr info = " +
                           std::to_string(info) + ")");
  }
  out.values.conservativeResize(found);
  return out;
}

Eigen::VectorXd embed(const Sector& s, const Eigen::Ref<const Eigen::VectorXd>& x, int n_part) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n_part + 1);
  const double r = 1.0 / std::sqrt(2.0);
  int j = 0;
  if (s.has_center) {
    v[n_part / 2] = x[0];
    j = 1;
  }
  for (int i = s.first_upper; j < x.size(); ++i, ++j) {
    v[i] = r * x[j];
    v[n_part - i] = s.parity * r * x[j];
  }
  return v;
}

}  // namespace

void ModelParams::validate() const {
  if (n_part < 2) throw InvalidArgument("n_part must be >= 2");
  if (!(j0 > 0.0) || !std::isfinite(j0)) throw InvalidArgument("j0 must be positive");
  if (!(b0 >= 0.0) || !std::isfinite(b0)) throw InvalidArgument("b0 must be >= 0");
  if (!(tau_ramp > 0.0) || !std::isfinite(tau_ramp)) {
    throw InvalidArgument("tau_ramp must be positive");
  }
}

SpinHamiltonian SpinHamiltonian::with_field(double b) const {
  SpinHamiltonian h = *this;
  h.b_field = b;
  return h;
}

void SpinHamiltonian::apply(const Eigen::VectorXcd& in, Eigen::VectorXcd& out) const {
  const int n = dim();
  out.resize(n);
  for (int i = 0; i < n; ++i) out[i] = diagonal[i] * in[i];
  for (int i = 0; i + 1 < n; ++i) {
    const double o = b_field * ladder[i];
    out[i] += o * in[i + 1];
    out[i + 1] += o * in[i];
  }
}

Eigen::MatrixXd SpinHamiltonian::dense() const {
  const int n = dim();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  m.diagonal() = diagonal;
  for (int i = 0; i + 1 < n; ++i) {
    m(i, i + 1) = m(i + 1, i) = b_field * ladder[i];
  }
  return m;
}

std::pair<double, double> SpinHamiltonian::spectral_bounds() const {
  const int n = dim();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int i = 0; i < n; ++i) {
    double radius = 0.0;
    if (i > 0) radius += std::abs(b_field * ladder[i - 1]);
    if (i + 1 < n) radius += std::abs(b_field * ladder[i]);
    lo = std::min(lo, diagonal[i] - radius);
    hi = std::max(hi, diagonal[i] + radius);
  }
  return {lo, hi};
}

SpinHamiltonian build_hamiltonian(const ModelParams& params, double b) {
  if (params.n_part < 2) throw InvalidArgument("n_part must be >= 2");
  if (!(b >= 0.0)) throw InvalidArgument("field must be >= 0");
  const int n = params.n_part;
  const double s = params.spin();
  SpinHamiltonian h;
  h.n_part = n;
  h.j0 = params.j0;
  h.b_field = b;
  h.diagonal.resize(n + 1);
  h.ladder.resize(n);
  for (int i = 0; i <= n; ++i) {
    const double m = i - s;
    h.diagonal[i] = -0.5 * params.j0 * (m * m / n - 0.25);
  }
  for (int i = 0; i < n; ++i) {
    const double m = i - s;
    h.ladder[i] = 0.5 * std::sqrt(s * (s + 1.0) - m * (m + 1.0));
  }
  return h;
}

int ground_state_parity(int n_part) { return n_part % 2 == 0 ? +1 : -1; }

EigenSystem diagonalize(const SpinHamiltonian& h) {
  const int n = h.n_part;
  const int gp = ground_state_parity(n);
  // Ground-parity sector first so that exactly degenerate pairs keep it at the lower index.
  const Sector sectors[2] = {make_sector(h, gp), make_sector(h, -gp)};

  struct Level {
    double energy;
    int sector;
    int column;
  };
  std::vector<Level> levels;
  TridiagResult solved[2];
  for (int s = 0; s < 2; ++s) {
    solved[s] = solve_tridiagonal(sectors[s].diag, sectors[s].off, true);
    for (int k = 0; k < solved[s].values.size(); ++k) {
      levels.push_back({solved[s].values[k], s, k});
    }
  }
  std::stable_sort(levels.begin(), levels.end(),
                   [](const Level& a, const Level& b) { return a.energy < b.energy; });
  // Pairs degenerate to rounding (small b) are ordered ground-parity first.
  for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
    const double tol = 1e-12 * std::max(1.0, std::abs(levels[k].energy));
    if (levels[k].sector == 1 && levels[k + 1].sector == 0 &&
        levels[k + 1].energy - levels[k].energy <= tol) {
      std::swap(levels[k], levels[k + 1]);
    }
  }

  EigenSystem eig;
  eig.ground_parity = gp;
  eig.energies.resize(n + 1);
  eig.states.resize(n + 1, n + 1);
  eig.parities.resize(n + 1);
  for (int k = 0; k <= n; ++k) {
    const Level& l = levels[k];
    eig.energies[k] = l.energy;
    eig.states.col(k) = embed(sectors[l.sector], solved[l.sector].vectors.col(l.column), n);
    eig.parities[k] = sectors[l.sector].parity;
  }
  return eig;
}

std::vector<int> EigenSystem::coupled_indices() const {
  std::vector<int> idx;
  for (int k = 0; k < dim(); ++k) {
    if (parities[k] == ground_parity) idx.push_back(k);
  }
  return idx;
}

std::vector<double> EigenSystem::coupled_excitations() const {
  const auto idx = coupled_indices();
  std::vector<double> out;
  for (std::size_t k = 1; k < idx.size(); ++k) {
    out.push_back(energies[idx[k]] - energies[idx[0]]);
  }
  return out;
}

std::vector<double> coupled_levels(const SpinHamiltonian& h, int count) {
  const Sector s = make_sector(h, ground_state_parity(h.n_part));
  const auto r = solve_tridiagonal(s.diag, s.off, false, count);
  return {r.values.data(), r.values.data() + r.values.size()};
}

std::vector<int> parity_operator(int dim) {
  if (dim < 1) throw InvalidArgument("dim must be >= 1");
  std::vector<int> perm(dim);
  for (int i = 0; i < dim; ++i) perm[i] = dim - 1 - i;
  return perm;
}

namespace {

double coupled_gap(const SpinHamiltonian& h0, double b) {
  const auto lv = coupled_levels(h0.with_field(b), 2);
  if (lv.size() < 2) throw NumericalFailure("sector too small for a coupled gap");
  return lv[1] - lv[0];
}

}  // namespace

GapMinimum minimum_gap(const ModelParams& params, std::span<const double> b_grid) {
  if (b_grid.size() < 3) throw InvalidArgument("field grid needs at least 3 points");
  const SpinHamiltonian h0 = build_hamiltonian(params, 0.0);
  std::size_t best = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < b_grid.size(); ++i) {
    const double g = coupled_gap(h0, b_grid[i]);
    if (g < best_gap) {
      best_gap = g;
      best = i;
    }
  }
  if (best == 0 || best + 1 == b_grid.size()) {
    throw NumericalFailure("field grid does not bracket the gap minimum");
  }
  return {b_grid[best], best_gap};
}

GapMinimum critical_field(const ModelParams& params) {
  params.validate();
  const SpinHamiltonian h0 = build_hamiltonian(params, 0.0);
  const double upper = 2.0 * params.j0;
  constexpr int kCoarse = 200;
  std::vector<double> grid(kCoarse);
  for (int i = 0; i < kCoarse; ++i) grid[i] = upper * (i + 1) / kCoarse;
  std::size_t best = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double g = coupled_gap(h0, grid[i]);
    if (g < best_gap) {
      best_gap = g;
      best = i;
    }
  }
  if (best == 0 || best + 1 == grid.size()) {
    throw NumericalFailure("no interior gap minimum below 2 j0");
  }
  // Golden-section refinement on the bracketing cells.
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = grid[best - 1];
  double b = grid[best + 1];
  double x1 = b - phi * (b - a);
  double x2 = a + phi * (b - a);
  double f1 = coupled_gap(h0, x1);
  double f2 = coupled_gap(h0, x2);
  while (b - a > 1e-8 * params.j0) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = coupled_gap(h0, x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = coupled_gap(h0, x2);
    }
  }
  const double bc = 0.5 * (a + b);
  return {bc, coupled_gap(h0, bc)};
}

}  // namespace drspec
