#pragma once

#include <cmath>
#include <stdexcept>

#include "kicktop/common.hpp"
#include "kicktop/phase_grid.hpp"

namespace kicktop {

// Spin-S angular momentum operators in the S_z eigenbasis, ordered
// m = S, S-1, ..., -S (so |S,S> is the first basis vector).
struct SpinOperators {
  double spin = 0.0;  // S
  int dim = 0;        // 2S + 1
  MatrixXcd sx, sy, sz;
};

struct PhasePoint {
  double theta = 0.0;  // polar angle in [0, pi]
  double phi = 0.0;    // azimuthal angle in [-pi, pi]
};

inline int spin_dimension(double spin) {
  const double two_s = 2.0 * spin;
  if (!(spin > 0.0) || std::abs(two_s - std::round(two_s)) > 1e-9)
    throw std::invalid_argument("spin must be a positive half-integer");
  return static_cast<int>(std::lround(two_s)) + 1;
}

// Builds S_x, S_y, S_z from the ladder operators, with matrix elements
// sqrt(S(S+1) - m(m+1)) on the raising off-diagonal.
inline SpinOperators build_spin_operators(double spin) {
  const int dim = spin_dimension(spin);
  SpinOperators ops;
  ops.spin = spin;
  ops.dim = dim;
  ops.sx = MatrixXcd::Zero(dim, dim);
  ops.sy = MatrixXcd::Zero(dim, dim);
  ops.sz = MatrixXcd::Zero(dim, dim);
  const double casimir = spin * (spin + 1.0);
  for (int i = 0; i < dim; ++i) {
    const double m = spin - i;
    ops.sz(i, i) = m;
    if (i > 0) {
      // S_+ |S,m> = sqrt(S(S+1) - m(m+1)) |S,m+1>; row i-1 holds m+1
      const double c = std::sqrt(casimir - m * (m + 1.0));
      ops.sx(i - 1, i) += 0.5 * c;
      ops.sx(i, i - 1) += 0.5 * c;
      ops.sy(i - 1, i) += complexd(0.0, -0.5) * c;
      ops.sy(i, i - 1) += complexd(0.0, 0.5) * c;
    }
  }
  return ops;
}

inline void validate_phase_point(const PhasePoint& p) {
  if (p.theta < 0.0 || p.theta > pi)
    throw std::invalid_argument("PhasePoint: theta outside [0, pi]");
  if (p.phi < -pi || p.phi > pi)
    throw std::invalid_argument("PhasePoint: phi outside [-pi, pi]");
}

// Spin coherent state |theta,phi> = exp[i theta (S_x sin phi - S_y cos phi)] |S,S>
// by the closed-form binomial expansion: the amplitude on |S,m> is
//   sqrt(binom(2S, S-m)) cos(theta/2)^(S+m) sin(theta/2)^(S-m) e^{i (S-m) phi}.
// The phase convention (and the absence of any extra global phase) is pinned
// against coherent_state_oracle in the test suite.  Magnitudes are accumulated
// in the log domain so large S does not overflow the binomial factor.
inline VectorXcd coherent_state(double spin, const PhasePoint& p) {
  const int dim = spin_dimension(spin);
  validate_phase_point(p);
  const double two_s = 2.0 * spin;
  const double ch = std::cos(0.5 * p.theta);
  const double sh = std::sin(0.5 * p.theta);
  const double lch = ch > 0.0 ? std::log(ch) : 0.0;
  const double lsh = sh > 0.0 ? std::log(sh) : 0.0;
  const double lgamma_2s = std::lgamma(two_s + 1.0);
  VectorXcd state(dim);
  for (int i = 0; i < dim; ++i) {
    const int dn = i;                 // S - m: power of sin(theta/2)
    const double up = two_s - i;      // S + m: power of cos(theta/2)
    if ((ch == 0.0 && up > 0.0) || (sh == 0.0 && dn > 0)) {
      state(i) = 0.0;
      continue;
    }
    const double log_binom =
        0.5 * (lgamma_2s - std::lgamma(dn + 1.0) - std::lgamma(up + 1.0));
    const double mag = std::exp(log_binom + up * lch + dn * lsh);
    state(i) = std::polar(mag, dn * p.phi);
  }
  return state;
}

// Ground-truth evaluation of the same rotation by eigendecomposition of the
// Hermitian generator theta (S_x sin phi - S_y cos phi).  Independent of the
// closed form above; intended for small S.
inline VectorXcd coherent_state_oracle(double spin, const PhasePoint& p) {
  const SpinOperators ops = build_spin_operators(spin);
  validate_phase_point(p);
  const MatrixXcd gen =
      p.theta * (std::sin(p.phi) * ops.sx - std::cos(p.phi) * ops.sy);
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(gen);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("coherent_state_oracle: eigensolver failed");
  VectorXcd highest = VectorXcd::Zero(ops.dim);
  highest(0) = 1.0;  // |S,S>
  const VectorXcd phases =
      (complexd(0.0, 1.0) * es.eigenvalues().cast<complexd>()).array().exp();
  return es.eigenvectors() *
         (phases.asDiagonal() * (es.eigenvectors().adjoint() * highest));
}

// Table of coherent states at the centers of a PhaseGrid, one column per cell.
struct CoherentTable {
  PhaseGrid grid;
  double spin = 0.0;
  MatrixXcd amp;  // dim x ncells, column grid.index(p, q)
};

inline CoherentTable coherent_grid(double spin, int n) {
  CoherentTable table;
  table.grid = PhaseGrid(n);
  table.spin = spin;
  const int dim = spin_dimension(spin);
  table.amp.resize(dim, table.grid.ncells());
#pragma omp parallel for schedule(static)
  for (int p = 0; p < n; ++p) {
    for (int q = 0; q < n; ++q) {
      const PhasePoint center{table.grid.theta_center(p),
                              table.grid.phi_center(q)};
      table.amp.col(table.grid.index(p, q)) = coherent_state(spin, center);
    }
  }
  return table;
}

}  // namespace kicktop
