#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kicktop/common.hpp"
#include "kicktop/spin.hpp"

namespace kicktop {

// One-period evolution operator F = exp[-i (kappa/2S) S_z^2] exp(-i alpha S_x).
// The kick factor is diagonal in the S_z basis; the precession factor is built
// from the eigendecomposition of the Hermitian S_x, so each factor is unitary
// up to roundoff.
inline MatrixXcd build_floquet(const SpinOperators& ops, double alpha,
                               double kappa) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(ops.sx);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("build_floquet: S_x eigendecomposition failed");
  VectorXcd rot_phases(ops.dim);
  for (int i = 0; i < ops.dim; ++i)
    rot_phases(i) = std::polar(1.0, -alpha * es.eigenvalues()(i));
  const MatrixXcd rotation = es.eigenvectors() *
                             rot_phases.asDiagonal() *
                             es.eigenvectors().adjoint();
  VectorXcd kick_phases(ops.dim);
  for (int i = 0; i < ops.dim; ++i) {
    const double m = ops.spin - i;
    kick_phases(i) = std::polar(1.0, -kappa / (2.0 * ops.spin) * m * m);
  }
  return kick_phases.asDiagonal() * rotation;
}

// Spectral data of the Floquet operator: quasienergies eps_k in (-pi, pi]
// sorted ascending, the unitary eigenvector matrix (column k = |eps_k> in the
// S_z basis), and the scaled observable conjugated into the eigenbasis.
struct FloquetSpectrum {
  double spin = 0.0;
  int dim = 0;
  VectorXd quasienergies;
  MatrixXcd eigenvectors;
  MatrixXcd sx_eig;  // <eps_a| S_obs |eps_b> / S for the configured observable
  std::vector<std::pair<int, int>> degenerate_pairs;  // circular gap < 1e-10

  bool has_degeneracies() const { return !degenerate_pairs.empty(); }
};

namespace detail {

// Eigendecomposition of a unitary matrix via its commuting Hermitian parts
// A = (F + F^dag)/2 and B = (F - F^dag)/(2i).  A is diagonalized first (a
// Hermitian solve returns an orthonormal basis with accurate invariant
// subspaces even for clustered eigenvalues); within each cluster of A — which
// holds the cos eps collisions, notably eps vs -eps pairs — the restriction
// of F itself is diagonalized and re-orthonormalized by QR.  This keeps the
// eigenvector matrix unitary to machine precision and the per-column residual
// ||F v - lambda v|| at the eps/gap level even near quasi-degeneracies, which
// a general non-symmetric solver does not guarantee.
inline void unitary_eigendecomposition(const MatrixXcd& f, VectorXd& eps,
                                       MatrixXcd& vectors) {
  const int dim = static_cast<int>(f.rows());
  const MatrixXcd a = 0.5 * (f + f.adjoint());
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(a);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("floquet_spectrum: Hermitian eigensolver failed");
  const VectorXd avals = es.eigenvalues();
  MatrixXcd basis = es.eigenvectors();

  std::vector<complexd> lambdas(dim);
  constexpr double cluster_tol = 1e-6;
  int start = 0;
  while (start < dim) {
    int stop = start + 1;
    while (stop < dim && avals(stop) - avals(stop - 1) < cluster_tol) ++stop;
    const int size = stop - start;
    if (size == 1) {
      const VectorXcd v = basis.col(start);
      lambdas[start] = v.dot(f * v);  // Rayleigh quotient, v.dot conjugates v
    } else {
      auto block = basis.middleCols(start, size);
      const MatrixXcd restriction = block.adjoint() * (f * block);
      Eigen::ComplexEigenSolver<MatrixXcd> ces(restriction);
      if (ces.info() != Eigen::Success)
        throw std::runtime_error("floquet_spectrum: cluster eigensolver failed");
      // order within the cluster by eigenvalue phase, then re-orthonormalize
      std::vector<int> order(size);
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](int i, int j) {
        return std::arg(ces.eigenvalues()(i)) < std::arg(ces.eigenvalues()(j));
      });
      MatrixXcd sub(size, size);
      for (int j = 0; j < size; ++j) sub.col(j) = ces.eigenvectors().col(order[j]);
      const Eigen::HouseholderQR<MatrixXcd> qr(sub);
      const MatrixXcd q = qr.householderQ() * MatrixXcd::Identity(size, size);
      const MatrixXcd rotated = block * q;
      basis.middleCols(start, size) = rotated;
      for (int j = 0; j < size; ++j) {
        const VectorXcd v = rotated.col(j);
        lambdas[start + j] = v.dot(f * v);
      }
    }
    start = stop;
  }

  // quasienergy in (-pi, pi]; atan2's -pi maps to +pi
  auto phase = [](complexd lambda) {
    double e = std::atan2(lambda.imag(), lambda.real());
    if (e <= -pi) e = pi;
    return e;
  };
  std::vector<int> order(dim);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
    return phase(lambdas[i]) < phase(lambdas[j]);
  });
  eps.resize(dim);
  vectors.resize(dim, dim);
  for (int k = 0; k < dim; ++k) {
    eps(k) = phase(lambdas[order[k]]);
    vectors.col(k) = basis.col(order[k]);
  }
}

}  // namespace detail

// (Re)attaches the scaled observable: sx_eig = V^dag (obs / S) V, symmetrized
// so downstream code can rely on exact Hermiticity.  Shared by the fresh
// decomposition and the artifact-reload path so both produce identical bits.
inline void set_observable(FloquetSpectrum& spec, const MatrixXcd& observable) {
  const MatrixXcd conjugated = spec.eigenvectors.adjoint() *
                               ((observable / spec.spin) * spec.eigenvectors);
  spec.sx_eig = 0.5 * (conjugated + conjugated.adjoint());
}

// Full spectral decomposition of F plus the scaled observable in the
// eigenbasis.  Quasienergy pairs closer than 1e-10 on the circle are flagged,
// not rejected; the long-time analytic average assumes a non-degenerate
// spectrum and consults these flags.
inline FloquetSpectrum floquet_spectrum(const MatrixXcd& floquet,
                                        const MatrixXcd& observable,
                                        double spin) {
  FloquetSpectrum spec;
  spec.spin = spin;
  spec.dim = static_cast<int>(floquet.rows());
  detail::unitary_eigendecomposition(floquet, spec.quasienergies,
                                     spec.eigenvectors);
  set_observable(spec, observable);

  constexpr double degeneracy_tol = 1e-10;
  for (int k = 1; k < spec.dim; ++k)
    if (spec.quasienergies(k) - spec.quasienergies(k - 1) < degeneracy_tol)
      spec.degenerate_pairs.emplace_back(k - 1, k);
  if (spec.dim > 1) {
    const double wrap_gap = spec.quasienergies(0) + 2.0 * pi -
                            spec.quasienergies(spec.dim - 1);
    if (wrap_gap < degeneracy_tol)
      spec.degenerate_pairs.emplace_back(spec.dim - 1, 0);
  }
  return spec;
}

// minimum circular gap between quasienergies (2 pi for dim = 1)
inline double min_quasienergy_gap(const FloquetSpectrum& spec) {
  if (spec.dim < 2) return 2.0 * pi;
  double gap = spec.quasienergies(0) + 2.0 * pi -
               spec.quasienergies(spec.dim - 1);
  for (int k = 1; k < spec.dim; ++k)
    gap = std::min(gap, spec.quasienergies(k) - spec.quasienergies(k - 1));
  return gap;
}

// Heisenberg evolution in the eigenbasis: (s_x(t))_{ab} =
// e^{-i (eps_a - eps_b) t} (s_x)_{ab}, an elementwise phase twist.
inline MatrixXcd heisenberg_sx(const FloquetSpectrum& spec, long t) {
  if (t < 0) throw std::invalid_argument("heisenberg_sx: t must be >= 0");
  VectorXcd u(spec.dim);
  for (int a = 0; a < spec.dim; ++a)
    u(a) = std::polar(1.0, -spec.quasienergies(a) * static_cast<double>(t));
  return (u * u.adjoint()).cwiseProduct(spec.sx_eig);
}

}  // namespace kicktop
