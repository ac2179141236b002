#pragma once

// Brute-force reference computations used as ground truth by the test
// suites.  Everything here works with dense operators in the S_z basis and
// never routes through the eigenbasis shortcuts it is checking.

#include "kicktop/common.hpp"
#include "kicktop/floquet.hpp"
#include "kicktop/spin.hpp"

namespace kicktop::oracle {

inline MatrixXcd matrix_power(const MatrixXcd& m, long t) {
  MatrixXcd out = MatrixXcd::Identity(m.rows(), m.cols());
  for (long i = 0; i < t; ++i) out = m * out;
  return out;
}

// s_x(t) = F^{dag t} (S_x / S) F^t by explicit operator products
inline MatrixXcd heisenberg_dense(const MatrixXcd& floquet,
                                  const MatrixXcd& sx, double spin, long t) {
  const MatrixXcd ft = matrix_power(floquet, t);
  return ft.adjoint() * (sx / spin) * ft;
}

// <psi_k| [s_x(t), rho]^dag [s_x(t), rho] |psi_k> with rho = |c><c|,
// everything dense in the S_z basis
inline double otoc_dense(const MatrixXcd& floquet, const MatrixXcd& sx,
                         double spin, const VectorXcd& eigenstate,
                         const VectorXcd& coherent, long t) {
  const MatrixXcd sxt = heisenberg_dense(floquet, sx, spin, t);
  const MatrixXcd rho = coherent * coherent.adjoint();
  const MatrixXcd comm = sxt * rho - rho * sxt;
  const complexd val =
      eigenstate.dot((comm.adjoint() * comm) * eigenstate);
  return val.real();
}

// W_t(c1) = <c1| O(t)^dag O(t) |c1> for O(t) = [s_x(t), |c><c|], dense
inline double coherent_otoc_dense(const MatrixXcd& floquet, const MatrixXcd& sx,
                                  double spin, const VectorXcd& probe,
                                  const VectorXcd& coherent, long t) {
  const MatrixXcd sxt = heisenberg_dense(floquet, sx, spin, t);
  const MatrixXcd rho = coherent * coherent.adjoint();
  const MatrixXcd comm = sxt * rho - rho * sxt;
  return probe.dot((comm.adjoint() * comm) * probe).real();
}

// Worst elementwise circular distance between two phase multisets, both given
// sorted ascending in (-pi, pi].  A phase sitting exactly on the +-pi wrap can
// land at either end of the sorted order, so the alignment is a cyclic shift;
// all shifts are tried.
inline double circular_multiset_mismatch(const std::vector<double>& a,
                                         const std::vector<double>& b) {
  if (a.size() != b.size()) return 2.0 * 3.14159265358979;
  const int n = static_cast<int>(a.size());
  auto circ = [](double x, double y) {
    double d = std::abs(x - y);
    return std::min(d, 2.0 * pi - d);
  };
  double best = 1e300;
  for (int shift = 0; shift < n; ++shift) {
    double worst = 0.0;
    for (int i = 0; i < n && worst < best; ++i)
      worst = std::max(worst, circ(a[i], b[(i + shift) % n]));
    best = std::min(best, worst);
  }
  return best;
}

}  // namespace kicktop::oracle
