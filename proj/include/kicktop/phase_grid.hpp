#pragma once

#include <cmath>
#include <stdexcept>

#include "kicktop/common.hpp"

namespace kicktop {

// Uniform grid over the canonical phase space (phi, cos theta) in
// [-pi, pi) x [-1, 1), n x n cells of equal spherical area.  Cell (p, q)
// is centered at cos_theta = -1 + (p + 1/2) * 2/n, phi = -pi + (q + 1/2) * 2pi/n,
// with p, q = 0 .. n-1.  Flattened cell index is p * n + q.
struct PhaseGrid {
  int n = 0;

  PhaseGrid() = default;
  explicit PhaseGrid(int n_) : n(n_) {
    if (n < 2) throw std::invalid_argument("PhaseGrid: n must be >= 2");
  }

  int ncells() const { return n * n; }
  double dphi() const { return 2.0 * pi / n; }
  double dcos() const { return 2.0 / n; }

  // cell area in (phi, cos theta) measure, i.e. steradians; constant by construction
  double cell_area() const { return dphi() * dcos(); }

  double phi_center(int q) const { return -pi + (q + 0.5) * dphi(); }
  double cos_theta_center(int p) const { return -1.0 + (p + 0.5) * dcos(); }
  double theta_center(int p) const { return std::acos(cos_theta_center(p)); }

  int index(int p, int q) const { return p * n + q; }
  int p_of(int cell) const { return cell / n; }
  int q_of(int cell) const { return cell % n; }

  // cell containing (phi, cos theta); boundary values clamp into range
  int locate(double phi, double cos_theta) const {
    int q = static_cast<int>(std::floor((phi + pi) / dphi()));
    int p = static_cast<int>(std::floor((cos_theta + 1.0) / dcos()));
    if (q < 0) q = 0;
    if (q >= n) q = n - 1;
    if (p < 0) p = 0;
    if (p >= n) p = n - 1;
    return index(p, q);
  }

  bool operator==(const PhaseGrid& other) const { return n == other.n; }
};

}  // namespace kicktop
