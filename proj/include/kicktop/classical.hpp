#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "kicktop/common.hpp"
#include "kicktop/phase_grid.hpp"
#include "kicktop/spin.hpp"

namespace kicktop {

// Unit spin vector X = <S>/S.
struct ClassicalState {
  double x = 0.0, y = 0.0, z = 1.0;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

inline ClassicalState normalized(const ClassicalState& s) {
  const double n = s.norm();
  return {s.x / n, s.y / n, s.z / n};
}

// One kick of the classical top: rotation about x by alpha followed by a
// rotation about z by psi = kappa * (y sin alpha + z cos alpha).  Composing
// the two orthogonal rotations keeps the state on the unit sphere by
// construction.  Note the published map's middle line is not orthogonal as
// printed; the composition below keeps its x and z lines verbatim and takes
// y' = x sin psi + (y cos alpha - z sin alpha) cos psi.
inline ClassicalState classical_step(const ClassicalState& s, double alpha,
                                     double kappa) {
  const double ca = std::cos(alpha), sa = std::sin(alpha);
  const double y1 = s.y * ca - s.z * sa;
  const double z1 = s.y * sa + s.z * ca;
  const double psi = kappa * z1;
  const double cp = std::cos(psi), sp = std::sin(psi);
  return {s.x * cp - y1 * sp, s.x * sp + y1 * cp, z1};
}

// Inverse kick; psi is recoverable from the post-kick state since the final
// z equals the intermediate one.
inline ClassicalState classical_step_inverse(const ClassicalState& s,
                                             double alpha, double kappa) {
  const double psi = kappa * s.z;
  const double cp = std::cos(psi), sp = std::sin(psi);
  const double x1 = s.x * cp + s.y * sp;
  const double y1 = -s.x * sp + s.y * cp;
  const double ca = std::cos(alpha), sa = std::sin(alpha);
  return {x1, y1 * ca + s.z * sa, -y1 * sa + s.z * ca};
}

// canonical coordinates (phi, cos theta); the pole x = y = 0 maps to phi = 0
inline std::array<double, 2> to_canonical(const ClassicalState& s) {
  return {std::atan2(s.y, s.x), s.z};
}

inline ClassicalState random_unit_state(SplitMix64& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(-pi, pi);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

struct PoincareSection {
  std::vector<std::array<double, 2>> points;  // (phi, cos theta)
  double alpha = 0.0, kappa = 0.0;
  int n_traj = 0;
  long n_kicks = 0;
  std::uint64_t seed = 0;
};

// n_traj random initial conditions, each iterated n_kicks times; the initial
// point and every iterate are recorded.
inline PoincareSection poincare_section(double alpha, double kappa, int n_traj,
                                        long n_kicks, std::uint64_t seed) {
  if (n_traj < 1 || n_kicks < 1)
    throw std::invalid_argument("poincare_section: n_traj, n_kicks must be >= 1");
  PoincareSection section{{}, alpha, kappa, n_traj, n_kicks, seed};
  section.points.reserve(static_cast<std::size_t>(n_traj) * (n_kicks + 1));
  SplitMix64 rng(seed);
  for (int traj = 0; traj < n_traj; ++traj) {
    ClassicalState s = random_unit_state(rng);
    section.points.push_back(to_canonical(s));
    for (long kick = 0; kick < n_kicks; ++kick) {
      s = classical_step(s, alpha, kappa);
      section.points.push_back(to_canonical(s));
    }
  }
  return section;
}

// fraction of grid cells visited by a set of canonical-coordinate points
inline double visited_cell_fraction(const std::vector<std::array<double, 2>>& points,
                                    const PhaseGrid& grid) {
  std::vector<char> hit(grid.ncells(), 0);
  for (const auto& pt : points) hit[grid.locate(pt[0], pt[1])] = 1;
  long count = 0;
  for (char h : hit) count += h;
  return static_cast<double>(count) / grid.ncells();
}

// Finite-time separation-growth exponent: the state and a 1e-8-displaced
// partner are iterated together and the exponent is log(d_end/d_0)/kicks.
// Chaotic seeds saturate the separation at O(1), giving ~log(1e8)/kicks;
// regular seeds shear linearly and land well below the 0.05/kick threshold.
inline double separation_exponent(const ClassicalState& start, double alpha,
                                  double kappa, int kicks = 200,
                                  double displacement = 1e-8) {
  // displace along the least-aligned coordinate axis, projected to the sphere
  ClassicalState a = normalized(start);
  double ax = std::abs(a.x), ay = std::abs(a.y), az = std::abs(a.z);
  ClassicalState axis = (ax <= ay && ax <= az) ? ClassicalState{1, 0, 0}
                        : (ay <= az)           ? ClassicalState{0, 1, 0}
                                               : ClassicalState{0, 0, 1};
  ClassicalState b = normalized({a.x + displacement * axis.x,
                                 a.y + displacement * axis.y,
                                 a.z + displacement * axis.z});
  auto dist = [](const ClassicalState& u, const ClassicalState& v) {
    const double dx = u.x - v.x, dy = u.y - v.y, dz = u.z - v.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
  };
  const double d0 = dist(a, b);
  for (int k = 0; k < kicks; ++k) {
    a = classical_step(a, alpha, kappa);
    b = classical_step(b, alpha, kappa);
  }
  return std::log(dist(a, b) / d0) / kicks;
}

inline constexpr double kChaosExponentThreshold = 0.05;  // per kick

// Grid labels C_pq in {+1, -1}: +1 for cells visited by one long chaotic
// orbit, -1 otherwise (tiny chaotic regions count as regular).
struct ChaoticMask {
  PhaseGrid grid;
  std::vector<int> labels;              // ncells, +1 or -1
  std::vector<std::int64_t> visit_counts;  // diagnostic
  double alpha = 0.0, kappa = 0.0;
  long n_kicks = 0;
  std::uint64_t seed = 0;
  ClassicalState seed_state;
  double seed_exponent = 0.0;
  bool no_chaotic_sea = false;

  double chaotic_fraction() const {
    long count = 0;
    for (int v : labels) count += (v > 0);
    return static_cast<double>(count) / labels.size();
  }
};

// Builds the mask by iterating a seed in the chaotic sea for n_kicks kicks.
// With no explicit seed point, 20 random trial points are scored by
// separation_exponent and the best is taken; if even the best falls below
// the chaos threshold the phase space is treated as having no chaotic sea
// and an all-regular mask is returned with the flag set.  An explicit seed
// point that fails validation is a hard error.
inline ChaoticMask chaotic_mask(double alpha, double kappa, int n, long n_kicks,
                                std::uint64_t seed,
                                std::optional<PhasePoint> seed_point = std::nullopt) {
  ChaoticMask mask;
  mask.grid = PhaseGrid(n);
  mask.alpha = alpha;
  mask.kappa = kappa;
  mask.n_kicks = n_kicks;
  mask.seed = seed;
  mask.labels.assign(mask.grid.ncells(), -1);
  mask.visit_counts.assign(mask.grid.ncells(), 0);

  if (seed_point) {
    const double st = std::sin(seed_point->theta);
    mask.seed_state = {st * std::cos(seed_point->phi),
                       st * std::sin(seed_point->phi),
                       std::cos(seed_point->theta)};
    mask.seed_exponent = separation_exponent(mask.seed_state, alpha, kappa);
    if (mask.seed_exponent < kChaosExponentThreshold)
      throw std::runtime_error(
          "chaotic_mask: supplied seed point is not in a chaotic sea "
          "(finite-time exponent " + std::to_string(mask.seed_exponent) +
          " < " + std::to_string(kChaosExponentThreshold) + " per kick)");
  } else {
    SplitMix64 rng(seed);
    double best = -1e300;
    ClassicalState best_state;
    for (int trial = 0; trial < 20; ++trial) {
      const ClassicalState candidate = random_unit_state(rng);
      const double expnt = separation_exponent(candidate, alpha, kappa);
      if (expnt > best) {
        best = expnt;
        best_state = candidate;
      }
    }
    mask.seed_state = best_state;
    mask.seed_exponent = best;
    if (best < kChaosExponentThreshold) {
      mask.no_chaotic_sea = true;
      return mask;  // all-regular mask
    }
  }

  ClassicalState s = mask.seed_state;
  auto mark = [&](const ClassicalState& state) {
    const auto [phi, cz] = to_canonical(state);
    ++mask.visit_counts[mask.grid.locate(phi, cz)];
  };
  mark(s);
  for (long kick = 1; kick <= n_kicks; ++kick) {
    s = classical_step(s, alpha, kappa);
    if (kick % 10000 == 0) s = normalized(s);  // absorb floating-point drift
    mark(s);
  }
  for (int j = 0; j < mask.grid.ncells(); ++j)
    mask.labels[j] = mask.visit_counts[j] > 0 ? 1 : -1;
  return mask;
}

}  // namespace kicktop
