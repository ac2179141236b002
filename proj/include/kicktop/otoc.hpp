#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "kicktop/common.hpp"
#include "kicktop/floquet.hpp"
#include "kicktop/husimi.hpp"

namespace kicktop {

// Microcanonical OTOC of eigenstate k against rho_c = |c><c|:
//   c_k(t) = <eps_k| [s_x(t), rho_c]^dag [s_x(t), rho_c] |eps_k> = c_k1 - c_k2.
// The rank-1 structure of rho_c reduces everything to one matrix-vector
// product in the eigenbasis, where s_x(t) is an elementwise phase twist:
// with a = <c|eps_k>, w = s_x(t)|c>, v = <c|s_x(t)|eps_k>,
//   c_k1 = |a|^2 <c|s_x(t)^2|c> + |v|^2,   c_k2 = 2 Re[a* <c|s_x(t)|c> v].

namespace detail {

// all-k OTOC values at one grid cell, given the cell's eigenbasis coherent
// amplitudes ct and w = s_x(t) ct; writes into out
template <typename VecA, typename VecB, typename Out>
inline void otoc_cell_all_k(const VecA& ct, const VecB& w, Out&& out) {
  const double s2 = w.squaredNorm();          // <c|s_x(t)^2|c>
  const complexd h = ct.dot(w);               // <c|s_x(t)|c>
  out = ct.cwiseAbs2() * s2 + w.cwiseAbs2() -
        2.0 * (ct.cwiseProduct(w.conjugate()) * h).real();
}

}  // namespace detail

// single (eigenstate, cell, time) evaluation; c is given in the S_z basis
inline double otoc_point(const FloquetSpectrum& spec, int k,
                         const VectorXcd& c, long t) {
  if (k < 0 || k >= spec.dim) throw std::invalid_argument("otoc_point: bad k");
  const VectorXcd ct = spec.eigenvectors.adjoint() * c;
  const VectorXcd w = heisenberg_sx(spec, t) * ct;
  const complexd a = std::conj(ct(k));        // <c|eps_k>
  const complexd v = std::conj(w(k));         // <c|s_x(t)|eps_k>
  const complexd h = ct.dot(w);               // <c|s_x(t)|c>
  const double c1 = std::norm(a) * w.squaredNorm() + std::norm(v);
  const double c2 = 2.0 * (std::conj(a) * h * v).real();
  return c1 - c2;
}

// OTOC of one eigenstate over every grid cell at time t
struct OtocField {
  int k = -1;
  long t = 0;
  double spin = 0.0;
  PhaseGrid grid;
  VectorXd values;  // ncells
};

inline OtocField otoc_field(const FloquetSpectrum& spec,
                            const EigenCoherentTable& table, int k, long t) {
  if (k < 0 || k >= spec.dim) throw std::invalid_argument("otoc_field: bad k");
  OtocField field;
  field.k = k;
  field.t = t;
  field.spin = spec.spin;
  field.grid = table.grid;
  const int ncells = table.grid.ncells();
  field.values.resize(ncells);
  const MatrixXcd m = heisenberg_sx(spec, t);
  const int nchunks = (ncells + kCellChunk - 1) / kCellChunk;
#pragma omp parallel
  {
    MatrixXcd w(spec.dim, kCellChunk);
    VectorXd cell_values(spec.dim);
#pragma omp for schedule(dynamic)
    for (int chunk = 0; chunk < nchunks; ++chunk) {
      const int begin = chunk * kCellChunk;
      const int width = std::min(kCellChunk, ncells - begin);
      const auto amp = table.amp.middleCols(begin, width);
      w.leftCols(width).noalias() = m * amp;
      for (int j = 0; j < width; ++j) {
        detail::otoc_cell_all_k(amp.col(j), w.col(j), cell_values);
        field.values(begin + j) = cell_values(k);
      }
    }
  }
  return field;
}

// phase-space average C_k(t) = (2S+1)/(4pi) sum c_k(t) dA
inline double phase_average(const OtocField& field) {
  return (2.0 * field.spin + 1.0) / (4.0 * pi) * field.values.sum() *
         field.grid.cell_area();
}

// C_k(t) for every eigenstate k over a set of times: one pass per time, one
// GEMM per cell chunk, everything else vectorized per cell.  Chunk partial
// sums are reduced in fixed chunk order so results are bit-identical for any
// thread count.  Cost per time is O(dim^2 ncells).
inline MatrixXd otoc_avg_series_all(
    const FloquetSpectrum& spec, const EigenCoherentTable& table,
    const std::vector<long>& times,
    const std::function<void(int, int)>& progress = {}) {
  const int dim = spec.dim;
  const int ncells = table.grid.ncells();
  const int ntimes = static_cast<int>(times.size());
  const int nchunks = (ncells + kCellChunk - 1) / kCellChunk;
  const double scale =
      (2.0 * spec.spin + 1.0) / (4.0 * pi) * table.grid.cell_area();
  MatrixXd out(dim, ntimes);
  std::vector<VectorXd> partial(nchunks);
  for (int it = 0; it < ntimes; ++it) {
    const MatrixXcd m = heisenberg_sx(spec, times[it]);
#pragma omp parallel
    {
      MatrixXcd w(dim, kCellChunk);
      MatrixXcd g(dim, kCellChunk);
      MatrixXd q(dim, kCellChunk);
#pragma omp for schedule(dynamic)
      for (int chunk = 0; chunk < nchunks; ++chunk) {
        const int begin = chunk * kCellChunk;
        const int width = std::min(kCellChunk, ncells - begin);
        const auto amp = table.amp.middleCols(begin, width);
        auto wv = w.leftCols(width);
        wv.noalias() = m * amp;
        // s2_j = <c|s_x(t)^2|c>, h_j = <c|s_x(t)|c> per cell
        const VectorXd s2 = wv.colwise().squaredNorm().transpose();
        const VectorXcd h =
            amp.conjugate().cwiseProduct(wv).colwise().sum().transpose();
        q.leftCols(width) = amp.cwiseAbs2();
        g.leftCols(width) = amp.cwiseProduct(wv.conjugate());
        VectorXd acc = q.leftCols(width) * s2;               // |a|^2 s2 summed
        acc += wv.cwiseAbs2().rowwise().sum();               // |v|^2 summed
        acc -= 2.0 * (g.leftCols(width) * h).real();         // cross terms
        partial[chunk] = acc;
      }
    }
    VectorXd column = VectorXd::Zero(dim);
    for (int chunk = 0; chunk < nchunks; ++chunk) column += partial[chunk];
    out.col(it) = scale * column;
    if (progress) progress(it + 1, ntimes);
  }
  return out;
}

struct OtocSeries {
  int k = -1;
  std::vector<long> times;
  std::vector<double> avg;  // C_k(t) per time
};

inline OtocSeries otoc_series(const FloquetSpectrum& spec,
                              const EigenCoherentTable& table, int k,
                              const std::vector<long>& times) {
  const MatrixXd all = otoc_avg_series_all(spec, table, times);
  OtocSeries series{k, times, {}};
  series.avg.resize(times.size());
  for (std::size_t i = 0; i < times.size(); ++i)
    series.avg[i] = all(k, static_cast<int>(i));
  return series;
}

inline double series_value_at(const OtocSeries& series, long t) {
  for (std::size_t i = 0; i < series.times.size(); ++i)
    if (series.times[i] == t) return series.avg[i];
  throw std::invalid_argument("OTOC series does not contain t = " +
                              std::to_string(t));
}

// growth window tau = nint(ln(2S+1)), the Ehrenfest-time scale for
// order-one classical Lyapunov exponents
inline long growth_window(double spin,
                          std::optional<long> tau_override = std::nullopt) {
  return tau_override ? *tau_override : nint(std::log(2.0 * spin + 1.0));
}

// gamma_k = (C_k(tau) - C_k(0)) / tau; requires both endpoints in the series
inline double growth_rate(const OtocSeries& series, double spin,
                          std::optional<long> tau_override = std::nullopt) {
  const long tau = growth_window(spin, tau_override);
  const double c0 = series_value_at(series, 0);
  const double ctau = series_value_at(series, tau);
  return (ctau - c0) / static_cast<double>(tau);
}

// arithmetic mean of C_k(t) over integer kicks t in [t0, t0 + T)
inline double window_mean(const OtocSeries& series, long t0, long window) {
  if (t0 < 1 || window < 1)
    throw std::invalid_argument("window_mean: t0 and T must be >= 1");
  double total = 0.0;
  for (long t = t0; t < t0 + window; ++t) total += series_value_at(series, t);
  return total / static_cast<double>(window);
}

inline double longtime_avg_numeric(const FloquetSpectrum& spec,
                                   const EigenCoherentTable& table, int k,
                                   long t0 = 100, long window = 500) {
  if (t0 < 1 || window < 1)
    throw std::invalid_argument("longtime_avg_numeric: t0 and T must be >= 1");
  std::vector<long> times(window);
  for (long i = 0; i < window; ++i) times[i] = t0 + i;
  const OtocSeries series = otoc_series(spec, table, k, times);
  double total = 0.0;
  for (double v : series.avg) total += v;
  return total / static_cast<double>(window);
}

// Infinite-time average of C_k(t) evaluated directly from the spectrum,
// assuming no quasienergy degeneracies or resonant gap coincidences: per
// cell, with Q_j the Husimi values and (s_x)_{ab} the eigenbasis matrix,
//   C_k1 = Q_k sum_p Q_p (s_x^2)_pp + sum_p Q_p (s_x)_kp (s_x)_pk
//          - 2 (s_x)_kk^2 Q_k^n
//   C_k2 = Q_k sum_{p != k} [Q_p (s_x)_pp (s_x)_kk + Q_p (s_x)_kp (s_x)_pk]
// and cbar_k = C_k1 - 2 C_k2 is then averaged over the sphere.  The exponent
// n in C_k1 defaults to 2, which is what the time average of the rank-1
// expansion produces and what the long-horizon numeric average confirms to
// sub-percent accuracy; q4_as_printed = true substitutes the exponent 4 that
// appears in the published form of the formula, kept available because the
// two variants bracket the published-formula audit the test suite reports.
// Results carry meaning only when the spectrum has no flagged degeneracies;
// callers should check spec.has_degeneracies().
inline VectorXd longtime_avg_analytic_all(const FloquetSpectrum& spec,
                                          const EigenCoherentTable& table,
                                          bool q4_as_printed = false) {
  const int dim = spec.dim;
  const int ncells = table.grid.ncells();
  const VectorXd d = spec.sx_eig.diagonal().real();
  const VectorXd dsq = d.cwiseProduct(d);
  const VectorXd d2 = spec.sx_eig.cwiseAbs2().rowwise().sum();  // (s_x^2)_pp
  const MatrixXd r = spec.sx_eig.cwiseAbs2();  // r(k,p) = (s_x)_kp (s_x)_pk
  const int nchunks = (ncells + kCellChunk - 1) / kCellChunk;
  std::vector<VectorXd> partial(nchunks);
#pragma omp parallel
  {
    MatrixXd q(dim, kCellChunk);
    MatrixXd rq(dim, kCellChunk);
#pragma omp for schedule(dynamic)
    for (int chunk = 0; chunk < nchunks; ++chunk) {
      const int begin = chunk * kCellChunk;
      const int width = std::min(kCellChunk, ncells - begin);
      const auto amp = table.amp.middleCols(begin, width);
      q.leftCols(width) = amp.cwiseAbs2();
      rq.leftCols(width).noalias() = r * q.leftCols(width);
      VectorXd acc = VectorXd::Zero(dim);
      for (int j = 0; j < width; ++j) {
        const auto qj = q.col(j);
        const auto rqj = rq.col(j);
        const double qd2 = d2.dot(qj);  // sum_p Q_p (s_x^2)_pp
        const double qd = d.dot(qj);    // sum_p Q_p (s_x)_pp
        const VectorXd qpow = q4_as_printed
                                  ? qj.array().pow(4).matrix().eval()
                                  : qj.cwiseProduct(qj).eval();
        // C_k1 - 2 C_k2, with the p = k exclusions folded in
        acc += qj * qd2 + rqj - 2.0 * dsq.cwiseProduct(qpow) -
               2.0 * qj.cwiseProduct(d * qd + rqj -
                                     2.0 * dsq.cwiseProduct(qj));
      }
      partial[chunk] = acc;
    }
  }
  VectorXd total = VectorXd::Zero(dim);
  for (int chunk = 0; chunk < nchunks; ++chunk) total += partial[chunk];
  return total * (2.0 * spec.spin + 1.0) / (4.0 * pi) * table.grid.cell_area();
}

inline double longtime_avg_analytic(const FloquetSpectrum& spec,
                                    const EigenCoherentTable& table, int k,
                                    bool q4_as_printed = false) {
  return longtime_avg_analytic_all(spec, table, q4_as_printed)(k);
}

// Cauchy-Schwarz upper bound on c_k(t) for the reference cell's rho_c:
//   (2S+1)^2/(4pi) sum dA Q_k(c1) W_t(c1),
// with W_t(c1) = <c1| O(t)^dag O(t) |c1> the OTOC of the coherent state at
// cell c1 against the same commutator O(t) = [s_x(t), rho_c].  W_t needs only
// two inner products per cell once w = s_x(t)|c_ref> is known.
inline double otoc_upper_bound(const FloquetSpectrum& spec,
                               const EigenCoherentTable& table, int k, long t,
                               int ref_cell) {
  const int ncells = table.grid.ncells();
  if (ref_cell < 0 || ref_cell >= ncells)
    throw std::invalid_argument("otoc_upper_bound: bad reference cell");
  const VectorXcd cref = table.amp.col(ref_cell);
  const VectorXcd w = heisenberg_sx(spec, t) * cref;
  const double s2 = w.squaredNorm();
  const complexd h_conj = std::conj(cref.dot(w));
  const Eigen::RowVectorXcd a = cref.adjoint() * table.amp;  // <c_ref|c_j>
  const Eigen::RowVectorXcd b = w.adjoint() * table.amp;     // <c_ref|s_x(t)|c_j>
  double acc = 0.0;
  for (int j = 0; j < ncells; ++j) {
    const double wt = std::norm(a(j)) * s2 + std::norm(b(j)) -
                      2.0 * (std::conj(a(j)) * b(j) * h_conj).real();
    acc += std::norm(table.amp(k, j)) * wt;
  }
  const double dim_fac = 2.0 * spec.spin + 1.0;
  return dim_fac * dim_fac / (4.0 * pi) * acc * table.grid.cell_area();
}

// Per-eigenstate summary record assembled by the pipeline.
struct EigenstateProfile {
  int k = -1;
  double quasienergy = 0.0;
  double chi = 0.0;
  double gamma = 0.0;
  double cbar_numeric = 0.0;
  double cbar_analytic = 0.0;
  StateClass label = StateClass::Mixed;
  bool degenerate_flag = false;
};

}  // namespace kicktop
