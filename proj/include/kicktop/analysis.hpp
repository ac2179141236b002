#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kicktop/common.hpp"

namespace kicktop {

// Equal-width density histogram over [min, max] of the data, each sample
// carrying weight 1/weight_total, so integrated density equals
// n_samples / weight_total (one when every state of a 2S+1 sweep enters).
struct Histogram {
  VectorXd edges;    // bins + 1, strictly increasing
  VectorXd density;  // bins, non-negative

  double integrated() const {
    double total = 0.0;
    for (int b = 0; b < density.size(); ++b)
      total += density(b) * (edges(b + 1) - edges(b));
    return total;
  }
};

inline Histogram histogram(std::span<const double> values, int bins,
                           double weight_total) {
  if (values.empty()) throw std::invalid_argument("histogram: empty input");
  if (bins < 2) throw std::invalid_argument("histogram: bins must be >= 2");
  if (!(weight_total > 0.0))
    throw std::invalid_argument("histogram: weight_total must be positive");
  double lo = values[0], hi = values[0];
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (lo == hi) {  // degenerate support: widen around the single value
    lo -= 0.5;
    hi += 0.5;
  }
  Histogram h;
  h.edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b)
    h.edges(b) = lo + (hi - lo) * b / static_cast<double>(bins);
  h.density = VectorXd::Zero(bins);
  const double width = (hi - lo) / bins;
  for (double v : values) {
    int b = static_cast<int>((v - lo) / width);
    if (b >= bins) b = bins - 1;  // v == hi lands in the last bin
    h.density(b) += 1.0;
  }
  h.density /= weight_total * width;
  return h;
}

struct CorrelationReport {
  std::string u_name, v_name;
  double r_p = 0.0;
  std::size_t samples = 0;
};

// Pearson product-moment correlation coefficient.  Zero variance in either
// variable leaves r_p undefined and is reported as an error, never as a
// silent 0 or 1.
inline CorrelationReport pearson(std::span<const double> u,
                                 std::span<const double> v,
                                 std::string u_name = "u",
                                 std::string v_name = "v") {
  if (u.size() != v.size() || u.size() < 2)
    throw std::invalid_argument("pearson: need equal-length inputs of size >= 2");
  const double n = static_cast<double>(u.size());
  double mu = 0.0, mv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mu += u[i];
    mv += v[i];
  }
  mu /= n;
  mv /= n;
  double suv = 0.0, suu = 0.0, svv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    suv += (u[i] - mu) * (v[i] - mv);
    suu += (u[i] - mu) * (u[i] - mu);
    svv += (v[i] - mv) * (v[i] - mv);
  }
  if (suu == 0.0 || svv == 0.0)
    throw std::runtime_error("pearson: undefined correlation, " +
                             std::string(suu == 0.0 ? u_name : v_name) +
                             " has zero variance");
  return {std::move(u_name), std::move(v_name), suv / std::sqrt(suu * svv),
          u.size()};
}

// One system size's worth of per-eigenstate statistics for the sweep.
struct ProfileSet {
  double spin = 0.0;
  std::vector<double> chi, gamma, cbar;
};

struct SweepEntry {
  double spin = 0.0;
  double r_chi_gamma = 0.0;
  double r_chi_cbar = 0.0;
};

// r_p(chi, gamma) and r_p(chi, cbar) tabulated per system size
inline std::vector<SweepEntry> correlation_sweep(
    std::span<const ProfileSet> sets) {
  if (sets.size() < 2)
    throw std::invalid_argument("correlation_sweep: need >= 2 system sizes");
  std::vector<SweepEntry> out;
  out.reserve(sets.size());
  for (const auto& set : sets) {
    SweepEntry entry;
    entry.spin = set.spin;
    entry.r_chi_gamma = pearson(set.chi, set.gamma, "chi", "gamma").r_p;
    entry.r_chi_cbar = pearson(set.chi, set.cbar, "chi", "cbar").r_p;
    out.push_back(entry);
  }
  return out;
}

}  // namespace kicktop
