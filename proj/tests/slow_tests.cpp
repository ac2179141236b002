#include <catch2/catch_amalgamated.hpp>

#include "kicktop/otoc.hpp"
#include "kicktop/pipeline.hpp"

// Heavier checks at production-scale parameters; kept out of the fast unit
// suite.  Budget is a few minutes per case on a two-core box.

using namespace kicktop;

namespace {
constexpr double kAlpha = 13.0 * pi / 19.0;
}

TEST_CASE("otoc fields: weight confinement follows the eigenstate class") {
  const double spin = 150.0;
  const int n = 120;
  const auto ops = build_spin_operators(spin);
  const auto spec = floquet_spectrum(build_floquet(ops, kAlpha, 3.0), ops.sx, spin);
  const auto mask = chaotic_mask(kAlpha, 3.0, n, 10000000, 42);
  const auto table = coherent_table_eigenbasis(spec, PhaseGrid(n));
  const VectorXd chis = chi_all(table, mask);
  int k_regular = 0, k_chaotic = 0;
  for (int k = 1; k < spec.dim; ++k) {
    if (chis(k) < chis(k_regular)) k_regular = k;
    if (chis(k) > chis(k_chaotic)) k_chaotic = k;
  }
  REQUIRE(chis(k_regular) < -0.99);
  REQUIRE(chis(k_chaotic) > 0.99);

  auto weight_in = [&](const OtocField& field, int label) {
    double inside = 0.0, total = 0.0;
    for (int j = 0; j < field.grid.ncells(); ++j) {
      total += field.values(j);
      if (mask.labels[j] == label) inside += field.values(j);
    }
    return inside / total;
  };
  const auto regular_field = otoc_field(spec, table, k_regular, 20);
  const auto chaotic_field = otoc_field(spec, table, k_chaotic, 20);
  CHECK(weight_in(regular_field, -1) >= 0.90);
  CHECK(weight_in(chaotic_field, +1) >= 0.90);
}

TEST_CASE("chi distribution: double peak at S = 250") {
  const double spin = 250.0;
  const auto ops = build_spin_operators(spin);
  const auto spec = floquet_spectrum(build_floquet(ops, kAlpha, 3.0), ops.sx, spin);
  const auto mask = chaotic_mask(kAlpha, 3.0, 300, 10000000, 42);
  const auto table = coherent_table_eigenbasis(spec, PhaseGrid(300));
  const VectorXd chis = chi_all(table, mask);
  // outer quintiles of [-1, 1] jointly outweigh the middle three
  int outer = 0, middle = 0;
  for (int k = 0; k < spec.dim; ++k)
    (std::abs(chis(k)) >= 0.6 ? outer : middle) += 1;
  INFO("outer = " << outer << " middle = " << middle);
  CHECK(outer > middle);

  // and the histogram's top bins sit in the outer quintiles
  std::vector<double> values(chis.data(), chis.data() + chis.size());
  const Histogram h = histogram(values, 40, 2.0 * spin + 1.0);
  int top = 0;
  for (int b = 1; b < h.density.size(); ++b)
    if (h.density(b) > h.density(top)) top = b;
  const double top_center = 0.5 * (h.edges(top) + h.edges(top + 1));
  CHECK(std::abs(top_center) > 0.6);
}

TEST_CASE("longtime numeric: doubling T is a sub-2% perturbation at S = 50") {
  const double spin = 50.0;
  const auto ops = build_spin_operators(spin);
  const auto spec = floquet_spectrum(build_floquet(ops, kAlpha, 3.0), ops.sx, spin);
  const auto table = coherent_table_eigenbasis(spec, PhaseGrid(150));
  std::vector<long> times(1000);
  for (long i = 0; i < 1000; ++i) times[i] = 100 + i;
  const MatrixXd series = otoc_avg_series_all(spec, table, times);
  for (int k = 0; k < spec.dim; ++k) {
    const double base = series.row(k).head(500).mean();
    const double doubled = series.row(k).mean();
    INFO("k = " << k);
    REQUIRE(std::abs(doubled - base) < 0.02 * base);
  }
}
