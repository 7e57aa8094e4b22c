#include "dbsi/norm_estimator.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "dbsi/rng.hpp"

using namespace dbsi;
using Catch::Approx;

TEST_CASE("eta is constant inputs under any stochastic row", "[norm-estimator]") {
  WeightMatrix wm = best_constant_weights(build_ring(5, 1));
  std::vector<double> norms(3, 4.2);
  const auto& hood = wm.topology.neighborhood(1);
  REQUIRE(instantaneous_eta(wm.W, 1, hood, norms, EtaMode::Neighborhood) ==
          Approx(4.2).margin(1e-12));
}

TEST_CASE("eta with uniform weights is the global average", "[norm-estimator]") {
  WeightMatrix wm = best_constant_weights(build_complete(4));
  std::vector<double> norms{1.0, 2.0, 3.0, 6.0};
  REQUIRE(instantaneous_eta(wm.W, 0, wm.topology.neighborhood(0), norms, EtaMode::Neighborhood) ==
          Approx(3.0).margin(1e-12));
}

TEST_CASE("eta on the 5-cycle matches the direct dot product", "[norm-estimator]") {
  WeightMatrix wm = best_constant_weights(build_ring(5, 1));
  // Node 0's neighborhood is {0, 1, 4}; squared norms 1, 4, 25.
  std::vector<double> norms{1.0, 4.0, 25.0};
  REQUIRE(instantaneous_eta(wm.W, 0, wm.topology.neighborhood(0), norms, EtaMode::Neighborhood) ==
          Approx(0.2 * 1.0 + 0.4 * 4.0 + 0.4 * 25.0).margin(1e-12));
}

TEST_CASE("local eta mode reads the own squared norm", "[norm-estimator]") {
  WeightMatrix wm = best_constant_weights(build_ring(5, 1));
  std::vector<double> norms{1.0, 4.0, 25.0};
  REQUIRE(instantaneous_eta(wm.W, 0, wm.topology.neighborhood(0), norms, EtaMode::Local) == 1.0);
  REQUIRE(instantaneous_eta(wm.W, 1, wm.topology.neighborhood(1), norms, EtaMode::Local) == 4.0);
}

TEST_CASE("missing neighbor values are an error", "[norm-estimator]") {
  WeightMatrix wm = best_constant_weights(build_ring(5, 1));
  std::vector<double> short_list{1.0, 2.0};
  REQUIRE_THROWS_AS(
      instantaneous_eta(wm.W, 0, wm.topology.neighborhood(0), short_list, EtaMode::Neighborhood),
      std::invalid_argument);
}

TEST_CASE("adaptive gamma", "[norm-estimator]") {
  REQUIRE(adaptive_gamma(3.0, 3.0) == 0.0);
  REQUIRE(adaptive_gamma(2.0, 1.0) == 1.0);
  REQUIRE(adaptive_gamma(0.5, 1.0) == 0.5);
  REQUIRE(adaptive_gamma(10.0, 1.0) == 1.0);  // clamped at 1
  // Floored denominator keeps the value defined and clamped.
  REQUIRE(adaptive_gamma(1.0, 0.0) == 1.0);
}

TEST_CASE("initial mixing", "[norm-estimator]") {
  REQUIRE(mix_initial(5, 8.0, 4.0, 1.0, 2.0) == 4.0);   // gamma 1: instantaneous
  REQUIRE(mix_initial(5, 8.0, 4.0, 0.0, 2.0) == 8.0);   // gamma 0: recursion only
  REQUIRE(mix_initial(5, 8.0, 4.0, 0.25, 2.0) == 7.0);  // convex mix
  REQUIRE(mix_initial(0, 8.0, 4.0, 0.25, 2.0) == 2.0);  // frame 0 seeds with own norm
}

TEST_CASE("one sweep with uniform weights averages everything", "[norm-estimator]") {
  WeightMatrix wm = best_constant_weights(build_complete(4));
  MessageBus bus(wm.topology, 1);
  std::vector<double> phi{1.0, 2.0, 3.0, 6.0};
  averaging_sweep(phi, wm, 1, bus, 0);
  for (double v : phi) REQUIRE(v == Approx(3.0).margin(1e-12));
}

TEST_CASE("sweep conserves the sum and counts the exchanges", "[norm-estimator]") {
  WeightMatrix wm = best_constant_weights(build_ring(5, 1));
  MessageBus bus(wm.topology, 1);
  Rng rng(3);
  std::vector<double> phi(5);
  double total = 0.0;
  for (auto& v : phi) {
    v = std::abs(rng.normal());
    total += v;
  }
  averaging_sweep(phi, wm, 7, bus, 0);
  double after = 0.0;
  for (double v : phi) after += v;
  REQUIRE(after == Approx(total).margin(1e-12));
  // (|N_i| - 1) * K transmissions per node, all in the phi phase.
  for (int i = 0; i < 5; ++i) {
    REQUIRE(bus.report().tx(0, i, Phase::PhiIterate) == 2 * 7);
    REQUIRE(bus.report().tx(0, i, Phase::NormScalar) == 0);
  }
}

TEST_CASE("single impulse spreads one step per iteration on the 5-cycle", "[norm-estimator]") {
  WeightMatrix wm = best_constant_weights(build_ring(5, 1));
  MessageBus bus(wm.topology, 1);
  std::vector<double> phi{1.0, 0.0, 0.0, 0.0, 0.0};
  averaging_sweep(phi, wm, 1, bus, 0);
  REQUIRE(phi[0] == Approx(0.2).margin(1e-12));
  REQUIRE(phi[1] == Approx(0.4).margin(1e-12));
  REQUIRE(phi[2] == Approx(0.0).margin(1e-12));
  REQUIRE(phi[3] == Approx(0.0).margin(1e-12));
  REQUIRE(phi[4] == Approx(0.4).margin(1e-12));
}

TEST_CASE("global norm estimate scales by node count and rejects nonpositive", "[norm-estimator]") {
  REQUIRE(global_norm_sq(4, 2.5, 0, 0) == 10.0);
  REQUIRE_THROWS_AS(global_norm_sq(4, 0.0, 3, 1), divergence_error);
  REQUIRE_THROWS_AS(global_norm_sq(4, -1.0, 3, 1), divergence_error);
}

TEST_CASE("static inputs: adaptive gamma dies out and phi reaches consensus", "[norm-estimator]") {
  WeightMatrix wm = best_constant_weights(build_ring(5, 1));
  const int m = 5;
  std::vector<double> norm_sq{1.0, 2.0, 0.5, 3.0, 1.5};
  double target = 0.0;
  for (double v : norm_sq) target += v;
  target /= m;

  MessageBus bus(wm.topology, 200);
  std::vector<double> phi(m, 0.0), eta_prev(m, 1.0);
  std::vector<double> deviation_history;
  for (long n = 0; n < 200; ++n) {
    for (int i = 0; i < m; ++i) {
      std::vector<double> hood_vals;
      for (int j : wm.topology.neighborhood(i)) hood_vals.push_back(norm_sq[j]);
      const double eta =
          instantaneous_eta(wm.W, i, wm.topology.neighborhood(i), hood_vals, EtaMode::Neighborhood);
      const double gamma = adaptive_gamma(eta, eta_prev[i]);
      REQUIRE(gamma >= 0.0);
      REQUIRE(gamma <= 1.0);
      if (n >= 1) REQUIRE(gamma == 0.0);  // eta is constant from frame 0 on
      eta_prev[i] = eta;
      phi[i] = mix_initial(n, phi[i], eta, gamma, norm_sq[i]);
    }
    averaging_sweep(phi, wm, 1, bus, n);
    double dev = 0.0;
    for (int i = 0; i < m; ++i) dev += (phi[i] - target) * (phi[i] - target);
    deviation_history.push_back(std::sqrt(dev));
  }
  // Geometric contraction per iteration at the weight matrix's rate.
  for (std::size_t n = 1; n < deviation_history.size(); ++n)
    REQUIRE(deviation_history[n] <=
            wm.convergence_factor * deviation_history[n - 1] * (1.0 + 1e-9) + 1e-13);
  const double mean_phi = target;
  double lo = phi[0], hi = phi[0];
  for (double v : phi) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  REQUIRE(hi - lo < 1e-6 * mean_phi);
  for (int i = 0; i < m; ++i) REQUIRE(m * phi[i] == Approx(m * target).epsilon(1e-9));
}

TEST_CASE("fully connected single sweep gives the exact sum every frame", "[norm-estimator]") {
  WeightMatrix wm = best_constant_weights(build_complete(5));
  MessageBus bus(wm.topology, 50);
  Rng rng(17);
  std::vector<double> phi(5, 0.0), eta_prev(5, 1.0);
  for (long n = 0; n < 50; ++n) {
    std::vector<double> norm_sq(5);
    double exact = 0.0;
    for (auto& v : norm_sq) {
      v = rng.normal() * rng.normal() + 1.0;
      exact += v;
    }
    for (int i = 0; i < 5; ++i) {
      std::vector<double> hood_vals;
      for (int j : wm.topology.neighborhood(i)) hood_vals.push_back(norm_sq[j]);
      const double eta =
          instantaneous_eta(wm.W, i, wm.topology.neighborhood(i), hood_vals, EtaMode::Neighborhood);
      eta_prev[i] = eta;
      phi[i] = mix_initial(n, phi[i], eta, 1.0, norm_sq[i]);
    }
    averaging_sweep(phi, wm, 1, bus, n);
    for (int i = 0; i < 5; ++i) REQUIRE(5.0 * phi[i] == Approx(exact).epsilon(1e-12));
  }
}

TEST_CASE("single node needs no exchange and is exact", "[norm-estimator]") {
  Topology t = Topology::from_edges_unchecked(1, {});
  WeightMatrix wm = best_constant_weights(t);
  MessageBus bus(t, 1);
  std::vector<double> phi{2.25};
  averaging_sweep(phi, wm, 3, bus, 0);
  REQUIRE(phi[0] == 2.25);
  REQUIRE(bus.report().grand_total_tx() == 0);
}
