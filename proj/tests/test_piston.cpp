#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qotto/piston.hpp"
#include "qotto/quadrature.hpp"

namespace {

namespace pst = qotto::piston;
using qotto::cplx;
using pst::PistonProtocol;
constexpr double pi = std::numbers::pi;

PistonProtocol expand(double tau) { return {1.0, 1.0, 2.0, tau}; }
PistonProtocol compress(double tau) { return {1.0, 2.0, 1.0, tau}; }

// <Psi_l|H|Psi_m> at t = tau by quadrature of the kinetic density, with
// fourth-order finite differences of the exact wavefunction (one-sided at the walls).
cplx energy_by_quadrature(const PistonProtocol& p, long l, long m) {
  const double h = 2e-4;
  auto psi = [&](long n, double x) { return pst::exact_wavefunction(p, n, x, p.tau); };
  auto dpsi = [&](long n, double x) {
    if (x - 2.0 * h < 0.0 || x + 2.0 * h > p.L1) {
      const double s = (x - 2.0 * h < 0.0) ? h : -h;
      return (-25.0 * psi(n, x) + 48.0 * psi(n, x + s) - 36.0 * psi(n, x + 2 * s) + 16.0 * psi(n, x + 3 * s) -
              3.0 * psi(n, x + 4 * s)) /
             (12.0 * s);
    }
    return (psi(n, x - 2 * h) - 8.0 * psi(n, x - h) + 8.0 * psi(n, x + h) - psi(n, x + 2 * h)) / (12.0 * h);
  };
  auto part = [&](bool imag) {
    return qotto::quad::integrate(
        [&](double x) {
          const cplx v = std::conj(dpsi(l, x)) * dpsi(m, x) / (2.0 * p.mass);
          return imag ? v.imag() : v.real();
        },
        0.0, p.L1, 1e-9);
  };
  return {part(false), part(true)};
}

}  // namespace

// ---- spectrum and rates ----

TEST(PistonSpectrum, StaticBoxGroundState) {
  const PistonProtocol p{1.0, 1.0, 1.0, 1.0};
  for (double s : {0.0, 0.5, 1.0}) EXPECT_NEAR(pst::instantaneous_energy(p, 1, s), pi * pi / 2.0, 1e-14);
}

TEST(PistonSpectrum, ExpandedSecondLevel) {
  EXPECT_NEAR(pst::instantaneous_energy(expand(1.0), 2, 1.0), pi * pi / 2.0, 1e-14);
  const double e3 = pst::instantaneous_energy(expand(1.0), 3, 0.4);
  EXPECT_NEAR(pst::instantaneous_energy(expand(1.0), 6, 0.4), 4.0 * e3, 1e-12);
}

TEST(PistonRates, ClosedFormEndpointValue) {
  EXPECT_NEAR(pst::transition_rate(expand(1.0), 1, 2, 1.0), 16.0 / (9.0 * pi * pi), 1e-15);
  EXPECT_EQ(pst::coupling(expand(1.0), 3, 3, 0.2), 0.0);
}

TEST(PistonRates, ClosedFormMatchesGenericRate) {
  const auto p = expand(1.0);
  const pst::PistonSystem sys(p, 9);
  for (double s : {0.0, 0.25, 1.0})
    for (long n = 1; n <= 9; ++n)
      for (long l = 1; l <= 9; ++l) {
        if (n == l) continue;
        const double closed = pst::transition_rate(p, n, l, s);
        const cplx generic = qotto::transition_rate(sys, n - 1, l - 1, s);
        EXPECT_NEAR(generic.real(), closed, 1e-14 * std::max(1.0, std::abs(closed)));
        EXPECT_EQ(pst::coupling(p, l, n, s), -pst::coupling(p, n, l, s));
      }
}

TEST(PistonRates, BulkCouplingMatchesEntries) {
  const auto p = compress(3.0);
  const pst::PistonSystem sys(p, 7);
  const Eigen::MatrixXcd g = sys.coupling_matrix(0.6);
  for (long l = 1; l <= 7; ++l)
    for (long m = 1; m <= 7; ++m) EXPECT_NEAR(g(l - 1, m - 1).real(), pst::coupling(p, l, m, 0.6), 1e-14);
  EXPECT_TRUE(sys.berry_phases(1.0).isZero());
}

// ---- thermal sums ----

TEST(PartitionFunction, DirectSummationAtHalf) {
  const double beta = 2.0 * std::log(2.0) / (pi * pi);  // q = 1/2 for L = M = 1
  double ref = 0.0;
  for (int n = 1; n < 10; ++n) ref += std::pow(0.5, n * n);
  EXPECT_NEAR(pst::partition_function(beta, 1.0, 1.0), ref, 1e-15);
  EXPECT_NEAR(pst::partition_function(beta, 1.0, 1.0), 0.564453, 2e-5);
}

TEST(PartitionFunction, GroundStateLimitAndScaleInvariance) {
  const double beta = 40.0;
  EXPECT_NEAR(pst::partition_function(beta, 1.0, 1.0) / std::exp(-beta * pi * pi / 2.0), 1.0, 1e-15);
  const double z = pst::partition_function(0.3, 1.0, 1.0);
  EXPECT_NEAR(pst::partition_function(0.3 * 4.0, 2.0, 1.0), z, 1e-14);
  EXPECT_NEAR(pst::partition_function(0.3 * 3.0, 1.0, 3.0), z, 1e-14);
}

TEST(SigmaExact, StaticWallGivesZero) {
  const PistonProtocol p{1.0, 1.5, 1.5, 2.0};
  EXPECT_EQ(pst::sigma_exact(p, pst::thermal_ensemble(p, 0.2)), 0.0);
}

TEST(SigmaExact, HighTemperatureValues) {
  EXPECT_NEAR(pst::sigma_high_temperature(expand(1.0)), 5.0 / 24.0, 1e-15);
  EXPECT_NEAR(pst::sigma_high_temperature(compress(1.0)), 5.0 / 6.0, 1e-15);
  const double s1 = pst::sigma_exact(expand(1.0), pst::thermal_ensemble(expand(1.0), 1.0));
  EXPECT_GT(s1, 0.0);
  EXPECT_LT(s1, 5.0 / 24.0);
  const double s100 = pst::sigma_exact(expand(1.0), pst::thermal_ensemble(expand(1.0), 0.01));
  EXPECT_GT(s100, s1);
  EXPECT_LT(s100, 5.0 / 24.0);
}

// The continuum estimate replaces the n = 1 term 1/n^2 by its integral over
// [1/2, 3/2], so it overshoots the direct sum by a factor tending to 12/pi^2.
TEST(SigmaExact, ErfcEstimateOfThermalSum) {
  auto direct = [](double beta) { return pst::thermal_sum(pst::thermal_ensemble(expand(1.0), beta)); };
  EXPECT_NEAR(pst::thermal_sum_erfc_estimate(0.01, 1.0, 1.0) / direct(0.01), 1.2775, 1e-3);
  const double beta = 1e-6;
  EXPECT_NEAR(pst::thermal_sum_leading(beta, 1.0, 1.0) / direct(beta), 12.0 / (pi * pi), 1e-2);
  EXPECT_NEAR(pst::thermal_sum_erfc_estimate(beta, 1.0, 1.0) / pst::thermal_sum_leading(beta, 1.0, 1.0), 1.0,
              1e-3);
}

// ---- exact propagation ----

TEST(ExactOverlaps, StaticWallIsIdentity) {
  const PistonProtocol p{1.0, 1.0, 1.0, 3.0};
  const auto prop = pst::exact_overlaps(p, 12, 6);
  EXPECT_LT((prop.overlap - Eigen::MatrixXcd::Identity(12, 6)).cwiseAbs().maxCoeff(), 1e-13);
  for (long l = 1; l <= 12; ++l)
    EXPECT_NEAR(prop.final_energy[l - 1], pst::instantaneous_energy(p, l, 0.0), 1e-11 * l * l);
  EXPECT_NEAR(pst::exact_extra_work(p, pst::thermal_ensemble(p, 0.5, 6), prop).extra_work, 0.0, 1e-12);
}

TEST(ExactOverlaps, AdiabaticLimitApproachesIdentity) {
  auto offset = [](double tau) {
    const auto prop = pst::exact_overlaps(expand(tau), 40, 4);
    double worst = 0.0;
    for (Eigen::Index n = 0; n < 4; ++n)
      worst = std::max(worst, std::abs(std::abs(prop.overlap(n, n)) - 1.0) +
                                  prop.overlap.col(n).cwiseAbs2().sum() - std::norm(prop.overlap(n, n)));
    return worst;
  };
  const double a = offset(1e3), b = offset(1e4);
  EXPECT_LT(b, 1e-3);
  EXPECT_LT(b, a / 5.0);
}

TEST(ExactOverlaps, CompletenessAtTauTen) {
  const auto p = expand(10.0);
  const auto ens = pst::thermal_ensemble(p, 1.0);
  const auto prop = pst::exact_overlaps(p, pst::default_exact_level_count(ens.size()), ens.size());
  EXPECT_LT(prop.completeness_defect(), 1e-8);
  EXPECT_GT(prop.final_energy.minCoeff(), 0.0);
}

TEST(ExactOverlaps, QuadratureRefinementIsStable) {
  for (const auto& p : {expand(2.0), compress(5.0), expand(40.0)}) {
    const auto coarse = pst::exact_overlaps(p, 60, 20, {64});
    const auto fine = pst::exact_overlaps(p, 60, 20, {128});
    EXPECT_LT((coarse.overlap - fine.overlap).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(ExactOverlaps, MatchesAdaptiveQuadratureOracle) {
  const auto p = expand(0.7);
  const double alpha = p.mass * (p.L1 - p.L0) / (2.0 * p.L0 * p.tau);
  const auto prop = pst::exact_overlaps(p, 120, 10);
  for (auto [l, n] : {std::pair{1L, 1L}, {3L, 1L}, {2L, 5L}, {17L, 9L}}) {
    auto part = [&](bool imag) {
      return qotto::quad::integrate(
          [&](double x) {
            const cplx v = std::polar(2.0 / p.L0, -alpha * x * x) * std::sin(l * pi * x / p.L0) *
                           std::sin(n * pi * x / p.L0);
            return imag ? v.imag() : v.real();
          },
          0.0, p.L0, 1e-11);
    };
    const cplx ref(part(false), part(true));
    EXPECT_NEAR(std::abs(prop.overlap(l - 1, n - 1) - ref), 0.0, 1e-10) << l << "," << n;
  }
}

TEST(ExactOverlaps, SmallBasisFailsCompleteness) {
  EXPECT_THROW(pst::exact_overlaps(expand(0.05), 4, 2), qotto::convergence_error);
  EXPECT_THROW(pst::exact_overlaps(expand(1.0), 2, 3), std::invalid_argument);
}

TEST(ExactWavefunction, NormalizedOnMovingBox) {
  const auto p = expand(0.8);
  for (double t : {0.0, 0.3, 0.8}) {
    const double len = p.L0 + (p.L1 - p.L0) * t / p.tau;
    const double norm = qotto::quad::integrate(
        [&](double x) { return std::norm(pst::exact_wavefunction(p, 3, x, t)); }, 0.0, len, 1e-12);
    EXPECT_NEAR(norm, 1.0, 1e-10);
  }
}

TEST(ExactEnergies, ClosedFormMatchesKineticQuadrature) {
  for (const auto& p : {expand(0.9), compress(2.5)}) {
    const auto prop = pst::exact_overlaps(p, 30, 4);
    for (auto [l, m] : {std::pair{1L, 1L}, {4L, 4L}, {1L, 2L}, {2L, 5L}, {6L, 3L}}) {
      const cplx ref = energy_by_quadrature(p, l, m);
      const cplx got = prop.energy_matrix(l - 1, m - 1);
      EXPECT_NEAR(std::abs(got - ref), 0.0, 1e-6 * std::max(1.0, std::abs(ref))) << l << "," << m;
    }
  }
}

TEST(ExactWork, StaticWallIsZeroAndExpansionPositive) {
  const auto p = expand(20.0);
  const auto w = pst::exact_extra_work(p, 1.0);
  EXPECT_GT(w.extra_work, 0.0);
  EXPECT_NEAR(w.work, w.adiabatic_work + w.extra_work, 1e-12);
  EXPECT_LT(w.adiabatic_work, 0.0);
}

TEST(ExactWork, EnsembleMismatchIsAnError) {
  const auto p = expand(10.0);
  const auto prop = pst::exact_overlaps(p, 90, 8);
  EXPECT_THROW(pst::exact_extra_work(p, pst::thermal_ensemble(p, 1.0, 9), prop), qotto::dimension_error);
}

TEST(ExactWork, CompressionScaledMeanNearHighTemperatureValue) {
  // tau^2 W_ex hovers about Sigma with a thermal correction of a few percent.
  const auto p = compress(30.0);
  const double beta = 0.01;
  const double sigma = pst::sigma_exact(p, pst::thermal_ensemble(p, beta));
  const double scaled = 30.0 * 30.0 * pst::exact_extra_work(p, beta).extra_work;
  EXPECT_GT(scaled, 0.0);
  EXPECT_NEAR(scaled / sigma, 1.0, 0.35);
  EXPECT_NEAR(sigma / (5.0 / 6.0), 1.0, 0.05);
}

TEST(ExactWork, OscillationWeakensWithTemperature) {
  auto spread = [](double beta) {
    const auto ens = pst::thermal_ensemble(expand(1.0), beta);
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i <= 60; ++i) {
      const double tau = 20.0 + 10.0 * i / 60.0;
      const auto p = expand(tau);
      const auto prop = pst::exact_overlaps(p, pst::default_exact_level_count(ens.size()), ens.size());
      const double v = tau * tau * pst::exact_extra_work(p, ens, prop).extra_work;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return hi - lo;
  };
  EXPECT_LT(spread(0.01), spread(1.0));
}

TEST(ExactWork, RawTruncationErrorFallsAsInverseCube) {
  const auto p = expand(12.0);
  const auto ens = pst::thermal_ensemble(p, 0.1);
  auto w = [&](std::size_t n) { return pst::exact_extra_work(p, ens, pst::exact_overlaps(p, n, ens.size())).extra_work; };
  const double a = w(200), b = w(400), c = w(800);
  EXPECT_NEAR((b - a) / (c - b), 8.0, 1.0);
}

TEST(ExactWork, TruncationStability) {
  const auto p = expand(12.0);
  const auto ens = pst::thermal_ensemble(p, 0.1);
  const auto base = pst::exact_extra_work_extrapolated(p, ens);
  pst::ExactOptions wide;
  wide.min_levels = base.levels;
  const auto doubled = pst::exact_extra_work_extrapolated(p, ens, wide);
  EXPECT_EQ(doubled.levels, 2 * base.levels);
  EXPECT_LT(std::abs(base.work.extra_work - doubled.work.extra_work), 1e-8 * doubled.work.extra_work);
  EXPECT_LT(base.truncation_estimate, 1e-5 * base.work.extra_work);
}
