// otto.hpp: finite-time quantum Otto cycle built from two adiabatic strokes
// with C/tau^2 dissipation and instantaneous, fully thermalizing isochores.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "apt.hpp"
#include "parallel.hpp"
#include "piston.hpp"

namespace qotto::otto {

// Operation outside the engine regime where an engine is required.
class regime_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct OttoCycleSpec {
  double Th{0.0};
  double Tc{0.0};
  double W_T_adi{0.0};  // quasi-static net work
  double Q_h_adi{0.0};  // quasi-static heat from the hot bath
  double eta_adi{0.0};
  double Sigma1{0.0};   // stroke 1 (hot start) dissipation coefficient
  double Sigma3{0.0};   // stroke 3 (cold start)

  double eta_carnot() const { return 1.0 - Tc / Th; }
  bool is_engine() const { return W_T_adi > 0.0 && eta_adi > 0.0; }

  void validate() const {
    if (!(Sigma1 >= 0.0) || !(Sigma3 >= 0.0)) throw std::invalid_argument("OttoCycleSpec: Sigma must be >= 0");
    if (!(Q_h_adi != 0.0) || !std::isfinite(W_T_adi) || !std::isfinite(Q_h_adi)) {
      throw std::invalid_argument("OttoCycleSpec: quasi-static work and heat must be finite, heat nonzero");
    }
  }
};

// Builds a spec from the quasi-static net work, efficiency and the two coefficients.
inline OttoCycleSpec make_spec(double W_T_adi, double eta_adi, double Sigma1, double Sigma3, double Th = 0.0,
                               double Tc = 0.0) {
  OttoCycleSpec s{Th, Tc, W_T_adi, W_T_adi / eta_adi, eta_adi, Sigma1, Sigma3};
  s.validate();
  return s;
}

enum class Regime { engine, non_engine };

struct OperatingPoint {
  double tau1{0.0};
  double tau3{0.0};
  double power{0.0};
  double efficiency{0.0};
  Regime regime{Regime::engine};

  bool is_engine() const { return regime == Regime::engine; }
};

// Optional omega(tau) per stroke, added on top of Sigma for sensitivity
// studies of the neglected oscillating work.
struct OscillationModel {
  std::function<double(double)> omega1;
  std::function<double(double)> omega3;
};

inline OperatingPoint power_efficiency(const OttoCycleSpec& spec, double tau1, double tau3,
                                       const OscillationModel* osc = nullptr) {
  if (!(tau1 > 0.0) || !(tau3 > 0.0)) throw std::invalid_argument("power_efficiency: stroke times must be positive");
  double c1 = spec.Sigma1;
  double c3 = spec.Sigma3;
  if (osc) {
    if (osc->omega1) c1 += osc->omega1(tau1);
    if (osc->omega3) c3 += osc->omega3(tau3);
  }
  const double loss1 = c1 / (tau1 * tau1);
  const double loss3 = c3 / (tau3 * tau3);
  const double net = spec.W_T_adi - (loss1 + loss3);
  OperatingPoint op;
  op.tau1 = tau1;
  op.tau3 = tau3;
  op.power = net / (tau1 + tau3);
  op.efficiency = net / (spec.Q_h_adi - loss3);
  op.regime = (op.power > 0.0 && op.efficiency > 0.0) ? Regime::engine : Regime::non_engine;
  return op;
}

struct OptimalTimes {
  double tau1{0.0};
  double tau3{0.0};
  // Set when a Sigma vanishes: that stroke's optimum sits at tau -> 0.
  bool boundary{false};
};

inline void require_engine(const OttoCycleSpec& spec, const char* who) {
  if (!spec.is_engine()) throw regime_error(std::string(who) + ": quasi-static cycle is not an engine (W_T_adi <= 0)");
}

// Stationary point of P: tau_1* = [3 (S1^{2/3} S3^{1/3} + S1) / W]^{1/2}, tau_3* by symmetry.
inline OptimalTimes optimal_times(const OttoCycleSpec& spec) {
  require_engine(spec, "optimal_times");
  const double c1 = std::cbrt(spec.Sigma1);
  const double c3 = std::cbrt(spec.Sigma3);
  OptimalTimes t;
  t.tau1 = std::sqrt(3.0 * (c1 * c1 * c3 + spec.Sigma1) / spec.W_T_adi);
  t.tau3 = std::sqrt(3.0 * (c3 * c3 * c1 + spec.Sigma3) / spec.W_T_adi);
  t.boundary = spec.Sigma1 == 0.0 || spec.Sigma3 == 0.0;
  return t;
}

// P_max = 2 [W / (3 (S1^{1/3} + S3^{1/3}))]^{3/2}
inline double max_power(const OttoCycleSpec& spec) {
  require_engine(spec, "max_power");
  const double x = spec.W_T_adi / (3.0 * (std::cbrt(spec.Sigma1) + std::cbrt(spec.Sigma3)));
  return 2.0 * x * std::sqrt(x);
}

// eta_EMP = 2 eta_adi / (3 - eta_adi / (1 + (S1/S3)^{1/3}))
inline double emp_from_ratio(double eta_adi, double sigma_ratio) {
  return 2.0 * eta_adi / (3.0 - eta_adi / (1.0 + std::cbrt(sigma_ratio)));
}

inline double emp(const OttoCycleSpec& spec) {
  require_engine(spec, "emp");
  if (spec.Sigma3 == 0.0) return 2.0 * spec.eta_adi / 3.0;
  return emp_from_ratio(spec.eta_adi, spec.Sigma1 / spec.Sigma3);
}

inline double emp_upper(double eta_adi) { return 2.0 * eta_adi / (3.0 - eta_adi); }
inline double emp_lower(double eta_adi) { return 2.0 * eta_adi / 3.0; }
inline double carnot_like_upper(double eta_c) { return eta_c / (2.0 - eta_c); }
inline double carnot_like_lower(double eta_c) { return eta_c / 2.0; }
inline double surpass_threshold(double eta_c) { return 3.0 * eta_c / (4.0 - eta_c); }

struct BoundReport {
  double eta_c{0.0};
  double theta{0.0};
  double eta_adi{0.0};
  double cl_plus{0.0};
  double cl_minus{0.0};
  double emp_plus{0.0};
  double emp_minus{0.0};
  double threshold{0.0};
  bool surpass{false};  // eta_adi > 3 eta_C / (4 - eta_C)
};

// Bounds at eta_adi = theta * eta_C.
inline BoundReport bound_suite(double eta_c, double theta) {
  if (!(eta_c >= 0.0 && eta_c < 1.0)) throw std::invalid_argument("bound_suite: eta_C must lie in [0, 1)");
  if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("bound_suite: theta must lie in [0, 1]");
  BoundReport b;
  b.eta_c = eta_c;
  b.theta = theta;
  b.eta_adi = theta * eta_c;
  b.cl_plus = carnot_like_upper(eta_c);
  b.cl_minus = carnot_like_lower(eta_c);
  b.emp_plus = emp_upper(b.eta_adi);
  b.emp_minus = emp_lower(b.eta_adi);
  b.threshold = surpass_threshold(eta_c);
  b.surpass = b.eta_adi > b.threshold;
  return b;
}

// ------------------------------------------------------------------ piston

struct PistonCycleOptions {
  // Replace the high-temperature W_T_adi and Q_h_adi with thermal sums.
  bool exact_sums = false;
  // Replace the high-temperature Sigma1, Sigma3 with the thermally corrected form.
  bool thermal_sigma = false;
  double tail_tolerance = 1e-12;
};

inline piston::PistonProtocol piston_stroke(double M, double from, double to) {
  return piston::PistonProtocol{M, from, to, 1.0};
}

// Largest lambda_th / L over the two isochores; the closed forms assume << 1.
inline double piston_high_temperature_diagnostic(double Th, double Tc, double M, double L0, double L1) {
  return std::max(thermal_de_broglie_wavelength(1.0 / Th, M) / L0, thermal_de_broglie_wavelength(1.0 / Tc, M) / L1);
}

// High-temperature quasi-static net work (k_B = 1).
inline double piston_quasistatic_work(double Th, double Tc, double r) {
  return 0.5 * (Th * r * r - Tc) * (1.0 / (r * r) - 1.0);
}

// Smallest r in (0, 1) with positive quasi-static work, located by bisection
// on the sign of the work rather than taken from the closed form sqrt(Tc/Th).
inline double piston_positive_power_boundary(double tc_over_th, double tolerance = 1e-14) {
  if (!(tc_over_th > 0.0 && tc_over_th < 1.0)) throw std::invalid_argument("positive-power boundary: Tc/Th in (0, 1)");
  double lo = 1e-12, hi = 1.0 - 1e-12;
  while (hi - lo > tolerance) {
    const double mid = 0.5 * (lo + hi);
    (piston_quasistatic_work(1.0, tc_over_th, mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

inline OttoCycleSpec piston_cycle(double Th, double Tc, double M, double L0, double L1,
                                  const PistonCycleOptions& opts = {}) {
  if (!(Th > Tc) || !(Tc > 0.0)) throw std::invalid_argument("piston_cycle: need Th > Tc > 0");
  if (!(M > 0.0) || !(L0 > 0.0) || !(L1 > L0)) throw std::invalid_argument("piston_cycle: need M > 0 and 0 < L0 < L1");
  const double r = L0 / L1;
  if (!(r > std::sqrt(Tc / Th))) {
    std::ostringstream os;
    os << "piston_cycle: expansion ratio " << r << " <= sqrt(Tc/Th) = " << std::sqrt(Tc / Th)
       << "; no positive quasi-static work";
    throw regime_error(os.str());
  }
  OttoCycleSpec s;
  s.Th = Th;
  s.Tc = Tc;
  s.eta_adi = 1.0 - r * r;
  const auto expand = piston_stroke(M, L0, L1);
  const auto compress = piston_stroke(M, L1, L0);

  if (opts.exact_sums || opts.thermal_sigma) {
    const std::size_t levels = std::max(piston::thermal_level_count(expand, 1.0 / Th, opts.tail_tolerance),
                                        piston::thermal_level_count(compress, 1.0 / Tc, opts.tail_tolerance));
    const ThermalOptions topt{opts.tail_tolerance};
    const ThermalEnsemble hot = piston::thermal_ensemble(expand, 1.0 / Th, levels, topt);
    const ThermalEnsemble cold = piston::thermal_ensemble(compress, 1.0 / Tc, levels, topt);
    if (opts.exact_sums) {
      double q = 0.0, w = 0.0;
      for (std::size_t i = 0; i < levels; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        const double e0 = piston::instantaneous_energy(expand, static_cast<long>(i) + 1, 0.0);
        const double e1 = piston::instantaneous_energy(expand, static_cast<long>(i) + 1, 1.0);
        const double dp = hot.populations[k] - cold.populations[k];
        q += dp * e0;
        w += dp * (e0 - e1);
      }
      s.Q_h_adi = q;
      s.W_T_adi = w;
    }
    if (opts.thermal_sigma) {
      s.Sigma1 = piston::sigma_exact(expand, hot);
      s.Sigma3 = piston::sigma_exact(compress, cold);
    }
  }
  if (!opts.exact_sums) {
    s.W_T_adi = piston_quasistatic_work(Th, Tc, r);
    s.Q_h_adi = s.W_T_adi / s.eta_adi;
  }
  if (!opts.thermal_sigma) {
    s.Sigma1 = piston::sigma_high_temperature(expand);
    s.Sigma3 = s.Sigma1 / (r * r);
  }
  return s;
}

// EMP of the piston cycle; depends on r only since Sigma1/Sigma3 = r^2.
inline double piston_emp(double r) {
  if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("piston_emp: r must lie in (0, 1)");
  const double eta = 1.0 - r * r;
  return 2.0 * eta / (3.0 - eta / (std::cbrt(1.0 - eta) + 1.0));
}

// Closed-form piston optimum (high temperature), for cross-checking the generic formulas.
inline double piston_max_power(double Th, double Tc, double M, double L1, double r) {
  const double num = (Th * r * r - Tc) * (1.0 - r * r);
  const double den = std::cbrt(M * (1.0 - r) * (1.0 - r) * (1.0 + r * r)) * (r * r + std::pow(r, 4.0 / 3.0));
  const double x = num / den;
  return x * std::sqrt(x) / (3.0 * L1);
}

inline OptimalTimes piston_optimal_times(double Th, double Tc, double M, double L1, double r) {
  const double common = M * L1 * L1 * (1.0 - r) * (1.0 + r * r) / ((Th * r * r - Tc) * (1.0 + r));
  return {std::sqrt(common * (std::pow(r, 4.0 / 3.0) + r * r)), std::sqrt(common * (std::pow(r, 2.0 / 3.0) + 1.0)),
          false};
}

struct CrossingResult {
  double root{0.0};
  double residual{0.0};  // piston_emp(root) - eta_CL^+
  std::size_t iterations{0};
};

// Solves piston_emp(r) = eta_CL^+ by bisection on the positive-power interval
// (sqrt(Tc/Th), 1). Empty when the piston EMP never beats the Carnot-like bound.
inline std::optional<CrossingResult> piston_crossing_ratio(double tc_over_th, double tolerance = 1e-12) {
  if (!(tc_over_th > 0.0 && tc_over_th < 1.0)) throw std::invalid_argument("piston_crossing_ratio: Tc/Th in (0, 1)");
  const double target = carnot_like_upper(1.0 - tc_over_th);
  auto f = [&](double r) { return piston_emp(r) - target; };
  double lo = std::sqrt(tc_over_th);
  double hi = 1.0 - 1e-15;
  if (!(f(lo) > 0.0)) return std::nullopt;
  CrossingResult out;
  while (hi - lo > tolerance && out.iterations < 200) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
    ++out.iterations;
  }
  out.root = 0.5 * (lo + hi);
  out.residual = f(out.root);
  return out;
}

// Sensitivity model: omega(tau) of both piston strokes from the first-order engine.
inline OscillationModel piston_oscillation_model(double Th, double Tc, double M, double L0, double L1,
                                                 const AptOptions& apt = {}) {
  auto build = [&](double from, double to, double T) {
    const auto proto = piston_stroke(M, from, to);
    const std::size_t levels = piston::thermal_level_count(proto, 1.0 / T) + apt.band;
    const piston::PistonSystem sys(proto, levels);
    const ThermalEnsemble ens = thermal_populations(sys, 1.0 / T);
    return std::make_shared<const FirstOrderModel>(sys, ens, apt);
  };
  auto m1 = build(L0, L1, Th);
  auto m3 = build(L1, L0, Tc);
  return OscillationModel{[m1](double t) { return m1->omega(t); }, [m3](double t) { return m3->omega(t); }};
}

// -------------------------------------------------------------- sampling

struct CloudOptions {
  bool log_uniform = false;
  // First sample is pinned at the analytic optimum (counted in `count`).
  bool include_optimum = false;
  std::size_t threads = 1;
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}
inline double unit(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }
inline constexpr std::size_t kChunk = 4096;
}  // namespace detail

// Random (tau1, tau3) pairs mapped through power_efficiency. Each chunk of
// 4096 samples draws from its own generator seeded from (seed, chunk), so the
// output does not depend on the thread count.
inline std::vector<OperatingPoint> sample_cloud(const OttoCycleSpec& spec, std::size_t count, double tau_min,
                                                double tau_max, std::uint64_t seed, const CloudOptions& opts = {}) {
  if (count == 0) throw std::invalid_argument("sample_cloud: count must be >= 1");
  if (!(tau_min > 0.0) || !(tau_max > tau_min)) throw std::invalid_argument("sample_cloud: need 0 < tau_min < tau_max");
  std::vector<OperatingPoint> out(count);
  const std::size_t chunks = (count + detail::kChunk - 1) / detail::kChunk;
  const double lmin = std::log(tau_min), lmax = std::log(tau_max);
  parallel_for(chunks, opts.threads, [&](std::size_t c) {
    std::mt19937_64 gen(detail::splitmix64(seed ^ detail::splitmix64(c)));
    const std::size_t end = std::min(count, (c + 1) * detail::kChunk);
    for (std::size_t i = c * detail::kChunk; i < end; ++i) {
      const double u1 = detail::unit(gen), u3 = detail::unit(gen);
      double t1, t3;
      if (opts.log_uniform) {
        t1 = std::exp(lmin + (lmax - lmin) * u1);
        t3 = std::exp(lmin + (lmax - lmin) * u3);
      } else {
        t1 = tau_min + (tau_max - tau_min) * u1;
        t3 = tau_min + (tau_max - tau_min) * u3;
      }
      out[i] = power_efficiency(spec, t1, t3);
    }
  });
  if (opts.include_optimum) {
    const OptimalTimes t = optimal_times(spec);
    out[0] = power_efficiency(spec, t.tau1, t.tau3);
  }
  return out;
}

}  // namespace qotto::otto
