// piston.hpp: particle in a 1D box with a linearly moving wall.
//
// Quantum numbers n, l are 1-based in the closed-form functions below;
// PistonSystem maps DrivenSystem level index i to quantum number i + 1.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "apt.hpp"
#include "driven_system.hpp"
#include "errors.hpp"
#include "quadrature.hpp"

namespace qotto::piston {

inline constexpr double pi = std::numbers::pi;

struct PistonProtocol {
  double mass{1.0};
  double L0{1.0};
  double L1{2.0};
  double tau{1.0};

  double expansion_ratio() const { return L0 / L1; }
  bool is_expansion() const { return L0 < L1; }
  double length(double s) const { return L0 + (L1 - L0) * s; }

  void validate() const {
    if (!(mass > 0.0) || !(L0 > 0.0) || !(L1 > 0.0) || !(tau > 0.0) || !std::isfinite(mass) ||
        !std::isfinite(L0) || !std::isfinite(L1) || !std::isfinite(tau)) {
      throw std::invalid_argument("PistonProtocol: mass, L0, L1 and tau must be positive and finite");
    }
  }
};

inline double sign_of_sum(long a, long b) { return ((a + b) % 2 == 0) ? 1.0 : -1.0; }

// E_n(s) = pi^2 n^2 / (2 M L(s)^2)
inline double instantaneous_energy(const PistonProtocol& p, long n, double s) {
  const double len = p.length(s);
  return pi * pi * static_cast<double>(n * n) / (2.0 * p.mass * len * len);
}

// Gamma_ln(s) = <l|d/ds|n> = 2 n l (-1)^{l+n} (L1 - L0) / ((l^2 - n^2) L(s)); zero on the diagonal.
inline double coupling(const PistonProtocol& p, long l, long n, double s) {
  if (l == n) return 0.0;
  const double nl = static_cast<double>(n * l);
  return 2.0 * nl * sign_of_sum(l, n) * (p.L1 - p.L0) / (static_cast<double>(l * l - n * n) * p.length(s));
}

// T_nl(s) = -4 M n l (-1)^{l+n} (L1 - L0) L(s) / (pi^2 (n^2 - l^2)^2)
inline double transition_rate(const PistonProtocol& p, long n, long l, double s) {
  if (n == l) throw std::invalid_argument("piston::transition_rate: n == l");
  const double d = static_cast<double>(n * n - l * l);
  return -4.0 * p.mass * static_cast<double>(n * l) * sign_of_sum(l, n) * (p.L1 - p.L0) * p.length(s) /
         (pi * pi * d * d);
}

// phi_n(s) = ∫_0^s E_n ds' = pi^2 n^2 s / (2 M L0 L(s))
inline double dynamical_phase(const PistonProtocol& p, long n, double s) {
  return pi * pi * static_cast<double>(n * n) * s / (2.0 * p.mass * p.L0 * p.length(s));
}

// Z = theta_3(0, q)/2 - 1/2 = sum_{n>=1} q^{n^2}, q = exp(-beta pi^2 / (2 L^2 M)).
inline double partition_function(double beta, double L, double M) {
  if (!(beta > 0.0)) throw std::invalid_argument("partition_function: beta must be positive");
  const double x = beta * pi * pi / (2.0 * L * L * M);
  double z = 0.0;
  for (long n = 1;; ++n) {
    const double term = std::exp(-x * static_cast<double>(n * n));
    if (term < 1e-16 * std::max(z, 1e-300) || term == 0.0) break;
    z += term;
  }
  return z;
}

// Smallest level count with exp(-beta (E_N - E_1)) below the tail tolerance at L0.
inline std::size_t thermal_level_count(const PistonProtocol& p, double beta, double tail_tolerance = 1e-12) {
  if (!(beta > 0.0)) throw std::invalid_argument("thermal_level_count: beta must be positive");
  const double e1 = instantaneous_energy(p, 1, 0.0);
  const double target = -std::log(tail_tolerance);
  // beta (E_N - E_1) > target  <=>  N^2 > 1 + target / (beta E_1)
  const double n = std::sqrt(1.0 + target / (beta * e1));
  return static_cast<std::size_t>(std::floor(n)) + 1;
}

// ------------------------------------------------------------ DrivenSystem

class PistonSystem final : public DrivenSystem {
 public:
  PistonSystem(const PistonProtocol& protocol, std::size_t levels) : p_(protocol), levels_(levels) {
    p_.validate();
    if (levels_ == 0) throw std::invalid_argument("PistonSystem: level count must be positive");
    const auto n = static_cast<Eigen::Index>(levels_);
    shape_ = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) {
          const long l = i + 1, m = j + 1;
          shape_(i, j) = 2.0 * static_cast<double>(l * m) * sign_of_sum(l, m) / static_cast<double>(l * l - m * m);
        }
  }

  const PistonProtocol& protocol() const { return p_; }
  std::size_t level_count() const override { return levels_; }

  double energy(std::size_t n, double s) const override {
    return instantaneous_energy(p_, static_cast<long>(n) + 1, s);
  }
  cplx coupling(std::size_t l, std::size_t m, double s) const override {
    return piston::coupling(p_, static_cast<long>(l) + 1, static_cast<long>(m) + 1, s);
  }
  Eigen::VectorXd energies(double s) const override {
    const auto n = static_cast<Eigen::Index>(levels_);
    const Eigen::ArrayXd q = Eigen::ArrayXd::LinSpaced(n, 1.0, static_cast<double>(n));
    const double len = p_.length(s);
    return (pi * pi * q.square() / (2.0 * p_.mass * len * len)).matrix();
  }
  Eigen::MatrixXcd coupling_matrix(double s) const override {
    return (coupling_scale(s) * shape_).cast<cplx>();
  }
  const Eigen::MatrixXd* coupling_shape() const override { return &shape_; }
  double coupling_scale(double s) const override { return (p_.L1 - p_.L0) / p_.length(s); }
  double dynamical_phase(std::size_t l, double s) const override {
    return piston::dynamical_phase(p_, static_cast<long>(l) + 1, s);
  }
  double berry_phase(std::size_t, double) const override { return 0.0; }
  Eigen::VectorXd dynamical_phases(double s) const override {
    const auto n = static_cast<Eigen::Index>(levels_);
    const Eigen::ArrayXd q = Eigen::ArrayXd::LinSpaced(n, 1.0, static_cast<double>(n));
    return (pi * pi * q.square() * s / (2.0 * p_.mass * p_.L0 * p_.length(s))).matrix();
  }
  Eigen::VectorXd berry_phases(double) const override {
    return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(levels_));
  }

 private:
  PistonProtocol p_;
  std::size_t levels_;
  Eigen::MatrixXd shape_;  // Gamma(s) = (L1 - L0) / L(s) * shape_
};

// Thermal state at the initial wall position. levels == 0 picks the thermal cutoff.
inline ThermalEnsemble thermal_ensemble(const PistonProtocol& p, double beta, std::size_t levels = 0,
                                        const ThermalOptions& opts = {}) {
  if (levels == 0) levels = thermal_level_count(p, beta, opts.tail_tolerance);
  return thermal_populations(PistonSystem(p, levels), beta, opts);
}

// --------------------------------------------------------- mean extra work

// sum_n p_n / (4 pi^2 n^2)
inline double thermal_sum(const ThermalEnsemble& ens) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < ens.populations.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    acc += ens.populations[i] / (4.0 * pi * pi * n * n);
  }
  return acc;
}

// High-temperature estimate of thermal_sum from the continuum (erfc) approximation.
inline double thermal_sum_erfc_estimate(double beta, double L0, double M) {
  const double x = beta * pi * pi / (8.0 * L0 * L0 * M);
  return std::exp(-x) * std::sqrt(beta / (2.0 * pi * pi * pi * L0 * L0 * M)) / std::erfc(std::sqrt(x)) -
         beta / (4.0 * L0 * L0 * M);
}

// Leading term sqrt(beta / (2 pi^3 L0^2 M)) of the same estimate.
inline double thermal_sum_leading(double beta, double L0, double M) {
  return std::sqrt(beta / (2.0 * pi * pi * pi * L0 * L0 * M));
}

inline double geometry_factor(const PistonProtocol& p) {
  const double r = p.expansion_ratio();
  return p.mass * p.L1 * p.L1 * (1.0 - r) * (1.0 - r) * (1.0 + r * r);
}

// Sigma = M L1^2 (1-r)^2 (1+r^2) (1/6 - sum_n p_n / (4 pi^2 n^2)), ensemble at L0.
inline double sigma_exact(const PistonProtocol& p, const ThermalEnsemble& ens) {
  return geometry_factor(p) * (1.0 / 6.0 - thermal_sum(ens));
}

inline double sigma_high_temperature(const PistonProtocol& p) { return geometry_factor(p) / 6.0; }

// ------------------------------------------------------------ exact solver

struct ExactOptions {
  std::size_t nodes_per_oscillation = 64;
  double completeness_tolerance = 1e-6;
  // Smallest basis used by the extrapolated work.
  std::size_t min_levels = 200;
};

struct ExactPropagation {
  PistonProtocol protocol;
  Eigen::MatrixXcd overlap;        // (l, n) = <Psi_l(0)|n(0)>
  Eigen::VectorXd final_energy;    // e_l = <Psi_l(tau)|H(tau)|Psi_l(tau)>
  Eigen::MatrixXcd energy_matrix;  // <Psi_l(tau)|H(tau)|Psi_m(tau)>
  Eigen::VectorXd completeness;    // sum_l |O_ln|^2 per initial level
  std::size_t panels{0};
  std::size_t points_per_panel{0};

  std::size_t level_count() const { return static_cast<std::size_t>(overlap.rows()); }
  std::size_t initial_count() const { return static_cast<std::size_t>(overlap.cols()); }
  double completeness_defect() const { return (completeness.array() - 1.0).abs().maxCoeff(); }
};

// Exact-basis levels needed beyond the initial ones; |O_ln|^2 decays like l^-6.
inline std::size_t default_exact_level_count(std::size_t initial_count) {
  return initial_count + std::max<std::size_t>(80, initial_count);
}

// Exact solution of the moving-wall problem for initial quantum number n at time t.
inline cplx exact_wavefunction(const PistonProtocol& p, long n, double x, double t) {
  const double len = p.L0 + (p.L1 - p.L0) * t / p.tau;
  if (x < 0.0 || x > len) return {0.0, 0.0};
  const double phase = 0.5 * p.mass * x * x * (p.L1 - p.L0) / (len * p.tau) -
                       static_cast<double>(n * n) * pi * pi * t / (2.0 * p.mass * p.L0 * len);
  return std::polar(std::sqrt(2.0 / len) * std::sin(static_cast<double>(n) * pi * x / len), phase);
}

// Overlaps of the initial eigenstates on the exact time-dependent basis, and
// the energy matrix of that basis at t = tau.
//
// O_ln = (2/L0) ∫_0^L0 exp(-i alpha x^2) sin(l pi x/L0) sin(n pi x/L0) dx with
// alpha = M (L1 - L0) / (2 L0 tau). The sine product is folded into
// F(k) = ∫ exp(-i alpha x^2) cos(k pi x/L0) dx so only level_count +
// initial_count chirped integrals are needed.
inline ExactPropagation exact_overlaps(const PistonProtocol& p, std::size_t level_count,
                                       std::size_t initial_count, const ExactOptions& opts = {}) {
  p.validate();
  if (initial_count == 0 || level_count < initial_count) {
    throw std::invalid_argument("exact_overlaps: need 0 < initial_count <= level_count");
  }
  const auto n_lv = static_cast<Eigen::Index>(level_count);
  const auto n_in = static_cast<Eigen::Index>(initial_count);
  const Eigen::Index k_max = n_lv + n_in;

  // Oscillations over [0, L0]: k_max/2 from the cosine, alpha L0^2 / (2 pi) from the chirp.
  const double alpha = p.mass * (p.L1 - p.L0) / (2.0 * p.L0 * p.tau);
  const double oscillations = 0.5 * static_cast<double>(k_max) + std::abs(alpha) * p.L0 * p.L0 / (2.0 * pi) + 1.0;
  const std::size_t per_panel = 16;
  const auto panels = static_cast<std::size_t>(
      std::ceil(oscillations * static_cast<double>(opts.nodes_per_oscillation) / static_cast<double>(per_panel)));
  const quad::PanelRule rule = quad::gauss_legendre_panels(0.0, p.L0, panels);

  const Eigen::ArrayXcd base =
      rule.weights.cast<cplx>() * (cplx(0.0, -alpha) * rule.nodes.square().cast<cplx>()).exp();
  const Eigen::ArrayXcd step = (cplx(0.0, pi / p.L0) * rule.nodes.cast<cplx>()).exp();
  Eigen::ArrayXcd zk = Eigen::ArrayXcd::Ones(rule.nodes.size());
  Eigen::VectorXcd f(k_max + 1);
  for (Eigen::Index k = 0; k <= k_max; ++k) {
    f[k] = (base * zk.real().cast<cplx>()).sum();
    zk *= step;
  }

  ExactPropagation out;
  out.protocol = p;
  out.panels = rule.panels;
  out.points_per_panel = rule.points_per_panel;
  out.overlap.resize(n_lv, n_in);
  for (Eigen::Index li = 0; li < n_lv; ++li)
    for (Eigen::Index ni = 0; ni < n_in; ++ni) out.overlap(li, ni) = (f[std::abs(li - ni)] - f[li + ni + 2]) / p.L0;
  out.completeness = out.overlap.cwiseAbs2().colwise().sum().transpose();

  // Energy matrix at t = tau on the box [0, L1]. With Psi_m = exp(i a x^2 - i chi_m) u_m:
  //   <Psi_l|H|Psi_m> = exp(i(chi_l - chi_m)) / (2M) [k_l^2 d_lm + 4 a^2 <x^2>_lm + 2 i a D_lm],
  //   D_lm = ∫ x (u_l' u_m - u_l u_m') dx.
  const double L = p.L1;
  const double a = p.mass * (p.L1 - p.L0) / (2.0 * p.L1 * p.tau);
  const double chi_unit = pi * pi * p.tau / (2.0 * p.mass * p.L0 * p.L1);
  Eigen::VectorXcd rot(n_lv);
  for (Eigen::Index i = 0; i < n_lv; ++i) {
    const double q = static_cast<double>(i + 1);
    rot[i] = std::polar(1.0, std::remainder(q * q * chi_unit, 2.0 * pi));
  }
  out.energy_matrix.resize(n_lv, n_lv);
  for (Eigen::Index i = 0; i < n_lv; ++i) {
    const long l = i + 1;
    for (Eigen::Index j = 0; j < n_lv; ++j) {
      const long m = j + 1;
      cplx bracket;
      if (l == m) {
        const double kl = static_cast<double>(l) * pi / L;
        const double x2 = L * L * (1.0 / 3.0 - 1.0 / (2.0 * static_cast<double>(l * l) * pi * pi));
        bracket = kl * kl + 4.0 * a * a * x2;
      } else {
        const double d = static_cast<double>(l * l - m * m);
        const double lm = static_cast<double>(l * m);
        const double x2 = 8.0 * L * L * lm * sign_of_sum(l, m) / (pi * pi * d * d);
        const double dlm = 4.0 * lm * sign_of_sum(l, m) / d;
        bracket = cplx(4.0 * a * a * x2, 2.0 * a * dlm);
      }
      out.energy_matrix(i, j) = rot[i] * std::conj(rot[j]) * bracket / (2.0 * p.mass);
    }
  }
  out.final_energy = out.energy_matrix.diagonal().real();

  const double defect = out.completeness_defect();
  if (!(defect <= opts.completeness_tolerance)) {
    std::ostringstream os;
    os << "exact_overlaps: column completeness failed with " << level_count
       << " levels; raise the level count (Fresnel phase " << std::abs(alpha) * p.L0 * p.L0 << ")";
    throw convergence_error(os.str(), defect);
  }
  return out;
}

struct ExactWork {
  double extra_work{0.0};      // W_ex = sum_n p_n (<H(tau)>_n - E_n(1))
  double work{0.0};            // W = sum_n p_n (<H(tau)>_n - E_n(0))
  double adiabatic_work{0.0};  // W_adi = sum_n p_n (E_n(1) - E_n(0))
};

inline ExactWork exact_extra_work(const PistonProtocol& p, const ThermalEnsemble& ens,
                                  const ExactPropagation& prop) {
  if (ens.size() != prop.initial_count()) {
    throw dimension_error("exact_extra_work: ensemble size differs from the propagation's initial levels");
  }
  const Eigen::MatrixXcd ho = prop.energy_matrix * prop.overlap;
  ExactWork w;
  for (Eigen::Index i = 0; i < prop.overlap.cols(); ++i) {
    const double pn = ens.populations[i];
    if (pn == 0.0) continue;
    const double final_mean = prop.overlap.col(i).dot(ho.col(i)).real();
    const double e0 = instantaneous_energy(p, i + 1, 0.0);
    const double e1 = instantaneous_energy(p, i + 1, 1.0);
    w.extra_work += pn * (final_mean - e1);
    w.work += pn * (final_mean - e0);
    w.adiabatic_work += pn * (e1 - e0);
  }
  return w;
}

struct ConvergedWork {
  ExactWork work;
  double truncation_estimate{0.0};  // size of the Richardson correction to extra_work
  std::size_t levels{0};            // larger of the two basis sizes
  double completeness_defect{0.0};  // worst column norm defect of either basis
};

// Cutting the exact basis at N levels leaves an error ~ N^-3 in every work
// term, since the chirped sine coefficients decay like l^-3. Two basis sizes
// N and 2N and one Richardson step remove the leading term.
inline ConvergedWork exact_extra_work_extrapolated(const PistonProtocol& p, const ThermalEnsemble& ens,
                                                   const ExactOptions& opts = {}) {
  const std::size_t n = std::max(default_exact_level_count(ens.size()), opts.min_levels);
  const ExactPropagation coarse = exact_overlaps(p, n, ens.size(), opts);
  const ExactPropagation fine = exact_overlaps(p, 2 * n, ens.size(), opts);
  const ExactWork a = exact_extra_work(p, ens, coarse);
  const ExactWork b = exact_extra_work(p, ens, fine);
  auto extrapolate = [](double coarse, double fine) { return fine + (fine - coarse) / 7.0; };
  ConvergedWork out;
  out.work.extra_work = extrapolate(a.extra_work, b.extra_work);
  out.work.work = extrapolate(a.work, b.work);
  out.work.adiabatic_work = b.adiabatic_work;
  out.truncation_estimate = std::abs(b.extra_work - a.extra_work) / 7.0;
  out.levels = 2 * n;
  out.completeness_defect = std::max(coarse.completeness_defect(), fine.completeness_defect());
  return out;
}

// Convenience: thermal ensemble at L0, extrapolated basis truncation.
inline ExactWork exact_extra_work(const PistonProtocol& p, double beta, const ExactOptions& opts = {}) {
  return exact_extra_work_extrapolated(p, thermal_ensemble(p, beta), opts).work;
}

}  // namespace qotto::piston
