// oracle_ode.hpp: brute-force integration of the rescaled amplitude equation
//
//   d/ds b_nl + b_nl Gamma_ll + sum_{m != l} b_nm exp(-i tau (phi_m - phi_l)) Gamma_lm = 0,
//   b_nl(0) = delta_nl,
//
// on a truncated instantaneous basis. Independent of the first-order formulas;
// used to validate them and the piston exact solver.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "apt.hpp"
#include "driven_system.hpp"
#include "errors.hpp"

namespace qotto::ode {

struct OdeOptions {
  double steps_per_oscillation = 20.0;  // of the fastest phase tau * max gap
  std::size_t min_steps = 200;
  std::size_t max_steps = 50'000'000;
  double error_tolerance = 1e-8;  // Richardson estimate on amplitudes
  std::size_t max_refinements = 4;
  double unitarity_tolerance = 1e-6;
  std::size_t gap_samples = 65;
  double population_floor = 1e-14;  // relative to p_0; lighter levels are skipped
};

struct OdeRun {
  double tau{0.0};
  std::size_t level_count{0};
  std::size_t steps{0};
  double step_size{0.0};
  std::vector<std::size_t> initial_levels;
  Eigen::MatrixXcd amplitudes;       // (l, j) = b_{n_j l}(1)
  Eigen::VectorXd unitarity_defect;  // |sum_l |b|^2 - 1| per initial level
  double error_estimate{0.0};        // max |b_h - b_{h/2}| / 15

  double max_unitarity_defect() const {
    return unitarity_defect.size() ? unitarity_defect.maxCoeff() : 0.0;
  }
  // |b_nl(1)|^2 for the j-th initial level.
  double probability(std::size_t j, std::size_t l) const {
    return std::norm(amplitudes(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(j)));
  }
};

// Default oracle truncation: thermal cutoff plus a guard band.
inline std::size_t default_level_count(std::size_t thermal_levels, std::size_t guard = 10) {
  return thermal_levels + guard;
}

namespace detail {

// Coupling at one s: either a general complex matrix, or scale * a fixed
// real shape owned by the system.
struct Frame {
  Eigen::MatrixXcd coupling;
  const Eigen::MatrixXd* shape{nullptr};
  double scale{1.0};
  Eigen::VectorXcd rotor;  // exp(i tau phi_l(s))
};

class Rhs {
 public:
  Rhs(const DrivenSystem& sys, double tau, Eigen::Index n) : sys_(sys), tau_(tau), n_(n) {}

  Frame frame(double s) const {
    Frame f;
    f.shape = sys_.coupling_shape();
    if (f.shape) {
      f.scale = sys_.coupling_scale(s);
    } else {
      f.coupling = sys_.coupling_matrix(s).topLeftCorner(n_, n_);
    }
    const Eigen::VectorXd phi = sys_.dynamical_phases(s).head(n_);
    f.rotor.resize(n_);
    for (Eigen::Index l = 0; l < n_; ++l)
      f.rotor[l] = std::polar(1.0, std::remainder(tau_ * phi[l], 2.0 * std::numbers::pi));
    return f;
  }

 private:
  const DrivenSystem& sys_;
  double tau_;
  Eigen::Index n_;
};

// dB/ds = -R Gamma R^* B, R = diag(rotor). Scratch buffers live here so the
// inner loop does not allocate.
class Stepper {
 public:
  Stepper(Eigen::Index n, Eigen::Index k) : v_(n, k), w_(n, k), split_(n, 2 * k), mixed_(n, 2 * k) {}

  void apply(const Frame& f, const Eigen::MatrixXcd& b, Eigen::MatrixXcd& out) {
    const Eigen::Index k = b.cols();
    v_.noalias() = f.rotor.conjugate().asDiagonal() * b;
    if (f.shape) {
      const Eigen::Index n = b.rows();
      split_.leftCols(k) = v_.real();
      split_.rightCols(k) = v_.imag();
      mixed_.noalias() = f.shape->topLeftCorner(n, n) * split_;
      w_.real() = f.scale * mixed_.leftCols(k);
      w_.imag() = f.scale * mixed_.rightCols(k);
    } else {
      w_.noalias() = f.coupling * v_;
    }
    out.noalias() = -(f.rotor.asDiagonal() * w_);
  }

 private:
  Eigen::MatrixXcd v_, w_;
  Eigen::MatrixXd split_, mixed_;
};

inline Eigen::MatrixXcd rk4(const Rhs& rhs, Eigen::MatrixXcd b, std::size_t steps) {
  const double h = 1.0 / static_cast<double>(steps);
  Stepper st(b.rows(), b.cols());
  Eigen::MatrixXcd k1(b.rows(), b.cols()), k2(k1), k3(k1), k4(k1), tmp(k1);
  Frame left = rhs.frame(0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    const double s = static_cast<double>(k) * h;
    const Frame mid = rhs.frame(s + 0.5 * h);
    Frame right = rhs.frame(static_cast<double>(k + 1) * h);
    st.apply(left, b, k1);
    tmp = b + (0.5 * h) * k1;
    st.apply(mid, tmp, k2);
    tmp = b + (0.5 * h) * k2;
    st.apply(mid, tmp, k3);
    tmp = b + h * k3;
    st.apply(right, tmp, k4);
    b += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    left = std::move(right);
  }
  return b;
}

}  // namespace detail

// Integrates b_nl(s) over s in [0, 1] for each requested initial level on the
// first n_max levels of the system (n_max == 0 uses all of them). Step count
// resolves the fastest phase and is doubled until the Richardson estimate
// meets the tolerance.
inline OdeRun integrate_amplitudes(const DrivenSystem& sys, double tau, std::span<const std::size_t> initial_levels,
                                   std::size_t n_max = 0, const OdeOptions& opts = {}) {
  if (!(tau > 0.0)) throw std::invalid_argument("integrate_amplitudes: tau must be positive");
  if (n_max == 0) n_max = sys.level_count();
  if (n_max > sys.level_count()) throw dimension_error("integrate_amplitudes: n_max exceeds system level count");
  if (initial_levels.empty()) throw std::invalid_argument("integrate_amplitudes: no initial levels");
  for (auto n : initial_levels)
    if (n >= n_max) throw dimension_error("integrate_amplitudes: initial level outside truncation");

  const auto n = static_cast<Eigen::Index>(n_max);
  double max_gap = 0.0;
  for (std::size_t k = 0; k < opts.gap_samples; ++k) {
    const double s = static_cast<double>(k) / static_cast<double>(opts.gap_samples - 1);
    const Eigen::VectorXd e = sys.energies(s).head(n);
    max_gap = std::max(max_gap, e.maxCoeff() - e.minCoeff());
  }
  const double oscillations = tau * max_gap / (2.0 * std::numbers::pi);
  auto steps = std::max<std::size_t>(opts.min_steps,
                                     static_cast<std::size_t>(std::ceil(opts.steps_per_oscillation * oscillations)));
  if (steps > opts.max_steps) {
    throw convergence_error("integrate_amplitudes: phase-resolving step count exceeds max_steps",
                            static_cast<double>(steps));
  }

  Eigen::MatrixXcd b0 = Eigen::MatrixXcd::Zero(n, static_cast<Eigen::Index>(initial_levels.size()));
  for (std::size_t j = 0; j < initial_levels.size(); ++j)
    b0(static_cast<Eigen::Index>(initial_levels[j]), static_cast<Eigen::Index>(j)) = 1.0;

  const detail::Rhs rhs(sys, tau, n);
  Eigen::MatrixXcd coarse = detail::rk4(rhs, b0, steps);
  Eigen::MatrixXcd fine;
  double err = 0.0;
  for (std::size_t refine = 0;; ++refine) {
    if (2 * steps > opts.max_steps) throw convergence_error("integrate_amplitudes: step underflow", err);
    fine = detail::rk4(rhs, b0, 2 * steps);
    err = (fine - coarse).cwiseAbs().maxCoeff() / 15.0;
    steps *= 2;
    if (err <= opts.error_tolerance) break;
    if (refine + 1 >= opts.max_refinements) {
      throw convergence_error("integrate_amplitudes: Richardson estimate above tolerance", err);
    }
    coarse = fine;
  }

  OdeRun run;
  run.tau = tau;
  run.level_count = n_max;
  run.steps = steps;
  run.step_size = 1.0 / static_cast<double>(steps);
  run.initial_levels.assign(initial_levels.begin(), initial_levels.end());
  run.amplitudes = std::move(fine);
  run.error_estimate = err;
  run.unitarity_defect = (run.amplitudes.cwiseAbs2().colwise().sum().array() - 1.0).abs().matrix().transpose();
  if (run.max_unitarity_defect() > opts.unitarity_tolerance) {
    throw convergence_error("integrate_amplitudes: unitarity leak", run.max_unitarity_defect());
  }
  return run;
}

inline OdeRun integrate_amplitudes(const DrivenSystem& sys, double tau, std::size_t initial_level,
                                   std::size_t n_max = 0, const OdeOptions& opts = {}) {
  const std::size_t levels[] = {initial_level};
  return integrate_amplitudes(sys, tau, std::span<const std::size_t>(levels), n_max, opts);
}

struct OdeWork {
  double extra_work{0.0};
  OdeRun run;
};

// W_ex = sum_n p_n sum_{l != n} (E_l(1) - E_n(1)) |b_nl(1)|^2 over thermally relevant n.
inline OdeWork exact_extra_work_ode(const DrivenSystem& sys, const ThermalEnsemble& ens, double tau,
                                    std::size_t n_max = 0, const OdeOptions& opts = {}) {
  if (ens.size() > sys.level_count()) throw dimension_error("exact_extra_work_ode: ensemble larger than system");
  if (n_max == 0) n_max = sys.level_count();
  std::vector<std::size_t> initial;
  const double p0 = ens.populations[0];
  for (std::size_t i = 0; i < ens.size() && i < n_max; ++i)
    if (ens.populations[static_cast<Eigen::Index>(i)] > opts.population_floor * p0) initial.push_back(i);

  OdeWork out;
  out.run = integrate_amplitudes(sys, tau, initial, n_max, opts);
  const Eigen::VectorXd e1 = sys.energies(1.0).head(static_cast<Eigen::Index>(n_max));
  for (std::size_t j = 0; j < initial.size(); ++j) {
    const auto ni = static_cast<Eigen::Index>(initial[j]);
    double acc = 0.0;
    for (Eigen::Index l = 0; l < e1.size(); ++l)
      if (l != ni) acc += (e1[l] - e1[ni]) * out.run.probability(j, static_cast<std::size_t>(l));
    out.extra_work += ens.populations[ni] * acc;
  }
  return out;
}

}  // namespace qotto::ode
