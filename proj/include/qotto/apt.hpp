// apt.hpp: first-order adiabatic perturbation theory for driven systems.
//
// For a stroke of duration tau the transition amplitudes between
// instantaneous levels are O(1/tau), so the extra work splits into a mean
// part Sigma/tau^2 that depends only on the endpoint transition rates and an
// oscillating part omega(tau)/tau^2 carried by the accumulated phases.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <sstream>

#include "driven_system.hpp"
#include "errors.hpp"

namespace qotto {

struct AptOptions {
  // Only pairs with |n - l| <= band enter the sums; transition rates decay
  // like 1/(n^2 - l^2)^2 for the usual spectra.
  std::size_t band = 40;
  double gap_floor = kGapFloor;
};

struct ThermalOptions {
  // Largest allowed p_{N-1} / p_0 at the top of the truncated spectrum.
  double tail_tolerance = 1e-12;
};

struct ThermalEnsemble {
  double beta{0.0};
  Eigen::VectorXd populations;  // p_n, sums to one over the truncated set
  double partition_value{0.0};  // sum_m exp(-beta E_m(0)), may underflow
  double log_partition_value{0.0};

  std::size_t size() const { return static_cast<std::size_t>(populations.size()); }
};

struct PhaseRecord {
  double s{1.0};
  Eigen::VectorXd dynamical_phase;  // phi_l(s), tau-free
  Eigen::VectorXd berry_phase;      // gamma_l(s)
};

struct AmplitudeMatrix {
  double tau{0.0};
  Eigen::MatrixXcd entries;  // c_nl(tau); row = initial level n
};

struct ExtraWorkReport {
  double tau{0.0};
  double total{0.0};
  double mean_part{0.0};
  double oscillating_part{0.0};
  double sigma{0.0};
  double omega{0.0};
};

// ------------------------------------------------------------------ thermal

inline ThermalEnsemble thermal_populations(const DrivenSystem& sys, double beta,
                                           const ThermalOptions& opts = {}) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("thermal_populations: beta must be finite and >= 0");
  }
  const Eigen::VectorXd e = sys.energies(0.0);
  for (Eigen::Index n = 0; n + 1 < e.size(); ++n) {
    if (!(e[n + 1] > e[n])) throw level_crossing_error("thermal_populations: spectrum at s = 0 is not increasing");
  }
  const Eigen::VectorXd w = (-beta * (e.array() - e[0])).exp().matrix();
  const double sum = w.sum();

  ThermalEnsemble out;
  out.beta = beta;
  out.populations = w / sum;
  out.log_partition_value = -beta * e[0] + std::log(sum);
  out.partition_value = std::exp(out.log_partition_value);

  const double tail = w[w.size() - 1] / w[0];
  if (e.size() > 1 && tail > opts.tail_tolerance) {
    std::ostringstream os;
    os << "thermal tail p_N/p_1 = " << tail << " exceeds " << opts.tail_tolerance << " with "
       << e.size() << " levels; raise the level count";
    throw truncation_error(os.str());
  }
  return out;
}

// High-temperature validity diagnostic, (2 pi beta / M)^{1/2}.
inline double thermal_de_broglie_wavelength(double beta, double mass) {
  return std::sqrt(2.0 * std::numbers::pi * beta / mass);
}

// -------------------------------------------------------------------- rates

namespace detail {
inline void check_gap(double gap, std::size_t n, std::size_t l, double s, double floor) {
  if (!(std::abs(gap) >= floor)) {
    std::ostringstream os;
    os << "gap between levels " << n << " and " << l << " is " << gap << " at s = " << s;
    throw degenerate_gap_error(os.str());
  }
}

inline bool in_band(Eigen::Index n, Eigen::Index l, std::size_t band) {
  return n != l && static_cast<std::size_t>(std::abs(n - l)) <= band;
}

inline double reduce_phase(double x) { return std::remainder(x, 2.0 * std::numbers::pi); }
}  // namespace detail

// T_nl(s) = Gamma_ln(s) / (E_n(s) - E_l(s)), n != l.
inline cplx transition_rate(const DrivenSystem& sys, std::size_t n, std::size_t l, double s,
                            double gap_floor = kGapFloor) {
  if (n == l) throw std::invalid_argument("transition_rate: n == l");
  const double gap = sys.energy(n, s) - sys.energy(l, s);
  detail::check_gap(gap, n, l, s, gap_floor);
  return sys.coupling(l, n, s) / gap;
}

// Band-limited matrix of T_nl(s); entries outside the band are zero.
inline Eigen::MatrixXcd rate_matrix(const DrivenSystem& sys, double s, const AptOptions& opts = {}) {
  const Eigen::VectorXd e = sys.energies(s);
  const Eigen::MatrixXcd g = sys.coupling_matrix(s);
  const Eigen::Index n_lv = e.size();
  Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(n_lv, n_lv);
  for (Eigen::Index n = 0; n < n_lv; ++n) {
    for (Eigen::Index l = 0; l < n_lv; ++l) {
      if (!detail::in_band(n, l, opts.band)) continue;
      const double gap = e[n] - e[l];
      detail::check_gap(gap, static_cast<std::size_t>(n), static_cast<std::size_t>(l), s, opts.gap_floor);
      t(n, l) = g(l, n) / gap;
    }
  }
  return t;
}

inline PhaseRecord phases(const DrivenSystem& sys, double s = 1.0) {
  return PhaseRecord{s, sys.dynamical_phases(s), sys.berry_phases(s)};
}

// ------------------------------------------------------------ model object

// Everything the first-order formulas need, evaluated once per system and
// ensemble: endpoint rates, final energies and phases. Cheap to query for
// many values of tau.
class FirstOrderModel {
 public:
  FirstOrderModel(const DrivenSystem& sys, const ThermalEnsemble& ens, const AptOptions& opts = {})
      : opts_(opts),
        p_(ens.populations),
        e1_(sys.energies(1.0)),
        t0_(rate_matrix(sys, 0.0, opts)),
        t1_(rate_matrix(sys, 1.0, opts)),
        ph_(phases(sys, 1.0)) {
    if (ens.size() != sys.level_count()) {
      throw dimension_error("FirstOrderModel: ensemble and system have different level counts");
    }
  }

  std::size_t level_count() const { return static_cast<std::size_t>(p_.size()); }
  const Eigen::MatrixXcd& initial_rates() const { return t0_; }
  const Eigen::MatrixXcd& final_rates() const { return t1_; }
  const PhaseRecord& final_phases() const { return ph_; }

  double sigma() const {
    double acc = 0.0;
    for_pairs([&](Eigen::Index n, Eigen::Index l) {
      acc += p_[n] * (e1_[l] - e1_[n]) * (std::norm(t1_(n, l)) + std::norm(t0_(n, l)));
    });
    return acc;
  }

  double omega(double tau) const {
    double acc = 0.0;
    for_pairs([&](Eigen::Index n, Eigen::Index l) {
      acc += p_[n] * (e1_[l] - e1_[n]) * (t1_(n, l) * std::conj(t0_(n, l)) * interference_phase(n, l, tau)).real();
    });
    return -2.0 * acc;
  }

  // Upper bound on |omega(tau)| over all tau.
  double omega_bound() const {
    double acc = 0.0;
    for_pairs([&](Eigen::Index n, Eigen::Index l) {
      acc += 2.0 * p_[n] * std::abs(e1_[l] - e1_[n]) * std::abs(t1_(n, l)) * std::abs(t0_(n, l));
    });
    return acc;
  }

  AmplitudeMatrix amplitudes(double tau) const {
    check_tau(tau);
    const Eigen::Index n_lv = p_.size();
    AmplitudeMatrix a{tau, Eigen::MatrixXcd::Zero(n_lv, n_lv)};
    const cplx i{0.0, 1.0};
    for (Eigen::Index n = 0; n < n_lv; ++n) {
      a.entries(n, n) = std::polar(1.0, ph_.berry_phase[n]);
      for (Eigen::Index l = 0; l < n_lv; ++l) {
        if (!detail::in_band(n, l, opts_.band)) continue;
        const double arg = detail::reduce_phase(-tau * (ph_.dynamical_phase[n] - ph_.dynamical_phase[l]));
        a.entries(n, l) = -i / tau *
                          (t1_(n, l) * std::polar(1.0, arg + ph_.berry_phase[n]) -
                           t0_(n, l) * std::polar(1.0, ph_.berry_phase[l]));
      }
    }
    return a;
  }

  ExtraWorkReport report(double tau, bool include_oscillating = true) const {
    check_tau(tau);
    ExtraWorkReport r;
    r.tau = tau;
    r.sigma = sigma();
    r.omega = include_oscillating ? omega(tau) : 0.0;
    r.mean_part = r.sigma / (tau * tau);
    r.oscillating_part = r.omega / (tau * tau);
    r.total = r.mean_part + r.oscillating_part;
    return r;
  }

 private:
  template <class Fn>
  void for_pairs(Fn&& fn) const {
    const Eigen::Index n_lv = p_.size();
    const auto band = static_cast<Eigen::Index>(std::min<std::size_t>(opts_.band, static_cast<std::size_t>(n_lv)));
    for (Eigen::Index n = 0; n < n_lv; ++n) {
      if (p_[n] == 0.0) continue;
      const Eigen::Index lo = std::max<Eigen::Index>(0, n - band);
      const Eigen::Index hi = std::min<Eigen::Index>(n_lv - 1, n + band);
      for (Eigen::Index l = lo; l <= hi; ++l)
        if (l != n) fn(n, l);
    }
  }

  cplx interference_phase(Eigen::Index n, Eigen::Index l, double tau) const {
    const double arg = detail::reduce_phase(-tau * (ph_.dynamical_phase[n] - ph_.dynamical_phase[l]));
    return std::polar(1.0, arg + ph_.berry_phase[n] - ph_.berry_phase[l]);
  }

  static void check_tau(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("control time tau must be positive");
  }

  AptOptions opts_;
  Eigen::VectorXd p_;
  Eigen::VectorXd e1_;
  Eigen::MatrixXcd t0_;
  Eigen::MatrixXcd t1_;
  PhaseRecord ph_;
};

// ----------------------------------------------------- free-function surface

inline AmplitudeMatrix first_order_amplitudes(const DrivenSystem& sys, double tau,
                                              const AptOptions& opts = {}) {
  // Populations do not enter the amplitudes; a uniform placeholder keeps the
  // model's dimension bookkeeping.
  ThermalEnsemble flat;
  flat.populations = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(sys.level_count()),
                                               1.0 / static_cast<double>(sys.level_count()));
  return FirstOrderModel(sys, flat, opts).amplitudes(tau);
}

// W_ex = sum_{n, l != n} p_n (E_l(1) - E_n(1)) |c_nl|^2.
inline double extra_work(const DrivenSystem& sys, const ThermalEnsemble& ens, const AmplitudeMatrix& amp) {
  const auto n_lv = static_cast<Eigen::Index>(sys.level_count());
  if (ens.populations.size() != n_lv || amp.entries.rows() != n_lv || amp.entries.cols() != n_lv) {
    throw dimension_error("extra_work: ensemble, amplitudes and system disagree on level count");
  }
  const Eigen::VectorXd e1 = sys.energies(1.0);
  double acc = 0.0;
  for (Eigen::Index n = 0; n < n_lv; ++n) {
    if (ens.populations[n] == 0.0) continue;
    for (Eigen::Index l = 0; l < n_lv; ++l) {
      if (l == n) continue;
      acc += ens.populations[n] * (e1[l] - e1[n]) * std::norm(amp.entries(n, l));
    }
  }
  return acc;
}

inline double mean_coefficient(const DrivenSystem& sys, const ThermalEnsemble& ens,
                               const AptOptions& opts = {}) {
  return FirstOrderModel(sys, ens, opts).sigma();
}

inline double oscillating_coefficient(const DrivenSystem& sys, const ThermalEnsemble& ens, double tau,
                                      const AptOptions& opts = {}) {
  return FirstOrderModel(sys, ens, opts).omega(tau);
}

inline ExtraWorkReport extra_work_report(const DrivenSystem& sys, const ThermalEnsemble& ens, double tau,
                                         const AptOptions& opts = {}, bool include_oscillating = true) {
  return FirstOrderModel(sys, ens, opts).report(tau, include_oscillating);
}

}  // namespace qotto
