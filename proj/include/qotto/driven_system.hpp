// driven_system.hpp: discrete-spectrum system driven over rescaled time s ∈ [0, 1].
//
// Conventions: hbar = k_B = 1, level indices are 0-based (index 0 is the
// ground state), and the coupling is Gamma_lm(s) = <l(s)| d/ds |m(s)>.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "errors.hpp"
#include "quadrature.hpp"

namespace qotto {

using cplx = std::complex<double>;

inline constexpr double kPhaseTolerance = 1e-10;
inline constexpr double kGapFloor = 1e-12;

class DrivenSystem {
 public:
  virtual ~DrivenSystem() = default;

  virtual std::size_t level_count() const = 0;
  virtual double energy(std::size_t n, double s) const = 0;
  virtual cplx coupling(std::size_t l, std::size_t m, double s) const = 0;

  // Bulk accessors; override when a closed form is cheaper than the loops.
  virtual Eigen::VectorXd energies(double s) const {
    const auto n = static_cast<Eigen::Index>(level_count());
    Eigen::VectorXd e(n);
    for (Eigen::Index i = 0; i < n; ++i) e[i] = energy(static_cast<std::size_t>(i), s);
    return e;
  }

  virtual Eigen::MatrixXcd coupling_matrix(double s) const {
    const auto n = static_cast<Eigen::Index>(level_count());
    Eigen::MatrixXcd g(n, n);
    for (Eigen::Index l = 0; l < n; ++l)
      for (Eigen::Index m = 0; m < n; ++m)
        g(l, m) = coupling(static_cast<std::size_t>(l), static_cast<std::size_t>(m), s);
    return g;
  }

  // Systems whose coupling is scale(s) * S with a fixed real S can expose S so
  // integrators skip rebuilding the matrix at every step.
  virtual const Eigen::MatrixXd* coupling_shape() const { return nullptr; }
  virtual double coupling_scale(double) const { return 1.0; }

  // Dynamical phase phi_l(s) = ∫_0^s E_l ds' (multiply by tau for the physical phase).
  virtual double dynamical_phase(std::size_t l, double s) const {
    return quad::integrate([&](double u) { return energy(l, u); }, 0.0, s, kPhaseTolerance);
  }

  // Berry phase gamma_l(s) = i ∫_0^s Gamma_ll ds'. Real when Gamma_ll is imaginary.
  virtual double berry_phase(std::size_t l, double s) const {
    const double re = quad::integrate([&](double u) { return coupling(l, l, u).real(); }, 0.0, s,
                                      kPhaseTolerance);
    const double im = quad::integrate([&](double u) { return coupling(l, l, u).imag(); }, 0.0, s,
                                      kPhaseTolerance);
    if (std::abs(re) > 1e-9 * std::max(1.0, std::abs(im))) {
      throw std::domain_error("berry_phase: Gamma_ll has a real part; basis is not normalized");
    }
    return -im;
  }

  virtual Eigen::VectorXd dynamical_phases(double s) const {
    const auto n = static_cast<Eigen::Index>(level_count());
    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) p[i] = dynamical_phase(static_cast<std::size_t>(i), s);
    return p;
  }

  virtual Eigen::VectorXd berry_phases(double s) const {
    const auto n = static_cast<Eigen::Index>(level_count());
    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) p[i] = berry_phase(static_cast<std::size_t>(i), s);
    return p;
  }
};

// System defined by callables. Handy for toy models and tests.
class FunctionSystem final : public DrivenSystem {
 public:
  using EnergyFn = std::function<double(std::size_t, double)>;
  using CouplingFn = std::function<cplx(std::size_t, std::size_t, double)>;

  FunctionSystem(std::size_t levels, EnergyFn energy, CouplingFn coupling)
      : levels_(levels), energy_(std::move(energy)), coupling_(std::move(coupling)) {
    if (levels_ == 0) throw std::invalid_argument("FunctionSystem: level_count must be positive");
  }

  std::size_t level_count() const override { return levels_; }
  double energy(std::size_t n, double s) const override { return energy_(n, s); }
  cplx coupling(std::size_t l, std::size_t m, double s) const override { return coupling_(l, m, s); }

 private:
  std::size_t levels_;
  EnergyFn energy_;
  CouplingFn coupling_;
};

// --------------------------------------------------------------- validation

// Rejects systems whose levels are not strictly ordered on a uniform s grid.
inline void check_no_crossing(const DrivenSystem& sys, std::size_t samples = 257,
                              double gap_floor = kGapFloor) {
  if (samples < 2) samples = 2;
  for (std::size_t k = 0; k < samples; ++k) {
    const double s = static_cast<double>(k) / static_cast<double>(samples - 1);
    const Eigen::VectorXd e = sys.energies(s);
    for (Eigen::Index n = 0; n + 1 < e.size(); ++n) {
      if (!(e[n + 1] - e[n] > gap_floor)) {
        std::ostringstream os;
        os << "levels " << n << " and " << n + 1 << " cross or touch at s = " << s;
        throw level_crossing_error(os.str());
      }
    }
  }
}

// max_{l,m} |Gamma_lm + conj(Gamma_ml)|; zero for a smooth orthonormal basis.
inline double antihermiticity_defect(const DrivenSystem& sys, double s) {
  const Eigen::MatrixXcd g = sys.coupling_matrix(s);
  return (g + g.adjoint()).cwiseAbs().maxCoeff();
}

}  // namespace qotto
