// quadrature.hpp: Gauss-Legendre panels and adaptive integration helpers.
#pragma once

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>

#include "errors.hpp"

namespace qotto::quad {

// Nodes and weights of a composite Gauss-Legendre rule on [a, b].
struct PanelRule {
  Eigen::ArrayXd nodes;
  Eigen::ArrayXd weights;
  std::size_t panels{0};
  std::size_t points_per_panel{0};
};

// Points per panel is fixed at 16; the caller chooses the panel count.
inline PanelRule gauss_legendre_panels(double a, double b, std::size_t panels) {
  using rule = boost::math::quadrature::gauss<double, 16>;
  const auto& x = rule::abscissa();  // 8 non-negative abscissae
  const auto& w = rule::weights();
  constexpr std::size_t half = 8;
  constexpr std::size_t per = 16;
  if (panels == 0) panels = 1;

  PanelRule out;
  out.panels = panels;
  out.points_per_panel = per;
  out.nodes.resize(static_cast<Eigen::Index>(panels * per));
  out.weights.resize(static_cast<Eigen::Index>(panels * per));
  const double width = (b - a) / static_cast<double>(panels);
  Eigen::Index k = 0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double mid = a + (static_cast<double>(p) + 0.5) * width;
    const double hw = 0.5 * width;
    for (std::size_t i = 0; i < half; ++i) {
      out.nodes[k] = mid - hw * x[half - 1 - i];
      out.weights[k++] = hw * w[half - 1 - i];
    }
    for (std::size_t i = 0; i < half; ++i) {
      out.nodes[k] = mid + hw * x[i];
      out.weights[k++] = hw * w[i];
    }
  }
  return out;
}

// Adaptive Gauss-Kronrod (7/15) integral of a real function. Throws
// convergence_error when the error estimate exceeds the relative tolerance.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double rel_tol = 1e-10) {
  if (a == b) return 0.0;
  double err = 0.0;
  double l1 = 0.0;
  const double val = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      f, a, b, 20, rel_tol, &err, &l1);
  const double scale = std::max(l1, std::numeric_limits<double>::min());
  if (!std::isfinite(val) || err > rel_tol * scale) {
    throw convergence_error("adaptive quadrature did not converge", err);
  }
  return val;
}

}  // namespace qotto::quad
