#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dmfg/errors.hpp"
#include "dmfg/expression.hpp"
#include "dmfg/grid.hpp"

namespace dmfg {

/// e^{-1/x^2} extended by 0 at the origin; vanishes to every order there.
inline double flat_exponential(double x) {
  if (x == 0.0) return 0.0;
  return std::exp(-1.0 / (x * x));
}

/// Diffusion coefficients sigma_1, sigma_2 of the diagonal noise matrix, the drift
/// degeneracy h(x1), and the artificial viscosity epsilon.
struct DynamicsSpec {
  PlaneFn sigma1 = [](double, double) { return 0.0; };
  PlaneFn sigma2 = [](double, double) { return 0.0; };
  std::function<double(double)> h = [](double) { return 1.0; };
  double epsilon = 0.0;

  /// Effective diffusion coefficient of axis k in eps*Laplacian + L: eps + sigma_k^2 / 2.
  double diffusivity1(double a, double b) const {
    const double s = sigma1(a, b);
    return epsilon + 0.5 * s * s;
  }
  double diffusivity2(double a, double b) const {
    const double s = sigma2(a, b);
    return epsilon + 0.5 * s * s;
  }

  /// sqrt(2 eps + sigma_k^2): the regularised noise amplitude of the particle dynamics.
  double noise1(double a, double b) const {
    const double s = sigma1(a, b);
    return std::sqrt(2.0 * epsilon + s * s);
  }
  double noise2(double a, double b) const {
    const double s = sigma2(a, b);
    return std::sqrt(2.0 * epsilon + s * s);
  }

  DynamicsSpec with_epsilon(double eps) const {
    DynamicsSpec d = *this;
    d.epsilon = eps;
    return d;
  }
};

/// Sup norms of the coefficients and of their first/second difference quotients on a grid.
struct CoefficientBounds {
  double sigma_sup = 0.0;
  double sigma_d1 = 0.0;
  double sigma_d2 = 0.0;
  double h_sup = 0.0;
  double h_d1 = 0.0;
  double h_d2 = 0.0;
  bool h_vanishes = false;  ///< a sign change or exact zero was seen on the x1 nodes

  bool finite() const {
    return std::isfinite(sigma_sup) && std::isfinite(sigma_d1) && std::isfinite(sigma_d2) &&
           std::isfinite(h_sup) && std::isfinite(h_d1) && std::isfinite(h_d2);
  }
};

/// Numeric spot check of the boundedness assumptions on sigma and h.
inline CoefficientBounds measure_coefficients(const DynamicsSpec& dyn, const Grid2D& g) {
  CoefficientBounds b;
  if (dyn.epsilon < 0.0) throw ConfigError("epsilon must be >= 0");
  const auto scan = [&](const PlaneFn& s) {
    for (std::size_t i = 0; i < g.n1(); ++i)
      for (std::size_t j = 0; j < g.n2(); ++j) {
        const double v = s(g.x1(i), g.x2(j));
        b.sigma_sup = std::max(b.sigma_sup, std::abs(v));
        if (i + 1 < g.n1())
          b.sigma_d1 = std::max(b.sigma_d1, std::abs(s(g.x1(i + 1), g.x2(j)) - v) / g.dx1());
        if (j + 1 < g.n2())
          b.sigma_d1 = std::max(b.sigma_d1, std::abs(s(g.x1(i), g.x2(j + 1)) - v) / g.dx2());
        if (i > 0 && i + 1 < g.n1())
          b.sigma_d2 = std::max(b.sigma_d2, std::abs(s(g.x1(i + 1), g.x2(j)) - 2 * v +
                                                     s(g.x1(i - 1), g.x2(j))) /
                                                (g.dx1() * g.dx1()));
        if (j > 0 && j + 1 < g.n2())
          b.sigma_d2 = std::max(b.sigma_d2, std::abs(s(g.x1(i), g.x2(j + 1)) - 2 * v +
                                                     s(g.x1(i), g.x2(j - 1))) /
                                                (g.dx2() * g.dx2()));
      }
  };
  scan(dyn.sigma1);
  scan(dyn.sigma2);
  double prev = 0.0;
  for (std::size_t i = 0; i < g.n1(); ++i) {
    const double v = dyn.h(g.x1(i));
    b.h_sup = std::max(b.h_sup, std::abs(v));
    if (v == 0.0 || (i > 0 && v * prev < 0.0)) b.h_vanishes = true;
    if (i + 1 < g.n1()) b.h_d1 = std::max(b.h_d1, std::abs(dyn.h(g.x1(i + 1)) - v) / g.dx1());
    if (i > 0 && i + 1 < g.n1())
      b.h_d2 = std::max(b.h_d2, std::abs(dyn.h(g.x1(i + 1)) - 2 * v + dyn.h(g.x1(i - 1))) /
                                    (g.dx1() * g.dx1()));
    prev = v;
  }
  return b;
}

/// Named coefficient presets.
///
///   grushin_exp          sigma = scale * diag(1, h(x1)),  h(x1) = e^{-1/x1^2}
///   sin_sigma            sigma = scale * diag(sin x1, 1), h(x1) = e^{-1/x1^2}
///   nondegenerate        sigma = scale * diag(1, 1),      h = 1
///   fully_degenerate_x2  sigma = scale * diag(1, 0),      h = 0
inline DynamicsSpec dynamics_preset(const std::string& name, double scale = 1.0, double epsilon = 0.0) {
  DynamicsSpec d;
  d.epsilon = epsilon;
  if (name == "grushin_exp") {
    d.sigma1 = [scale](double, double) { return scale; };
    d.sigma2 = [scale](double a, double) { return scale * flat_exponential(a); };
    d.h = flat_exponential;
  } else if (name == "sin_sigma") {
    d.sigma1 = [scale](double a, double) { return scale * std::sin(a); };
    d.sigma2 = [scale](double, double) { return scale; };
    d.h = flat_exponential;
  } else if (name == "nondegenerate") {
    d.sigma1 = [scale](double, double) { return scale; };
    d.sigma2 = [scale](double, double) { return scale; };
    d.h = [](double) { return 1.0; };
  } else if (name == "fully_degenerate_x2") {
    d.sigma1 = [scale](double, double) { return scale; };
    d.sigma2 = [](double, double) { return 0.0; };
    d.h = [](double) { return 0.0; };
  } else {
    throw ConfigError("unknown dynamics preset '" + name + "'");
  }
  return d;
}

inline const std::vector<std::string>& dynamics_preset_names() {
  static const std::vector<std::string> names = {"grushin_exp", "sin_sigma", "nondegenerate",
                                                 "fully_degenerate_x2"};
  return names;
}

/// Dynamics from expression strings; `h` may only reference x1.
inline DynamicsSpec dynamics_from_expressions(const std::string& sigma1, const std::string& sigma2,
                                              const std::string& h, double epsilon) {
  DynamicsSpec d;
  d.epsilon = epsilon;
  d.sigma1 = compile_expression(sigma1);
  d.sigma2 = compile_expression(sigma2);
  if (h.find("x2") != std::string::npos) throw ConfigError("h may depend on x1 only");
  PlaneFn hf = compile_expression(h);
  d.h = [hf](double a) { return hf(a, 0.0); };
  return d;
}

}  // namespace dmfg
