// Closed forms for the square-pulse-driven two-level system; the regression
// baseline for the numerical engine.
#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>

#include "wgscatter/hilbert.hpp"

namespace wgscatter {

struct TlsParams {
  double gamma = 0.0;
  double omega = 0.0;
  double t_pulse = 0.0;
  Complex omega_prime;  // sqrt(Omega^2 - (gamma/4)^2), principal branch
  double area = 0.0;    // A_R = 2 Omega T_P

  static TlsParams make(double gamma, double omega, double t_pulse) {
    TlsParams p;
    p.gamma = gamma;
    p.omega = omega;
    p.t_pulse = t_pulse;
    p.omega_prime = std::sqrt(Complex(omega * omega - gamma * gamma / 16.0, 0.0));
    p.area = 2.0 * omega * t_pulse;
    return p;
  }

  static TlsParams from_area(double gamma, double area, double t_pulse) {
    return make(gamma, area / (2.0 * t_pulse), t_pulse);
  }
};

namespace detail {

// sin(z x)/z, stable as z -> 0.
inline Complex sin_over(Complex z, double x) {
  if (std::abs(z) * std::abs(x) < 1e-6) {
    const Complex zx = z * x;
    return x * (1.0 - zx * zx / 6.0);
  }
  return std::sin(z * x) / z;
}

// <1_S| exp(-i H_eff tau) |0_S> inside the pulse window.
inline Complex rise_factor(const TlsParams& p, double tau) {
  return std::exp(-p.gamma * tau / 4.0) * p.omega * sin_over(p.omega_prime, tau);
}

// <0_S| exp(-i H_eff tau) |0_S> inside the pulse window.
inline Complex wait_factor(const TlsParams& p, double tau) {
  return std::exp(-p.gamma * tau / 4.0) *
         (std::cos(p.omega_prime * tau) + (p.gamma / 4.0) * sin_over(p.omega_prime, tau));
}

}  // namespace detail

// Spontaneous-emission amplitude of an initially excited two-level system,
// sqrt(gamma) e^{-gamma tau / 2} in the rotating frame.
inline Complex spont_amplitude(double gamma, double tau) {
  if (tau < 0.0) throw std::invalid_argument("spont_amplitude: negative emission time");
  return std::sqrt(gamma) * std::exp(-gamma * tau / 2.0);
}

// m-photon scattering amplitude of the ground-start square-pulse TLS at ordered
// emission times. Three branches: all emissions inside the window, the last
// emission after the window, otherwise zero.
inline Complex tls_amplitude(const TlsParams& p, std::span<const double> taus) {
  const std::size_t m = taus.size();
  if (m == 0) return detail::wait_factor(p, p.t_pulse);
  const double root = std::sqrt(p.gamma);
  Complex amp = 1.0;
  if (taus[m - 1] <= p.t_pulse) {
    double prev = 0.0;
    for (double tau : taus) {
      amp *= root * detail::rise_factor(p, tau - prev);
      prev = tau;
    }
    amp *= detail::wait_factor(p, p.t_pulse - prev);
    return amp;
  }
  if (m >= 2 && taus[m - 2] > p.t_pulse) return 0.0;  // at most one emission past T_P
  double prev = 0.0;
  for (std::size_t q = 0; q + 1 < m; ++q) {
    amp *= root * detail::rise_factor(p, taus[q] - prev);
    prev = taus[q];
  }
  amp *= root * detail::rise_factor(p, p.t_pulse - prev);
  amp *= std::exp(-p.gamma * (taus[m - 1] - p.t_pulse) / 2.0);
  return amp;
}

// Exact zero-photon probability of the square-pulse TLS.
inline double tls_p0_exact(const TlsParams& p) {
  return std::norm(detail::wait_factor(p, p.t_pulse));
}

// First-order-in-(gamma T_P) photocount probabilities, m = 0, 1, 2.
inline double tls_pm_closed(const TlsParams& p, int m) {
  const double a = p.area, x = p.gamma * p.t_pulse;
  const double damp = std::exp(-x / 2.0);
  const double sinc = a == 0.0 ? 1.0 : std::sin(a) / a;
  switch (m) {
    case 0: {
      const double half = a == 0.0 ? 0.25 : std::sin(a / 2.0) / (2.0 * a);
      const double c = std::cos(a / 2.0) + x * half;
      return damp * c * c;
    }
    case 1:
      return 0.5 * damp *
             (1.0 - std::cos(a) + 0.5 * x * (1.0 - 0.5 * std::cos(a) - 0.5 * sinc));
    case 2:
      return (x / 8.0) * damp * (2.0 + std::cos(a) - 3.0 * sinc);
    default:
      throw std::invalid_argument("tls_pm_closed: closed forms exist for m <= 2 only");
  }
}

}  // namespace wgscatter
