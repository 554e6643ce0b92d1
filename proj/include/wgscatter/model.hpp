// System models: static Hamiltonian, windowed drive, waveguide couplings, H_eff(t).
#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "wgscatter/hilbert.hpp"

namespace wgscatter {

struct WaveguideCoupling {
  Operator op;  // system operator a_i coupled to waveguide i
  double rate;  // gamma_i
};

// Scalar drive envelope f(t), identically zero outside [0, t_pulse].
struct DriveSpec {
  enum class Kind { none, square, gaussian, sampled };
  Kind kind = Kind::none;
  double t_pulse = 0.0;
  // gaussian parameters (envelope g0 * exp(-(t-t0)^2 / 2 sigma^2))
  double g0 = 0.0, t0 = 0.0, sigma = 1.0;
  // sampled envelope, piecewise-linear between (time, value) knots
  std::vector<std::pair<double, double>> samples;

  bool piecewise_constant() const { return kind == Kind::none || kind == Kind::square; }

  // Envelope without the window test; integrators use this inside segments that
  // are known to lie within the window, so stage evaluations at a window edge
  // do not see the discontinuity.
  double raw(double t) const {
    switch (kind) {
      case Kind::none: return 0.0;
      case Kind::square: return 1.0;
      case Kind::gaussian: {
        const double u = (t - t0) / sigma;
        return g0 * std::exp(-0.5 * u * u);
      }
      case Kind::sampled: {
        if (samples.empty()) return 0.0;
        if (t <= samples.front().first) return samples.front().second;
        if (t >= samples.back().first) return samples.back().second;
        for (std::size_t i = 1; i < samples.size(); ++i) {
          if (t <= samples[i].first) {
            const auto& [ta, va] = samples[i - 1];
            const auto& [tb, vb] = samples[i];
            const double w = (t - ta) / (tb - ta);
            return va + w * (vb - va);
          }
        }
        return 0.0;
      }
    }
    return 0.0;
  }

  double envelope(double t) const {
    if (t < 0.0 || t >= t_pulse) return 0.0;
    return raw(t);
  }
};

struct SystemModel {
  Eigen::Index dim = 0;
  Operator h0;              // static part, rotating frame
  Operator drive_op;        // Hermitian generator, scaled by the envelope
  DriveSpec drive;
  std::vector<WaveguideCoupling> couplings;
  StateVector initial_state;
  double t_pulse = 0.0;
  bool pair_source = false;
  int n_max = 0;            // Fock cutoff per cavity (pair source only)
  Operator decay;           // -i/2 sum_i gamma_i a_i^dag a_i, cached

  Operator drive_term(double t) const { return drive.envelope(t) * drive_op; }

  Operator h_eff(double t) const { return h0 + drive.envelope(t) * drive_op + decay; }

  std::size_t n_waveguides() const { return couplings.size(); }

  void finalize() {
    decay = Operator::Zero(dim, dim);
    for (const auto& c : couplings) decay -= 0.5 * kI * c.rate * (c.op.adjoint() * c.op);
  }
};

inline Operator h_eff(const SystemModel& m, double t) { return m.h_eff(t); }

enum class TlsInitial { ground, excited };

// Two-level system with resonant square-pulse drive i*Omega*(sigma^dag - sigma) on [0, T_P].
inline SystemModel build_tls(double gamma, double omega_rabi, double t_pulse,
                             TlsInitial initial = TlsInitial::ground) {
  if (gamma < 0.0) throw std::invalid_argument("build_tls: negative decay rate");
  if (t_pulse < 0.0) throw std::invalid_argument("build_tls: negative pulse length");
  SystemModel m;
  m.dim = 2;
  const Operator sigma = destroy(1);
  m.h0 = Operator::Zero(2, 2);
  m.drive_op = kI * omega_rabi * (sigma.adjoint() - sigma);
  m.drive.kind = (omega_rabi == 0.0 || t_pulse == 0.0) ? DriveSpec::Kind::none : DriveSpec::Kind::square;
  m.drive.t_pulse = t_pulse;
  m.t_pulse = t_pulse;
  m.couplings.push_back({sigma, gamma});
  m.initial_state = fock_state(2, initial == TlsInitial::excited ? 1 : 0);
  m.finalize();
  return m;
}

// Two nonlinearly coupled cavities pumped by a Gaussian pulse g(t)*(a1 a2 + a1^dag a2^dag),
// each cavity coupled to its own waveguide. Window ends at T_P = t0 + window_sigmas * sigma.
inline SystemModel build_pair_source(double g0, double t0, double sigma, double gamma1,
                                     double gamma2, int n_max, double window_sigmas = 5.0) {
  if (n_max < 1) throw std::invalid_argument("build_pair_source: cutoff must be >= 1");
  if (sigma <= 0.0) throw std::invalid_argument("build_pair_source: pulse width must be > 0");
  if (gamma1 < 0.0 || gamma2 < 0.0) throw std::invalid_argument("build_pair_source: negative decay rate");
  SystemModel m;
  const Operator a = destroy(n_max);
  const Operator one = identity(n_max + 1);
  const Operator a1 = tensor(a, one);
  const Operator a2 = tensor(one, a);
  m.dim = a1.rows();
  m.h0 = Operator::Zero(m.dim, m.dim);
  m.drive_op = a1 * a2 + a1.adjoint() * a2.adjoint();
  m.drive.kind = DriveSpec::Kind::gaussian;
  m.drive.g0 = g0;
  m.drive.t0 = t0;
  m.drive.sigma = sigma;
  m.drive.t_pulse = t0 + window_sigmas * sigma;
  m.t_pulse = m.drive.t_pulse;
  m.couplings.push_back({a1, gamma1});
  m.couplings.push_back({a2, gamma2});
  m.initial_state = fock_state(m.dim, 0);
  m.pair_source = true;
  m.n_max = n_max;
  m.finalize();
  return m;
}

}  // namespace wgscatter
