// Non-unitary no-jump propagators on a uniform time grid, with interval-product
// queries, plus the Heisenberg-like coefficient functions for the pair source.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "wgscatter/model.hpp"
#include "wgscatter/parallel.hpp"

namespace wgscatter {

struct TimeGrid {
  double dt = 0.0;
  int n_bins = 0;

  TimeGrid() = default;
  TimeGrid(double dt_, int n_bins_) : dt(dt_), n_bins(n_bins_) {
    if (dt <= 0.0) throw std::invalid_argument("TimeGrid: dt must be > 0");
    if (n_bins < 1) throw std::invalid_argument("TimeGrid: need at least one bin");
  }

  double t_end() const { return dt * n_bins; }
  double boundary(int k) const { return dt * k; }
  double midpoint(int k) const { return dt * (k + 0.5); }

  // Bin whose midpoint is nearest to t.
  int bin_of(double t) const {
    int k = static_cast<int>(std::floor(t / dt));
    if (k < 0) k = 0;
    if (k > n_bins - 1) k = n_bins - 1;
    return k;
  }
};

namespace detail {

// One RK4 sweep of dX/dt = -i H(t) X over [t0, t1] for a smooth H.
template <typename Mat, typename HFun>
void rk4_smooth(const HFun& h_at, Mat& x, double t0, double t1, int steps) {
  if (steps < 1) steps = 1;
  const double h = (t1 - t0) / steps;
  Mat k1, k2, k3, k4, tmp;
  for (int s = 0; s < steps; ++s) {
    const double t = t0 + s * h;
    k1 = -kI * (h_at(t) * x);
    tmp = x + 0.5 * h * k1;
    k2 = -kI * (h_at(t + 0.5 * h) * tmp);
    tmp = x + 0.5 * h * k2;
    k3 = -kI * (h_at(t + 0.5 * h) * tmp);
    tmp = x + h * k3;
    k4 = -kI * (h_at(t + h) * tmp);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
}

// Evolution under H_eff(t), split at the drive window edges so that every
// integrated segment sees a smooth Hamiltonian. Piecewise-constant drives use
// exact exponentials per segment, everything else fixed-step RK4.
template <typename Mat>
void propagate(const SystemModel& m, Mat& x, double t0, double t1, int substeps, bool force_rk4) {
  if (t1 < t0) throw std::invalid_argument("propagate: reversed time interval");
  if (t1 == t0) return;
  const bool exact = m.drive.piecewise_constant() && !force_rk4;
  const double span = t1 - t0;
  const double eps = 1e-12 * std::max(span, 1.0);
  double a = t0;
  while (a < t1 - eps) {
    double b = t1;
    for (double e : {0.0, m.t_pulse})
      if (e > a + eps && e < b) b = e;
    const bool inside =
        m.drive.kind != DriveSpec::Kind::none && a > -eps && b <= m.t_pulse + eps;
    auto h_at = [&](double t) -> Operator {
      if (!inside) return m.h0 + m.decay;
      return m.h0 + m.decay + m.drive.raw(t) * m.drive_op;
    };
    if (exact) {
      x = (Operator(-kI * (b - a) * h_at(0.5 * (a + b)))).exp() * x;
    } else {
      const int steps = std::max(1, static_cast<int>(std::lround(substeps * (b - a) / span)));
      rk4_smooth(h_at, x, a, b, steps);
    }
    a = b;
  }
}

}  // namespace detail

// Solve i d/dt |psi> = H_eff(t) |psi> from t0 to t1.
inline StateVector evolve_state(const SystemModel& m, StateVector psi, double t0, double t1,
                                int substeps = 16, bool force_rk4 = false) {
  detail::propagate(m, psi, t0, t1, substeps, force_rk4);
  return psi;
}

inline Operator evolve_operator(const SystemModel& m, Operator u, double t0, double t1,
                                int substeps = 16, bool force_rk4 = false) {
  detail::propagate(m, u, t0, t1, substeps, force_rk4);
  return u;
}

struct GridOptions {
  int substeps = 16;       // RK4 steps per bin for smooth drives
  bool with_tree = true;   // build the interval-product tree eagerly
  bool force_rk4 = false;  // integrate piecewise-constant drives with RK4 too
};

// Per-bin non-unitary step matrices with interval-product queries. Each bin is
// stored as two half-steps so that states and closing rows are available at bin
// midpoints, where the emission times live.
class PropagatorGrid {
 public:
  using Options = GridOptions;

  static PropagatorGrid build(const SystemModel& m, const TimeGrid& grid, GridOptions opt = {}) {
    PropagatorGrid g;
    g.grid_ = grid;
    g.dim_ = m.dim;
    g.pulse_bins_ = static_cast<int>(std::ceil(m.t_pulse / grid.dt - 1e-9));
    if (g.pulse_bins_ < 0) g.pulse_bins_ = 0;
    if (g.pulse_bins_ > grid.n_bins)
      throw std::invalid_argument("PropagatorGrid: grid ends before the drive window does");
    g.snap_error_ = std::abs(g.pulse_bins_ * grid.dt - m.t_pulse);

    const int B = grid.n_bins;
    g.half_in_.resize(B);
    g.half_out_.resize(B);
    g.steps_.resize(B);
    const int half_steps = std::max(1, opt.substeps / 2);

    auto make_bin = [&](int k) {
      const double ta = grid.boundary(k), tm = grid.midpoint(k), tb = grid.boundary(k + 1);
      g.half_in_[k] = evolve_operator(m, identity(m.dim), ta, tm, half_steps, opt.force_rk4);
      g.half_out_[k] = evolve_operator(m, identity(m.dim), tm, tb, half_steps, opt.force_rk4);
      g.steps_[k] = g.half_out_[k] * g.half_in_[k];
    };

    if (m.drive.piecewise_constant() && !opt.force_rk4) {
      // All bins strictly inside (or past) the window share one step matrix; only
      // the bin containing T_P needs its own segmented exponential.
      const int P = g.pulse_bins_;
      const bool straddle = P > 0 && (P * grid.dt - m.t_pulse) > 1e-12 * std::max(1.0, m.t_pulse);
      int first_out = P;
      if (P > 0) make_bin(0);
      if (P < B) make_bin(P);
      if (straddle && P - 1 > 0) make_bin(P - 1);
      for (int k = 1; k < B; ++k) {
        if (k == P || (straddle && k == P - 1)) continue;
        const int src = k < P ? 0 : first_out;
        g.half_in_[k] = g.half_in_[src];
        g.half_out_[k] = g.half_out_[src];
        g.steps_[k] = g.steps_[src];
      }
    } else {
      parallel_for(B, [&](int k) { make_bin(k); });
    }

    if (opt.with_tree) g.build_tree();
    return g;
  }

  const TimeGrid& grid() const { return grid_; }
  Eigen::Index dim() const { return dim_; }
  int n_bins() const { return grid_.n_bins; }
  int pulse_bins() const { return pulse_bins_; }
  double snap_error() const { return snap_error_; }

  const Operator& step(int k) const { return steps_[k]; }
  const Operator& half_in(int k) const { return half_in_[k]; }
  const Operator& half_out(int k) const { return half_out_[k]; }

  // Ordered product of step matrices over bins [k_from, k_to), later bins on the left.
  Operator interval(int k_from, int k_to) const {
    if (k_from > k_to || k_from < 0 || k_to > grid_.n_bins)
      throw std::invalid_argument("interval: invalid bin range");
    if (k_from == k_to) return identity(dim_);
    if (!tree_.empty()) return query(1, 0, leaves_, k_from, k_to);
    Operator u = steps_[k_from];
    for (int k = k_from + 1; k < k_to; ++k) u = steps_[k] * u;
    return u;
  }

 private:
  void build_tree() {
    leaves_ = 1;
    while (leaves_ < grid_.n_bins) leaves_ *= 2;
    tree_.assign(2 * leaves_, Operator());
    const Operator eye = identity(dim_);
    for (int i = 0; i < leaves_; ++i)
      tree_[leaves_ + i] = i < grid_.n_bins ? steps_[i] : eye;
    for (int i = leaves_ - 1; i >= 1; --i) tree_[i] = tree_[2 * i + 1] * tree_[2 * i];
  }

  Operator query(int node, int lo, int hi, int l, int r) const {
    if (l <= lo && hi <= r) return tree_[node];
    const int mid = (lo + hi) / 2;
    if (r <= mid) return query(2 * node, lo, mid, l, r);
    if (l >= mid) return query(2 * node + 1, mid, hi, l, r);
    return query(2 * node + 1, mid, hi, l, r) * query(2 * node, lo, mid, l, r);
  }

  TimeGrid grid_;
  Eigen::Index dim_ = 0;
  int pulse_bins_ = 0;
  int leaves_ = 0;
  double snap_error_ = 0.0;
  std::vector<Operator> steps_, half_in_, half_out_, tree_;
};

inline PropagatorGrid build_grid(const SystemModel& m, const TimeGrid& grid, int substeps = 16) {
  return PropagatorGrid::build(m, grid, {.substeps = substeps});
}

inline Operator interval_propagator(const PropagatorGrid& g, int k_from, int k_to) {
  return g.interval(k_from, k_to);
}

// Coefficients of the Heisenberg-like pair-source operators in the Schroedinger
// basis (a1, a2, a1^dag, a2^dag): row q of coeff(t) expresses the q-th tilde
// operator. alpha_11 = (0,0), alpha_12 = (0,3), alpha_21 = (1,2), alpha_22 = (1,1).
struct AlphaCoefficients {
  TimeGrid grid;
  std::vector<Eigen::Matrix4cd> bound;  // at bin boundaries, k = 0..B
  std::vector<Eigen::Matrix4cd> mid;    // at bin midpoints, k = 0..B-1

  Complex a11_mid(int k) const { return mid[k](0, 0); }
  Complex a12_mid(int k) const { return mid[k](0, 3); }
  Complex a21_mid(int k) const { return mid[k](1, 2); }
  Complex a22_mid(int k) const { return mid[k](1, 1); }
};

inline AlphaCoefficients alpha_coefficients(const SystemModel& m, const TimeGrid& grid,
                                            int substeps = 32) {
  if (!m.pair_source) throw std::invalid_argument("alpha_coefficients: not a pair-source model");
  const double g1 = m.couplings[0].rate, g2 = m.couplings[1].rate;
  auto ode = [&](double t) {
    const Complex ig = kI * m.drive.envelope(t);
    Eigen::Matrix4cd mm = Eigen::Matrix4cd::Zero();
    mm(0, 0) = -0.5 * g1;
    mm(0, 3) = -ig;
    mm(1, 1) = -0.5 * g2;
    mm(1, 2) = -ig;
    mm(2, 1) = ig;
    mm(2, 2) = 0.5 * g1;
    mm(3, 0) = ig;
    mm(3, 3) = 0.5 * g2;
    return mm;
  };
  auto rk4 = [&](Eigen::Matrix4cd c, double t0, double t1, int steps) {
    const double h = (t1 - t0) / steps;
    for (int s = 0; s < steps; ++s) {
      const double t = t0 + s * h;
      const Eigen::Matrix4cd k1 = ode(t) * c;
      const Eigen::Matrix4cd k2 = ode(t + 0.5 * h) * (c + 0.5 * h * k1);
      const Eigen::Matrix4cd k3 = ode(t + 0.5 * h) * (c + 0.5 * h * k2);
      const Eigen::Matrix4cd k4 = ode(t + h) * (c + h * k3);
      c += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return c;
  };

  AlphaCoefficients out;
  out.grid = grid;
  out.bound.resize(grid.n_bins + 1);
  out.mid.resize(grid.n_bins);
  out.bound[0] = Eigen::Matrix4cd::Identity();
  const int half = std::max(1, substeps / 2);
  for (int k = 0; k < grid.n_bins; ++k) {
    out.mid[k] = rk4(out.bound[k], grid.boundary(k), grid.midpoint(k), half);
    out.bound[k + 1] = rk4(out.mid[k], grid.midpoint(k), grid.boundary(k + 1), half);
  }
  return out;
}

}  // namespace wgscatter
