// Stochastic jump unravelling: waiting-time Monte Carlo over the no-jump
// evolution, reproducing click-time densities and photocount statistics.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "wgscatter/parallel.hpp"
#include "wgscatter/propagator.hpp"
#include "wgscatter/scattering.hpp"

namespace wgscatter {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct TrajectoryResult {
  EmissionRecord record;
  double final_norm_check = 0.0;  // squared norm at the horizon, above the last threshold
  std::uint64_t seed = 0;
};

struct TrajectoryOptions {
  double step_dt = 0.0;          // norm-tracking step; 0 picks a default
  int substeps = 8;              // RK4 steps per tracking step for smooth drives
  double bisect_rel_tol = 1e-10; // jump-time bisection, relative to one step
};

// Precomputes the step matrices of the norm-tracking walk once; sampling is
// then a deterministic function of the seed. Safe to share across threads.
class TrajectoryEngine {
 public:
  TrajectoryEngine(const SystemModel& m, double horizon, TrajectoryOptions opt = {})
      : m_(m), horizon_(horizon), opt_(opt) {
    if (horizon < m.t_pulse)
      throw std::invalid_argument("TrajectoryEngine: horizon shorter than the drive window");
    double step = opt.step_dt;
    if (step <= 0.0) step = std::min(horizon / 400.0, 0.05);
    double edges[2] = {m.t_pulse, horizon};
    double a = 0.0;
    for (double e : edges) {
      if (e <= a + 1e-15) continue;
      const int n = std::max(1, static_cast<int>(std::ceil((e - a) / step - 1e-9)));
      const double h = (e - a) / n;
      for (int i = 0; i < n; ++i) {
        t_.push_back(a + i * h);
        u_.push_back(evolve_operator(m, identity(m.dim), a + i * h, a + (i + 1) * h, opt.substeps));
      }
      a = e;
    }
    t_.push_back(horizon_);
  }

  TrajectoryResult sample(std::uint64_t seed) const {
    std::mt19937_64 rng(splitmix64(seed));
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    TrajectoryResult out;
    out.seed = seed;
    StateVector psi = m_.initial_state;
    double threshold = unif(rng);

    for (std::size_t k = 0; k + 1 < t_.size(); ++k) {
      double t_cur = t_[k];
      const double t_next = t_[k + 1];
      bool fresh = true;  // psi still sits at the segment start
      while (true) {
        StateVector cand = fresh ? StateVector(u_[k] * psi)
                                 : evolve_state(m_, psi, t_cur, t_next, opt_.substeps);
        if (cand.squaredNorm() > threshold) {
          psi = std::move(cand);
          break;
        }
        const double t_jump = locate_jump(psi, t_cur, t_next, threshold);
        psi = evolve_state(m_, psi, t_cur, t_jump, opt_.substeps);
        collapse(psi, t_jump, rng, unif, out.record);
        threshold = unif(rng);
        t_cur = t_jump;
        fresh = false;
        if (t_next - t_cur < 1e-14) break;
      }
    }
    out.final_norm_check = psi.squaredNorm();
    return out;
  }

  double horizon() const { return horizon_; }

 private:
  // The squared norm is nonincreasing under H_eff, so the crossing brackets.
  double locate_jump(const StateVector& psi0, double ta, double tb, double threshold) const {
    double lo = ta, hi = tb;
    const double tol = opt_.bisect_rel_tol * (tb - ta);
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      const StateVector probe = evolve_state(m_, psi0, ta, mid, opt_.substeps);
      if (probe.squaredNorm() > threshold)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  }

  void collapse(StateVector& psi, double t_jump, std::mt19937_64& rng,
                std::uniform_real_distribution<double>& unif, EmissionRecord& record) const {
    const std::size_t nc = m_.couplings.size();
    std::vector<StateVector> jumped(nc);
    std::vector<double> weight(nc);
    double total = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
      jumped[c] = m_.couplings[c].op * psi;
      weight[c] = m_.couplings[c].rate * jumped[c].squaredNorm();
      total += weight[c];
    }
    std::size_t pick = nc - 1;
    double u = unif(rng) * total;
    for (std::size_t c = 0; c < nc; ++c) {
      if (u < weight[c]) {
        pick = c;
        break;
      }
      u -= weight[c];
    }
    psi = jumped[pick] / jumped[pick].norm();
    record.times.push_back(t_jump);
    record.channels.push_back(static_cast<int>(pick));
  }

  SystemModel m_;
  double horizon_;
  TrajectoryOptions opt_;
  std::vector<double> t_;
  std::vector<Operator> u_;
};

inline TrajectoryResult sample_trajectory(const SystemModel& m, double horizon, std::uint64_t seed,
                                          TrajectoryOptions opt = {}) {
  return TrajectoryEngine(m, horizon, opt).sample(seed);
}

struct PhotocountEstimate {
  std::vector<double> p;            // empirical P_m, overflow lumped into the last entry
  std::vector<double> se;           // binomial standard errors
  std::vector<double> mean_channel_counts;
  long long n_traj = 0;
  bool channel_counts_equal = true; // every trajectory clicked equally in all channels
};

inline PhotocountEstimate estimate_photocounts(const SystemModel& m, double horizon,
                                               long long n_traj, std::uint64_t seed,
                                               int max_count = 8, TrajectoryOptions opt = {},
                                               int n_threads = 0) {
  if (n_traj < 1) throw std::invalid_argument("estimate_photocounts: need at least one trajectory");
  const TrajectoryEngine engine(m, horizon, opt);
  const int workers = resolve_threads(n_threads);
  const std::size_t nc = m.n_waveguides();

  std::vector<std::vector<long long>> counts(workers, std::vector<long long>(max_count + 1, 0));
  std::vector<std::vector<long long>> channel_sum(workers, std::vector<long long>(nc, 0));
  std::vector<char> equal_flag(workers, 1);

  parallel_for_workers(
      static_cast<int>(n_traj),
      [&](int w, int i) {
        const auto traj = engine.sample(splitmix64(seed + 0x2545F4914F6CDD1Dull * (i + 1)));
        const int n = static_cast<int>(traj.record.times.size());
        ++counts[w][std::min(n, max_count)];
        std::vector<long long> per(nc, 0);
        for (int c : traj.record.channels) ++per[c];
        for (std::size_t c = 0; c < nc; ++c) channel_sum[w][c] += per[c];
        for (std::size_t c = 1; c < nc; ++c)
          if (per[c] != per[0]) equal_flag[w] = 0;
      },
      n_threads);

  PhotocountEstimate out;
  out.n_traj = n_traj;
  out.p.assign(max_count + 1, 0.0);
  out.se.assign(max_count + 1, 0.0);
  out.mean_channel_counts.assign(nc, 0.0);
  for (int w = 0; w < workers; ++w) {
    for (int k = 0; k <= max_count; ++k) out.p[k] += static_cast<double>(counts[w][k]);
    for (std::size_t c = 0; c < nc; ++c)
      out.mean_channel_counts[c] += static_cast<double>(channel_sum[w][c]);
    if (!equal_flag[w]) out.channel_counts_equal = false;
  }
  const double n = static_cast<double>(n_traj);
  for (int k = 0; k <= max_count; ++k) {
    out.p[k] /= n;
    out.se[k] = std::sqrt(std::max(0.0, out.p[k] * (1.0 - out.p[k]) / n));
  }
  for (std::size_t c = 0; c < nc; ++c) out.mean_channel_counts[c] /= n;
  return out;
}

}  // namespace wgscatter
