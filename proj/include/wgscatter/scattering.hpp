// Assembly of m-photon scattering amplitudes and discretized scattered states
// from no-jump propagators and jump operators.
//
// Emission times live on bin midpoints. An amplitude alternates interval
// propagators and jump operators right-to-left from the initial state and is
// closed by no-jump evolution up to max(T_P, last emission) projected on the
// system ground state. Within one waveguide the bin indices are strictly
// increasing (the ordered temporal basis); coincident bins across waveguides
// are applied in ascending waveguide order, which commutes.
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "wgscatter/model.hpp"
#include "wgscatter/parallel.hpp"
#include "wgscatter/propagator.hpp"

namespace wgscatter {

struct EmissionRecord {
  std::vector<double> times;  // nondecreasing
  std::vector<int> channels;  // waveguide index per emission

  void validate(std::size_t n_channels) const {
    if (times.size() != channels.size())
      throw std::invalid_argument("EmissionRecord: times/channels size mismatch");
    for (std::size_t q = 0; q < times.size(); ++q) {
      if (q > 0 && times[q] < times[q - 1])
        throw std::invalid_argument("EmissionRecord: times must be nondecreasing");
      if (channels[q] < 0 || static_cast<std::size_t>(channels[q]) >= n_channels)
        throw std::invalid_argument("EmissionRecord: channel index out of range");
    }
  }
};

namespace detail {

// C(n, k) for small k, exact in 64-bit.
inline long long binom(long long n, int k) {
  if (k < 0 || n < k) return 0;
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Lexicographic rank of a strictly increasing bin tuple within [0, B).
inline long long combo_rank(const std::vector<int>& bins, int B) {
  const int m = static_cast<int>(bins.size());
  long long rank = 0;
  int prev = -1;
  for (int q = 0; q < m; ++q) {
    const int r = m - q;  // elements still to place, including this one
    rank += binom(B - 1 - prev, r) - binom(B - bins[q], r);
    prev = bins[q];
  }
  return rank;
}

// Advance a strictly increasing tuple to its lexicographic successor.
inline bool next_combo(std::vector<int>& bins, int B) {
  const int m = static_cast<int>(bins.size());
  for (int q = m - 1; q >= 0; --q) {
    if (bins[q] < B - m + q) {
      ++bins[q];
      for (int j = q + 1; j < m; ++j) bins[j] = bins[j - 1] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace detail

struct SectorData {
  std::vector<int> counts;        // photons per waveguide
  int total = 0;
  bool stored = false;
  long long size = 0;             // number of basis tuples
  std::vector<Complex> amps;      // stored sectors: flattened amplitudes
  std::vector<std::vector<Complex>> boundary;  // 1-photon sectors: B+1 boundary samples
  double probability = 0.0;       // quadrature norm of the sector
};

class ScatteredState {
 public:
  TimeGrid grid;
  int n_waveguides = 0;
  int n_max_photons = 0;
  int store_max = 0;
  Complex vacuum_amplitude = 0.0;
  std::map<std::vector<int>, SectorData> sectors;
  std::vector<double> streamed_flux;  // per-bin flux from sectors beyond store_max

  const SectorData* find(const std::vector<int>& counts) const {
    auto it = sectors.find(counts);
    return it == sectors.end() ? nullptr : &it->second;
  }

  // Flat index of a stored record given per-waveguide bin tuples.
  long long flat_index(const SectorData& s, const std::vector<std::vector<int>>& bins) const {
    long long idx = 0;
    for (int c = 0; c < n_waveguides; ++c) {
      idx = idx * detail::binom(grid.n_bins, s.counts[c]) + detail::combo_rank(bins[c], grid.n_bins);
    }
    return idx;
  }

  // Visit every stored record of a sector as (bins per waveguide, amplitude).
  template <typename Fn>
  void for_each_record(const SectorData& s, Fn&& fn) const {
    if (!s.stored) return;
    std::vector<std::vector<int>> bins(n_waveguides);
    for (int c = 0; c < n_waveguides; ++c) {
      bins[c].resize(s.counts[c]);
      std::iota(bins[c].begin(), bins[c].end(), 0);
    }
    long long idx = 0;
    while (true) {
      fn(bins, s.amps[idx]);
      ++idx;
      int c = n_waveguides - 1;
      while (c >= 0 && !detail::next_combo(bins[c], grid.n_bins)) {
        std::iota(bins[c].begin(), bins[c].end(), 0);
        --c;
      }
      if (c < 0) break;
    }
  }
};

namespace detail {

inline void require_stationary_ground(const SystemModel& m) {
  const double scale = std::max(1.0, m.decay.cwiseAbs().maxCoeff());
  if (m.h_eff(m.t_pulse + 1.0).row(0).norm() > 1e-12 * scale)
    throw std::invalid_argument("scattering: ground state must be stationary after the pulse");
}

}  // namespace detail

// Single scattering amplitude for one emission record, assembled from interval
// propagator queries. Times are snapped to the nearest bin midpoint.
inline Complex amplitude(const SystemModel& m, const PropagatorGrid& g,
                         const EmissionRecord& record) {
  record.validate(m.n_waveguides());
  detail::require_stationary_ground(m);
  const TimeGrid& grid = g.grid();
  const int P = g.pulse_bins();

  if (record.times.empty()) {
    StateVector v = g.interval(0, P) * m.initial_state;
    return v(0);
  }

  std::vector<std::pair<int, int>> events(record.times.size());
  for (std::size_t q = 0; q < record.times.size(); ++q) {
    const double t = record.times[q];
    if (t < 0.0 || t > grid.t_end())
      throw std::invalid_argument("amplitude: emission time beyond the grid");
    events[q] = {grid.bin_of(t), record.channels[q]};
  }
  std::sort(events.begin(), events.end());

  const int b1 = events.front().first;
  StateVector v = g.half_in(b1) * (g.interval(0, b1) * m.initial_state);
  int prev = b1;
  for (const auto& [b, c] : events) {
    if (b != prev) {
      v = g.half_out(prev) * v;
      v = g.interval(prev + 1, b) * v;
      v = g.half_in(b) * v;
      prev = b;
    }
    v = std::sqrt(m.couplings[c].rate) * (m.couplings[c].op * v);
  }
  if (prev >= P) return v(0);
  v = g.half_out(prev) * v;
  v = g.interval(prev + 1, P) * v;
  return v(0);
}

// Amplitude of the entangled system-waveguide state at time t: final projection
// on the given system basis index after no-jump evolution up to t (snapped to a
// bin boundary). All record times must precede t.
inline Complex entangled_snapshot(const SystemModel& m, const PropagatorGrid& g, double t,
                                  const EmissionRecord& record, Eigen::Index system_index) {
  record.validate(m.n_waveguides());
  const TimeGrid& grid = g.grid();
  if (system_index < 0 || system_index >= m.dim)
    throw std::invalid_argument("entangled_snapshot: system index out of range");
  const int kt = std::min(grid.n_bins, static_cast<int>(std::lround(t / grid.dt)));

  if (record.times.empty()) {
    StateVector v = g.interval(0, kt) * m.initial_state;
    return v(system_index);
  }

  std::vector<std::pair<int, int>> events(record.times.size());
  for (std::size_t q = 0; q < record.times.size(); ++q) {
    events[q] = {grid.bin_of(record.times[q]), record.channels[q]};
    if (record.times[q] >= t)
      throw std::invalid_argument("entangled_snapshot: record time at or beyond t");
  }
  std::sort(events.begin(), events.end());
  if (events.back().first >= kt)
    throw std::invalid_argument("entangled_snapshot: record bin at or beyond t");

  const int b1 = events.front().first;
  StateVector v = g.half_in(b1) * (g.interval(0, b1) * m.initial_state);
  int prev = b1;
  for (const auto& [b, c] : events) {
    if (b != prev) {
      v = g.half_out(prev) * v;
      v = g.interval(prev + 1, b) * v;
      v = g.half_in(b) * v;
      prev = b;
    }
    v = std::sqrt(m.couplings[c].rate) * (m.couplings[c].op * v);
  }
  v = g.half_out(prev) * v;
  v = g.interval(prev + 1, kt) * v;
  return v(system_index);
}

namespace detail {

// Depth-first enumeration of all emission records up to n_max photons, sharing
// propagated prefixes. Records are generated in merged (bin, channel) order with
// channels ascending within a bin, so per-waveguide bins are strictly increasing.
class Assembler {
 public:
  Assembler(const SystemModel& m, const PropagatorGrid& g, ScatteredState& out, int n_threads)
      : m_(m), g_(g), out_(out), n_threads_(n_threads) {
    B_ = g.n_bins();
    M_ = static_cast<int>(m.n_waveguides());
    N_ = out.n_max_photons;
    jumps_.reserve(M_);
    for (const auto& c : m.couplings) jumps_.push_back(std::sqrt(c.rate) * c.op);
    dt_pow_.resize(N_ + 1);
    dt_pow_[0] = 1.0;
    for (int n = 1; n <= N_; ++n) dt_pow_[n] = dt_pow_[n - 1] * g.grid().dt;

    fwd_.resize(B_ + 1);
    fwd_[0] = m.initial_state;
    for (int k = 0; k < B_; ++k) fwd_[k + 1] = g.step(k) * fwd_[k];

    const int P = g.pulse_bins();
    row_bound_.assign(B_ + 1, RowVector());
    RowVector ground = RowVector::Zero(m.dim);
    ground(0) = 1.0;
    for (int k = B_; k >= 0; --k)
      row_bound_[k] = k >= P ? ground : RowVector(row_bound_[k + 1] * g.step(k));
    row_mid_.assign(B_, RowVector());
    for (int b = 0; b < B_; ++b)
      row_mid_[b] = b >= P ? ground : RowVector(row_bound_[b + 1] * g.half_out(b));

    // Sector table over all count vectors with 1 <= total <= N, plus a dense
    // lookup keyed by mixed-radix counts for the enumeration hot path.
    std::vector<int> counts(M_, 0);
    init_sectors(counts, 0, 0);
    long long keys = 1;
    for (int c = 0; c < M_; ++c) keys *= N_ + 1;
    sector_by_key_.assign(keys, nullptr);
    streaming_ = false;
    for (auto& [key, s] : out_.sectors) {
      sector_by_key_[encode(key)] = &s;
      if (!s.stored) streaming_ = true;
    }
  }

  void run() {
    out_.vacuum_amplitude = (row_bound_[0] * fwd_[0])(0);
    if (N_ == 0 || M_ == 0) return;

    sample_boundaries();

    prob_partial_.assign(sector_by_key_.size(), {});
    for (auto& [key, s] : out_.sectors) prob_partial_[encode(key)].assign(B_, 0.0);
    if (streaming_) flux_rows_.assign(B_, std::vector<double>());

    parallel_for_workers(
        B_,
        [&](int, int b1) {
          Walker w(*this, b1);
          w.start();
        },
        n_threads_);

    for (auto& [key, s] : out_.sectors) {
      if (s.total == 1) continue;  // filled by Simpson below
      const auto& parts = prob_partial_[encode(key)];
      s.probability = std::accumulate(parts.begin(), parts.end(), 0.0);
    }
    finish_one_photon();

    if (streaming_) {
      out_.streamed_flux.assign(B_, 0.0);
      for (int b1 = 0; b1 < B_; ++b1)
        if (!flux_rows_[b1].empty())
          for (int b = 0; b < B_; ++b) out_.streamed_flux[b] += flux_rows_[b1][b];
    }
  }

 private:
  friend class Walker;

  long long encode(const std::vector<int>& counts) const {
    long long key = 0;
    for (int c = M_ - 1; c >= 0; --c) key = key * (N_ + 1) + counts[c];
    return key;
  }

  void init_sectors(std::vector<int>& counts, int channel, int total) {
    if (channel == M_) {
      if (total == 0) return;
      SectorData s;
      s.counts = counts;
      s.total = total;
      s.stored = total <= out_.store_max;
      s.size = 1;
      for (int c = 0; c < M_; ++c) s.size *= binom(B_, counts[c]);
      if (s.stored) s.amps.assign(s.size, Complex(0.0));
      out_.sectors.emplace(counts, std::move(s));
      return;
    }
    for (int n = 0; total + n <= N_; ++n) {
      counts[channel] = n;
      init_sectors(counts, channel + 1, total + n);
      counts[channel] = 0;
    }
  }

  // Boundary samples of the one-photon sectors enable composite-Simpson
  // quadrature of P_1; the midpoint rule alone converges too slowly at the
  // bin counts used in practice.
  void sample_boundaries() {
    for (int c = 0; c < M_; ++c) {
      std::vector<int> key(M_, 0);
      key[c] = 1;
      auto it = out_.sectors.find(key);
      if (it == out_.sectors.end() || !it->second.stored) continue;
      auto& bnd = it->second.boundary;
      bnd.assign(1, std::vector<Complex>(B_ + 1));
      for (int k = 0; k <= B_; ++k) bnd[0][k] = (row_bound_[k] * (jumps_[c] * fwd_[k]))(0);
    }
  }

  void finish_one_photon() {
    const double dt = g_.grid().dt;
    for (auto& [key, s] : out_.sectors) {
      if (s.total != 1 || !s.stored) continue;
      const auto& ab = s.boundary[0];
      double p = 0.0;
      for (int k = 0; k < B_; ++k)
        p += (dt / 6.0) * (std::norm(ab[k]) + 4.0 * std::norm(s.amps[k]) + std::norm(ab[k + 1]));
      s.probability = p;
    }
  }

  class Walker {
   public:
    Walker(Assembler& a, int b1)
        : a_(a), b1_(b1), bins_(a.N_), chans_(a.N_), counts_(a.M_, 0) {
      v2_.assign(a.N_, StateVector(a.m_.dim));
      w_.assign(a.N_, StateVector(a.m_.dim));
      vm_.assign(a.N_, StateVector(a.m_.dim));
      tmp_.resize(a.m_.dim);
    }

    void start() {
      StateVector vm = a_.g_.half_in(b1_) * a_.fwd_[b1_];
      place_events(b1_, vm, 0, 0);
    }

   private:
    void place_events(int b, const StateVector& vm, int cmin, int depth) {
      for (int c = cmin; c < a_.M_; ++c) {
        StateVector& v2 = v2_[depth];
        v2.noalias() = a_.jumps_[c] * vm;
        bins_[depth] = b;
        chans_[depth] = c;
        ++counts_[c];
        dispatch(depth + 1, (a_.row_mid_[b] * v2)(0));
        if (depth + 1 < a_.N_) {
          place_events(b, v2, c + 1, depth + 1);
          w_[depth].noalias() = a_.g_.half_out(b) * v2;
          extend(b + 1, depth + 1);
        }
        --counts_[c];
      }
    }

    // w_[depth-1] holds the boundary state entering b_start.
    void extend(int b_start, int depth) {
      StateVector& w = w_[depth - 1];
      for (int b = b_start; b < a_.B_; ++b) {
        vm_[depth - 1].noalias() = a_.g_.half_in(b) * w;
        place_events(b, vm_[depth - 1], 0, depth);
        if (b + 1 < a_.B_) {
          tmp_.noalias() = a_.g_.step(b) * w;
          w.swap(tmp_);
        }
      }
    }

    void dispatch(int n, Complex amp) {
      long long key = 0;
      for (int c = a_.M_ - 1; c >= 0; --c) key = key * (a_.N_ + 1) + counts_[c];
      SectorData& sector = *a_.sector_by_key_[key];
      const double w = std::norm(amp) * a_.dt_pow_[n];
      a_.prob_partial_[key][b1_] += w;
      if (sector.stored) {
        long long idx = 0;
        for (int c = 0; c < a_.M_; ++c) {
          scratch_.clear();
          for (int q = 0; q < n; ++q)
            if (chans_[q] == c) scratch_.push_back(bins_[q]);
          idx = idx * binom(a_.B_, counts_[c]) + combo_rank(scratch_, a_.B_);
        }
        sector.amps[idx] = amp;
      } else {
        auto& row = a_.flux_rows_[b1_];
        if (row.empty()) row.assign(a_.B_, 0.0);
        const double f = w / a_.dt_pow_[1];
        for (int q = 0; q < n; ++q) row[bins_[q]] += f;
      }
    }

    Assembler& a_;
    int b1_;
    std::vector<int> bins_, chans_, counts_, scratch_;
    std::vector<StateVector> v2_, w_, vm_;
    StateVector tmp_;
  };

  const SystemModel& m_;
  const PropagatorGrid& g_;
  ScatteredState& out_;
  int n_threads_;
  int B_ = 0, M_ = 0, N_ = 0;
  bool streaming_ = false;
  std::vector<Operator> jumps_;
  std::vector<double> dt_pow_;
  std::vector<StateVector> fwd_;
  std::vector<RowVector> row_bound_, row_mid_;
  std::vector<SectorData*> sector_by_key_;
  std::vector<std::vector<double>> prob_partial_;
  std::vector<std::vector<double>> flux_rows_;
};

}  // namespace detail

// Evaluate the scattering amplitude on every ordered multi-bin tuple up to
// n_max_photons. Sectors with more than store_max total photons contribute only
// quadrature norms and flux (probability streaming), not stored amplitudes.
inline ScatteredState scattered_state(const SystemModel& m, const PropagatorGrid& g,
                                      int n_max_photons, int store_max = -1, int n_threads = 0) {
  if (n_max_photons < 0) throw std::invalid_argument("scattered_state: negative photon cutoff");
  detail::require_stationary_ground(m);
  ScatteredState out;
  out.grid = g.grid();
  out.n_waveguides = static_cast<int>(m.n_waveguides());
  out.n_max_photons = n_max_photons;
  out.store_max = store_max < 0 ? n_max_photons : std::max(1, std::min(store_max, n_max_photons));
  detail::Assembler assembler(m, g, out, n_threads);
  assembler.run();
  return out;
}

// Photocount distribution by total photon number, P_0 .. P_{n_max}.
inline std::vector<double> photocounts(const ScatteredState& state) {
  std::vector<double> p(state.n_max_photons + 1, 0.0);
  p[0] = std::norm(state.vacuum_amplitude);
  for (const auto& [key, s] : state.sectors) p[s.total] += s.probability;
  return p;
}

// Truncation diagnostic 1 - sum_m P_m.
inline double truncation_deficit(const ScatteredState& state) {
  const auto p = photocounts(state);
  return 1.0 - std::accumulate(p.begin(), p.end(), 0.0);
}

// Two-photon (one per waveguide) amplitude grid of the pair source assembled
// from the Heisenberg-like coefficients: entry (i, j) is the amplitude for the
// waveguide-1 photon in bin i and the waveguide-2 photon in bin j.
inline Eigen::MatrixXcd pair_two_photon_heisenberg(const SystemModel& m,
                                                   const AlphaCoefficients& alpha,
                                                   int substeps = 512) {
  if (!m.pair_source)
    throw std::invalid_argument("pair_two_photon_heisenberg: not a pair-source model");
  const TimeGrid& grid = alpha.grid;
  const int B = grid.n_bins;
  const int d1 = m.n_max + 1;
  const StateVector phi00 = evolve_state(m, fock_state(m.dim, 0), 0.0, m.t_pulse, substeps);
  const StateVector phi11 = evolve_state(m, fock_state(m.dim, d1 + 1), 0.0, m.t_pulse, substeps);
  const Complex c0 = phi00(0);   // <0,0| U_eff(T_P, 0) |0,0>
  const Complex cm1 = phi11(0);  // <0,0| U_eff(T_P, 0) |1,1>
  const double root = std::sqrt(m.couplings[0].rate * m.couplings[1].rate);

  Eigen::MatrixXcd amp(B, B);
  for (int i = 0; i < B; ++i) {
    for (int j = 0; j < B; ++j) {
      if (j < i)  // waveguide-2 photon emitted first
        amp(i, j) = root * alpha.a21_mid(j) * (alpha.a11_mid(i) * c0 + alpha.a12_mid(i) * cm1);
      else        // waveguide-1 photon emitted first (ties break channel-ascending)
        amp(i, j) = root * alpha.a12_mid(i) * (alpha.a22_mid(j) * c0 + alpha.a21_mid(j) * cm1);
    }
  }
  return amp;
}

}  // namespace wgscatter
