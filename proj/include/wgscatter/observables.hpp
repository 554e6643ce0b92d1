// Detector-facing quantities derived from a scattered state: flux trace,
// two-time correlation grid, pulse-wise g2, Schmidt spectrum, pair purity.
#pragma once

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "wgscatter/scattering.hpp"

namespace wgscatter {

// Photon flux density sampled at bin midpoints: all ways for the state to yield
// one detection in each bin, remaining times integrated out. One-photon sectors
// use the bin-averaged (Simpson) density so that sum_t flux * dt equals
// sum_m m P_m to machine precision; higher sectors use the midpoint rule.
inline std::vector<double> flux_trace(const ScatteredState& state) {
  const int B = state.grid.n_bins;
  const double dt = state.grid.dt;
  std::vector<double> flux(B, 0.0);
  for (const auto& [key, s] : state.sectors) {
    if (!s.stored) continue;
    if (s.total == 1) {
      const auto& ab = s.boundary[0];
      for (int k = 0; k < B; ++k)
        flux[k] += (std::norm(ab[k]) + 4.0 * std::norm(s.amps[k]) + std::norm(ab[k + 1])) / 6.0;
    } else if (s.total >= 2) {
      const double w = std::pow(dt, s.total - 1);
      state.for_each_record(s, [&](const std::vector<std::vector<int>>& bins, Complex amp) {
        const double p = std::norm(amp) * w;
        for (const auto& per_wg : bins)
          for (int b : per_wg) flux[b] += p;
      });
    }
  }
  if (!state.streamed_flux.empty())
    for (int b = 0; b < B; ++b) flux[b] += state.streamed_flux[b];
  return flux;
}

inline double flux(const ScatteredState& state, double t) {
  return flux_trace(state)[state.grid.bin_of(t)];
}

// G2(t1, t2) over bin midpoints: all ways to pin two distinct detections from
// sectors with two or more photons (channel-blind), remaining times integrated
// out. Symmetric by construction; sectors above max_sector_total are skipped.
inline Eigen::MatrixXd g2_grid(const ScatteredState& state, int max_sector_total = 3) {
  const int B = state.grid.n_bins;
  const double dt = state.grid.dt;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(B, B);
  std::vector<int> merged;
  for (const auto& [key, s] : state.sectors) {
    if (!s.stored || s.total < 2 || s.total > max_sector_total) continue;
    const double w = std::pow(dt, s.total - 2);
    state.for_each_record(s, [&](const std::vector<std::vector<int>>& bins, Complex amp) {
      const double p = std::norm(amp) * w;
      merged.clear();
      for (const auto& per_wg : bins) merged.insert(merged.end(), per_wg.begin(), per_wg.end());
      for (std::size_t q1 = 0; q1 < merged.size(); ++q1)
        for (std::size_t q2 = q1 + 1; q2 < merged.size(); ++q2) {
          g(merged[q1], merged[q2]) += p;
          g(merged[q2], merged[q1]) += p;
        }
    });
  }
  return g;
}

// Pulse-wise second-order coherence sum_m m(m-1) P_m / (sum_m m P_m)^2.
inline double g2_pulsewise(const std::vector<double>& p) {
  double num = 0.0, mean = 0.0;
  for (std::size_t m = 0; m < p.size(); ++m) {
    num += static_cast<double>(m) * (static_cast<double>(m) - 1.0) * p[m];
    mean += static_cast<double>(m) * p[m];
  }
  if (mean <= 0.0) throw std::domain_error("g2_pulsewise: zero mean photon number");
  return num / (mean * mean);
}

struct SchmidtSpectrum {
  std::vector<double> lambdas;   // descending, sum to 1
  double schmidt_number = 0.0;   // participation ratio 1 / sum lambda^2
};

// Schmidt decomposition of the renormalized (1,1) two-photon sector of a
// two-waveguide state.
inline SchmidtSpectrum schmidt(const ScatteredState& state) {
  if (state.n_waveguides != 2) throw std::domain_error("schmidt: needs a two-waveguide state");
  const SectorData* s = state.find({1, 1});
  if (s == nullptr || !s->stored) throw std::domain_error("schmidt: (1,1) sector not available");
  const int B = state.grid.n_bins;
  Eigen::MatrixXcd a(B, B);
  for (int i = 0; i < B; ++i)
    for (int j = 0; j < B; ++j) a(i, j) = s->amps[static_cast<long long>(i) * B + j];
  a *= state.grid.dt;
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(a);
  const auto& sv = svd.singularValues();
  double total = 0.0;
  for (Eigen::Index n = 0; n < sv.size(); ++n) total += sv(n) * sv(n);
  if (total < 1e-300) throw std::domain_error("schmidt: vanishing (1,1) sector");
  SchmidtSpectrum out;
  double inv_part = 0.0;
  for (Eigen::Index n = 0; n < sv.size(); ++n) {
    const double lam = sv(n) * sv(n) / total;
    if (lam > 0.0) out.lambdas.push_back(lam);
    inv_part += lam * lam;
  }
  out.schmidt_number = 1.0 / inv_part;
  return out;
}

// Two-photon fraction of the non-vacuum output, P_2 / (1 - P_0).
inline double purity(const std::vector<double>& p) {
  if (p.size() < 3) throw std::domain_error("purity: need photocounts up to m = 2");
  if (p[0] >= 1.0 - 1e-12) throw std::domain_error("purity: vacuum-only state");
  return p[2] / (1.0 - p[0]);
}

}  // namespace wgscatter
