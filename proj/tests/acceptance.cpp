// Acceptance suite: one pass/fail line per criterion, exit code = failures.
// All tolerances are fixed here; run with a list of criterion numbers to
// restrict the set (e.g. ./acceptance 1 5 9).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "wgscatter/analytic_tls.hpp"
#include "wgscatter/experiments.hpp"
#include "wgscatter/observables.hpp"
#include "wgscatter/scattering.hpp"
#include "wgscatter/trajectories.hpp"

using namespace wgscatter;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << (detail.tellp() > 0 ? "; " : "") << "FAILED " << what;
    }
  }
  void note(const std::string& what) {
    detail << (detail.tellp() > 0 ? "; " : "") << what;
  }
};

std::string fmtv(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------- criterion 1
Outcome spontaneous_emission_exactness() {
  Outcome out;
  const double gamma = 1.0;
  const auto m = build_tls(gamma, 0.0, 0.0, TlsInitial::excited);
  const TimeGrid grid(20.0 / 800.0, 800);
  const auto g = PropagatorGrid::build(m, grid);
  const auto state = scattered_state(m, g, 1);

  const SectorData* s1 = state.find({1});
  double worst = 0.0;
  for (int k = 0; k < grid.n_bins; ++k)
    worst = std::max(worst, std::abs(s1->amps[k] - spont_amplitude(gamma, grid.midpoint(k))));
  out.require(worst < 1e-8, "pointwise amplitude, worst " + fmtv(worst));

  const double p1 = photocounts(state)[1];
  out.require(std::abs(p1 - 1.0) < 1e-5, "P1 = " + fmtv(p1));
  out.note("max|amp err| " + fmtv(worst) + ", |P1-1| " + fmtv(std::abs(p1 - 1.0)));
  return out;
}

// ---------------------------------------------------------------- criterion 2
Outcome closed_form_equivalence() {
  Outcome out;
  const double gamma = 1.0, t_pulse = 0.2;
  const TimeGrid grid(t_pulse / 7.0, 400);  // T_P on the grid, horizon 11.4/gamma
  double worst = 0.0;
  for (double mult : {0.5, 1.0, 2.0, 3.0, 4.0, 6.0}) {
    const double area = mult * M_PI;
    const auto params = TlsParams::from_area(gamma, area, t_pulse);
    const auto m = build_tls(gamma, params.omega, t_pulse, TlsInitial::ground);
    const auto g = PropagatorGrid::build(m, grid);  // exponential steps
    const auto state = scattered_state(m, g, 2);

    const SectorData* s1 = state.find({1});
    for (int k = 0; k < grid.n_bins; ++k) {
      const std::array<double, 1> taus{grid.midpoint(k)};
      worst = std::max(worst, std::abs(s1->amps[k] - tls_amplitude(params, taus)));
    }
    const SectorData* s2 = state.find({2});
    state.for_each_record(*s2, [&](const std::vector<std::vector<int>>& bins, Complex amp) {
      const std::array<double, 2> taus{grid.midpoint(bins[0][0]), grid.midpoint(bins[0][1])};
      worst = std::max(worst, std::abs(amp - tls_amplitude(params, taus)));
    });
  }
  out.require(worst < 1e-8, "pointwise amplitudes, worst " + fmtv(worst));
  out.note("max deviation over 6 areas " + fmtv(worst));
  return out;
}

// ---------------------------------------------------------------- criterion 3
Outcome paper_table_reproduction() {
  Outcome out;
  const double gamma = 1.0, t_pulse = 0.02, x = gamma * t_pulse;
  const TimeGrid grid(t_pulse / 16.0, 9600);  // horizon 12/gamma

  auto run = [&](double area) {
    const auto params = TlsParams::from_area(gamma, area, t_pulse);
    const auto m = build_tls(gamma, params.omega, t_pulse, TlsInitial::ground);
    const auto g = PropagatorGrid::build(m, grid);
    return photocounts(scattered_state(m, g, 2, 1));
  };

  const auto p_2pi = run(2.0 * M_PI);
  const double ratio = p_2pi[2] / p_2pi[1];
  out.require(std::abs(ratio - 3.0) < 0.02 * 3.0, "P2/P1 at 2pi = " + fmtv(ratio));

  const auto p_pi = run(M_PI);
  const double lifted = p_pi[1] * std::exp(x / 2.0);
  const double expect1 = 1.0 + 3.0 / 8.0 * x;
  out.require(std::abs(lifted - expect1) < 0.01 * expect1,
              "P1 e^{x/2} at pi = " + fmtv(lifted));

  const double g2 = g2_pulsewise(p_2pi);
  const double expect2 = std::exp(x / 2.0) / x;
  out.require(std::abs(g2 - expect2) < 0.10 * expect2, "g2[0] at 2pi = " + fmtv(g2));
  out.note("P2/P1 " + fmtv(ratio) + ", P1 e^{x/2} " + fmtv(lifted) + ", g2 " + fmtv(g2) +
           " vs " + fmtv(expect2));
  return out;
}

// ---------------------------------------------------------------- criterion 4
Outcome figure_area_sweep() {
  Outcome out;
  const double gamma = 1.0, t_pulse = 0.2;
  const TimeGrid grid(t_pulse / 16.0, 960);  // horizon 12/gamma

  std::vector<double> areas, p0n, p1n, p2n;
  for (int k = 1; k <= 24; ++k) areas.push_back(k * M_PI / 4.0);

  double worst_p0 = 0.0, worst_rel1 = 0.0, worst_rel2 = 0.0;
  for (double area : areas) {
    const auto params = TlsParams::from_area(gamma, area, t_pulse);
    const auto m = build_tls(gamma, params.omega, t_pulse, TlsInitial::ground);
    const auto g = PropagatorGrid::build(m, grid);
    const auto p = photocounts(scattered_state(m, g, 2, 1));
    p0n.push_back(p[0]);
    p1n.push_back(p[1]);
    p2n.push_back(p[2]);

    worst_p0 = std::max(worst_p0, std::abs(p[0] - tls_p0_exact(params)));
    worst_rel1 =
        std::max(worst_rel1, std::abs(p[1] - tls_pm_closed(params, 1)) / tls_pm_closed(params, 1));
    worst_rel2 =
        std::max(worst_rel2, std::abs(p[2] - tls_pm_closed(params, 2)) / tls_pm_closed(params, 2));
  }
  const double rel_tol = 3.0 * gamma * t_pulse;
  out.require(worst_p0 < 1e-6, "P0 vs exact closed form, worst " + fmtv(worst_p0));
  out.require(worst_rel1 < rel_tol, "P1 vs first-order form, worst rel " + fmtv(worst_rel1));
  out.require(worst_rel2 < rel_tol, "P2 vs first-order form, worst rel " + fmtv(worst_rel2));

  // P2 > P1 in a neighborhood of every even-pi area (areas are k pi/4)
  for (int even : {8, 16, 24}) {
    const int i = even - 1;
    out.require(p2n[i] > p1n[i], "P2 > P1 at area " + fmtv(areas[i]));
  }
  // P1 peaks near odd-pi areas
  for (int odd : {4, 12, 20}) {
    const int i = odd - 1;
    out.require(p1n[i] > p1n[i - 1] && p1n[i] > p1n[i + 1],
                "P1 peak near area " + fmtv(areas[i]));
  }
  out.note("|P0 err| " + fmtv(worst_p0) + ", rel P1 " + fmtv(worst_rel1) + ", rel P2 " +
           fmtv(worst_rel2));
  return out;
}

// ---------------------------------------------------------------- criterion 5
Outcome antibunching() {
  Outcome out;
  const double gamma = 1.0, t_pulse = 0.2;
  const auto params = TlsParams::from_area(gamma, 2.0 * M_PI, t_pulse);
  const auto m = build_tls(gamma, params.omega, t_pulse, TlsInitial::ground);
  const TimeGrid grid(0.05, 240);
  const auto g = PropagatorGrid::build(m, grid);
  const auto state = scattered_state(m, g, 3);

  const Eigen::MatrixXd g2 = g2_grid(state, 3);
  const double peak = g2.maxCoeff();
  const double diag = g2.diagonal().cwiseAbs().maxCoeff();
  out.require(peak > 0.0, "G2 grid is nonzero");
  out.require(diag <= 1e-10 * peak, "G2 diagonal, max " + fmtv(diag));
  out.require((g2 - g2.transpose()).cwiseAbs().maxCoeff() == 0.0, "G2 symmetry");

  // the coincident two-photon amplitudes themselves vanish
  const SectorData* s2 = state.find({2});
  double amp2 = 0.0;
  for (const auto& a : s2->amps) amp2 = std::max(amp2, std::abs(a));
  double coincident = 0.0;
  for (int k = 0; k < grid.n_bins; k += 7) {
    const double t = grid.midpoint(k);
    coincident = std::max(coincident, std::abs(amplitude(m, g, {{t, t}, {0, 0}})));
  }
  out.require(coincident <= 1e-10 * amp2, "coincident amplitudes, max " + fmtv(coincident));
  out.note("diag/peak " + fmtv(peak > 0 ? diag / peak : 0.0) + ", coincident " +
           fmtv(coincident));
  return out;
}

// ---------------------------------------------------------------- criterion 6
Outcome normalization() {
  Outcome out;
  const double gamma = 1.0, t_pulse = 0.2;
  const auto params = TlsParams::from_area(gamma, M_PI, t_pulse);
  const auto m = build_tls(gamma, params.omega, t_pulse, TlsInitial::ground);

  // fine grid for the m <= 3 mass
  {
    const TimeGrid grid(0.025, 560);  // horizon 14/gamma
    const auto g = PropagatorGrid::build(m, grid);
    const auto p = photocounts(scattered_state(m, g, 3, 2));
    const double total = p[0] + p[1] + p[2] + p[3];
    out.require(total >= 0.999, "sum_{m<=3} P_m = " + fmtv(total));
    out.note("sum_{m<=3} " + fmtv(total));
  }
  // coarser grid for the N_max = 3 -> 4 deficit comparison
  {
    const TimeGrid grid(0.05, 280);
    const auto g = PropagatorGrid::build(m, grid);
    const auto p = photocounts(scattered_state(m, g, 4, 2));
    const double deficit3 = 1.0 - (p[0] + p[1] + p[2] + p[3]);
    const double deficit4 = deficit3 - p[4];
    out.require(p[4] > 0.0, "P4 > 0");
    out.require(deficit4 < deficit3, "deficit decreases with N_max");
    out.note("deficit3 " + fmtv(deficit3) + " -> deficit4 " + fmtv(deficit4));
  }
  return out;
}

// ---------------------------------------------------------------- criterion 7
Outcome dt_convergence() {
  Outcome out;
  const auto m = build_tls(1.0, 6.0, 0.5, TlsInitial::ground);
  const double t_end = 2.0;
  double prev = -1.0;
  std::vector<double> ratios;
  for (int b = 50; b <= 400; b *= 2) {
    const TimeGrid grid(t_end / b, b);
    const auto coarse = PropagatorGrid::build(m, grid, {.substeps = 2, .force_rk4 = true});
    const auto fine = PropagatorGrid::build(m, grid, {.substeps = 8, .force_rk4 = true});
    const double err = (coarse.interval(0, b) - fine.interval(0, b)).cwiseAbs().maxCoeff();
    if (prev > 0.0) ratios.push_back(prev / err);
    prev = err;
  }
  std::string all;
  for (double r : ratios) all += fmtv(r) + " ";
  for (double r : ratios) out.require(r >= 2.0, "halving ratio " + fmtv(r));
  out.note("ratios " + all);
  return out;
}

// ---------------------------------------------------------------- criterion 8
Outcome trajectory_equivalence() {
  Outcome out;
  const double gamma = 1.0, t_pulse = 0.2;
  const auto params = TlsParams::from_area(gamma, M_PI, t_pulse);
  const auto m = build_tls(gamma, params.omega, t_pulse, TlsInitial::ground);

  // quadrature reference
  const TimeGrid grid(0.005, 2400);
  const auto g = PropagatorGrid::build(m, grid);
  const auto p_ref = photocounts(scattered_state(m, g, 2, 1));
  const std::vector<double> expected = {p_ref[0], p_ref[1], p_ref[2],
                                        std::max(0.0, 1.0 - p_ref[0] - p_ref[1] - p_ref[2])};

  // 2e5 trajectories, chi-square on {0, 1, 2, 3+}
  const long long n = 200000;
  const TrajectoryEngine engine(m, 14.0);
  std::vector<long long> observed(4, 0);
  for (long long i = 0; i < n; ++i) {
    const auto traj = engine.sample(splitmix64(91 + 0x2545F4914F6CDD1Dull * (i + 1)));
    observed[std::min<std::size_t>(traj.record.times.size(), 3)]++;
  }
  const double chi = chi_square_statistic(observed, expected, n);
  out.require(chi < 11.345, "chi-square = " + fmtv(chi));  // dof 3, alpha 0.01

  // spontaneous-emission click density
  const auto spont = build_tls(gamma, 0.0, 0.0, TlsInitial::excited);
  const double horizon = 14.0;
  const TrajectoryEngine spont_engine(spont, horizon);
  const int ns = 100000;
  std::vector<double> clicks;
  clicks.reserve(ns);
  for (int i = 0; i < ns; ++i) {
    const auto traj = spont_engine.sample(splitmix64(7 + i));
    if (!traj.record.times.empty()) clicks.push_back(traj.record.times[0]);
  }
  std::sort(clicks.begin(), clicks.end());
  const double trunc = 1.0 - std::exp(-gamma * horizon);
  double d = 0.0;
  for (std::size_t i = 0; i < clicks.size(); ++i) {
    const double f = (1.0 - std::exp(-gamma * clicks[i])) / trunc;
    d = std::max(d, std::abs(f - (i + 1.0) / clicks.size()));
    d = std::max(d, std::abs(f - static_cast<double>(i) / clicks.size()));
  }
  const double nr = std::sqrt(static_cast<double>(clicks.size()));
  const double ks_threshold = 1.628 / (nr + 0.12 + 0.11 / nr);  // alpha = 0.01
  out.require(d < ks_threshold, "KS distance = " + fmtv(d) + " vs " + fmtv(ks_threshold));
  out.note("chi2 " + fmtv(chi) + " (crit 11.3), KS " + fmtv(d) + " (crit " +
           fmtv(ks_threshold) + ")");
  return out;
}

// ---------------------------------------------------------------- criterion 9
Outcome pair_source() {
  Outcome out;
  const double gamma = 1.0, g0 = 1.0;

  // (a) only equal-count sectors are populated
  {
    const auto m = build_pair_source(g0, 1.0, 0.2, gamma, gamma, 3);
    const TimeGrid grid(0.1, 60);
    const auto g = PropagatorGrid::build(m, grid, {.substeps = 8, .with_tree = false});
    const auto state = scattered_state(m, g, 3);
    bool clean = true;
    for (const auto& [key, s] : state.sectors) {
      if (key[0] == key[1]) continue;
      for (const Complex& a : s.amps)
        if (std::abs(a) != 0.0) clean = false;
      if (s.probability != 0.0) clean = false;
    }
    out.require(clean, "(a) unequal-count sectors identically zero");
  }

  // (b) P0 -> 1 as sigma -> 0
  {
    const auto m = build_pair_source(g0, 0.05, 0.01, gamma, gamma, 6);
    const StateVector fin = evolve_state(m, m.initial_state, 0.0, m.t_pulse, 4000);
    const double p0 = std::norm(fin(0));
    out.require(p0 >= 0.999, "(b) P0 at sigma 0.01 = " + fmtv(p0));
    out.note("(b) P0 " + fmtv(p0));
  }

  // (c) + (d): purity decreasing, Schmidt number >= 1 and nondecreasing
  {
    const std::vector<double> sigmas = {0.1, 0.2, 0.3, 0.4, 0.5};
    const std::vector<double> g0s = {0.6, 1.0, 1.4};
    std::vector<std::vector<double>> schmidt_k(g0s.size());
    std::vector<double> purity_row;
    for (std::size_t gi = 0; gi < g0s.size(); ++gi) {
      for (double sigma : sigmas) {
        const auto m = build_pair_source(g0s[gi], 5.0 * sigma, sigma, gamma, gamma, 6);
        const int bins = static_cast<int>(std::ceil((m.t_pulse + 14.0) / 0.05 - 1e-9));
        const TimeGrid grid(0.05, bins);
        const auto g = PropagatorGrid::build(m, grid, {.substeps = 6, .with_tree = false});
        const auto state = scattered_state(m, g, 2);
        const auto p = photocounts(state);
        const auto spec = schmidt(state);
        schmidt_k[gi].push_back(spec.schmidt_number);
        out.require(spec.schmidt_number >= 1.0 - 1e-9,
                    "(d) K >= 1 at sigma " + fmtv(sigma) + ", g0 " + fmtv(g0s[gi]));
        if (g0s[gi] == 1.0) purity_row.push_back(purity(p));
      }
    }
    for (std::size_t i = 1; i < purity_row.size(); ++i)
      out.require(purity_row[i] < purity_row[i - 1], "(c) purity strictly decreasing");
    for (const auto& row : schmidt_k)
      for (std::size_t i = 1; i < row.size(); ++i)
        out.require(row[i] >= row[i - 1], "(d) K nondecreasing in sigma");
    for (std::size_t i = 0; i < sigmas.size(); ++i)
      for (std::size_t gi = 1; gi < g0s.size(); ++gi)
        out.require(schmidt_k[gi][i] >= schmidt_k[gi - 1][i], "(d) K nondecreasing in g0");
    std::string ks;
    for (double k : schmidt_k[1]) ks += fmtv(k) + " ";
    std::string ps;
    for (double p : purity_row) ps += fmtv(p) + " ";
    out.note("(c) purity " + ps + "(d) K(g0=1) " + ks);
  }

  // (e) c_p-ladder truncation: n_max 6 -> 10 changes P0 and P2 by < 1e-6.
  // The ladder converges geometrically, but at g0 = gamma and sigma = 0.5/gamma
  // the pump integral is ~1.25 and the 6 -> 10 movement sits near 5e-4; the
  // stated tolerance is only reached four rungs higher, reported alongside.
  {
    const double sigma = 0.5, t0 = 2.5;
    auto heis_p = [&](int n_max) {
      const auto m = build_pair_source(g0, t0, sigma, gamma, gamma, n_max);
      const int bins = static_cast<int>(std::ceil((m.t_pulse + 14.0) / 0.05 - 1e-9));
      const TimeGrid grid(0.05, bins);
      const auto alpha = alpha_coefficients(m, grid, 64);
      const Eigen::MatrixXcd amp = pair_two_photon_heisenberg(m, alpha, 20000);
      const StateVector fin = evolve_state(m, m.initial_state, 0.0, m.t_pulse, 20000);
      double p2 = 0.0;
      for (int i = 0; i < bins; ++i)
        for (int j = 0; j < bins; ++j) p2 += std::norm(amp(i, j)) * grid.dt * grid.dt;
      return std::pair<double, double>(std::norm(fin(0)), p2);
    };
    const auto [p0_6, p2_6] = heis_p(6);
    const auto [p0_10, p2_10] = heis_p(10);
    const auto [p0_14, p2_14] = heis_p(14);
    out.require(std::abs(p0_6 - p0_10) < 1e-6, "(e) dP0(6->10) = " + fmtv(std::abs(p0_6 - p0_10)));
    out.require(std::abs(p2_6 - p2_10) < 1e-6, "(e) dP2(6->10) = " + fmtv(std::abs(p2_6 - p2_10)));
    out.note("(e) 6->10 dP0 " + fmtv(std::abs(p0_6 - p0_10)) + " dP2 " +
             fmtv(std::abs(p2_6 - p2_10)) + "; 10->14 dP0 " + fmtv(std::abs(p0_10 - p0_14)) +
             " dP2 " + fmtv(std::abs(p2_10 - p2_14)));
  }

  // (f) Heisenberg-like vs propagator assembly of the two-photon amplitude
  {
    const auto m = build_pair_source(g0, 0.9, 0.15, gamma, gamma, 7, 8.0);
    const TimeGrid grid(0.06, 120);
    const auto g = PropagatorGrid::build(m, grid, {.substeps = 32, .with_tree = false});
    const auto state = scattered_state(m, g, 2);
    const SectorData* s11 = state.find({1, 1});
    const auto alpha = alpha_coefficients(m, grid, 64);
    const Eigen::MatrixXcd heis = pair_two_photon_heisenberg(m, alpha, 8192);
    double worst = 0.0;
    for (int i = 0; i < grid.n_bins; ++i)
      for (int j = 0; j < grid.n_bins; ++j)
        worst = std::max(worst, std::abs(s11->amps[static_cast<long long>(i) * grid.n_bins + j] -
                                         heis(i, j)));
    out.require(worst < 1e-8, "(f) assembly mismatch " + fmtv(worst));
    out.note("(f) worst " + fmtv(worst));
  }
  return out;
}

// --------------------------------------------------------------- criterion 10
Outcome flux_identity() {
  Outcome out;
  auto check = [&](const std::string& name, const ScatteredState& state) {
    const auto f = flux_trace(state);
    const auto p = photocounts(state);
    const double lhs = std::accumulate(f.begin(), f.end(), 0.0) * state.grid.dt;
    double rhs = 0.0;
    for (std::size_t mth = 0; mth < p.size(); ++mth) rhs += mth * p[mth];
    out.require(std::abs(lhs - rhs) < 1e-6, name + ": |flux - mean n| = " +
                                                fmtv(std::abs(lhs - rhs)));
  };

  const auto spont = build_tls(1.0, 0.0, 0.0, TlsInitial::excited);
  const TimeGrid sgrid(0.04, 400);
  check("spontaneous emission",
        scattered_state(spont, PropagatorGrid::build(spont, sgrid), 2));

  const auto params = TlsParams::from_area(1.0, 2.0 * M_PI, 0.2);
  const auto tls = build_tls(1.0, params.omega, 0.2, TlsInitial::ground);
  const TimeGrid tgrid(0.05, 240);
  check("driven TLS", scattered_state(tls, PropagatorGrid::build(tls, tgrid), 3));

  // four-photon truncation with the (2,2) sector streamed past store_max
  const auto pair = build_pair_source(1.0, 1.0, 0.2, 1.0, 1.0, 2);
  const TimeGrid pgrid(0.15, 60);
  check("pair source (with streamed sector)",
        scattered_state(pair, PropagatorGrid::build(pair, pgrid, {.substeps = 8}), 4, 2));
  return out;
}

struct Criterion {
  int id;
  const char* name;
  double time_limit;  // seconds, 0 = none
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  const std::vector<Criterion> criteria = {
      {1, "spontaneous-emission exactness", 5.0, spontaneous_emission_exactness},
      {2, "closed-form equivalence over six areas", 120.0, closed_form_equivalence},
      {3, "paper table at gamma T_P = 0.02", 0.0, paper_table_reproduction},
      {4, "area sweep vs closed forms", 0.0, figure_area_sweep},
      {5, "antibunching to all orders", 0.0, antibunching},
      {6, "normalization and truncation deficit", 0.0, normalization},
      {7, "dt convergence of RK4 steps", 0.0, dt_convergence},
      {8, "trajectory equivalence", 180.0, trajectory_equivalence},
      {9, "pair source observables", 0.0, pair_source},
      {10, "flux identity", 0.0, flux_identity},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out = c.run();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit > 0.0 && secs > c.time_limit) {
      out.pass = false;
      out.detail << "; FAILED runtime " << fmtv(secs) << " s > " << fmtv(c.time_limit) << " s";
    }
    std::printf("[%s] criterion %2d: %s (%s) [%.1f s]\n", out.pass ? "PASS" : "FAIL", c.id,
                c.name, out.detail.str().c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures;
}
