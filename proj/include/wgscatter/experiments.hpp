// Batch experiment front-end: resolve a validated config into engine runs and
// write machine-readable results (summary document, delimited tables, manifest).
// All times in the emitted tables are in units of 1/gamma_ref with gamma_ref = 1.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "wgscatter/analytic_tls.hpp"
#include "wgscatter/config.hpp"
#include "wgscatter/observables.hpp"
#include "wgscatter/scattering.hpp"
#include "wgscatter/trajectories.hpp"

namespace wgscatter {

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class TableWriter {
 public:
  TableWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
      : out_(path) {
    if (!out_) throw IoError("cannot write '" + path.string() + "'");
    for (std::size_t i = 0; i < columns.size(); ++i)
      out_ << (i ? "\t" : "") << columns[i];
    out_ << "\n";
  }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i)
      out_ << (i ? "\t" : "") << fmt(values[i]);
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

inline void write_json(const std::filesystem::path& path, const Json& doc) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << doc.dump(2) << "\n";
}

inline void require_nonneg(double v, const std::string& key) {
  if (v < 0.0) throw ConfigError(key + ": must be >= 0");
}

}  // namespace detail

// Pearson chi-square statistic of observed counts against model probabilities.
inline double chi_square_statistic(const std::vector<long long>& observed,
                                   const std::vector<double>& expected_p, long long n) {
  double chi = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const double e = expected_p[k] * static_cast<double>(n);
    if (e <= 0.0) continue;
    const double d = static_cast<double>(observed[k]) - e;
    chi += d * d / e;
  }
  return chi;
}

namespace detail {

struct CommonSettings {
  std::filesystem::path out_dir;
  double dt = 0.0;
  double horizon = 0.0;   // absolute, or derived from tail
  double tail = -1.0;     // horizon = t_pulse + tail when >= 0
  int substeps = 16;
  bool force_rk4 = false;
  int n_max_photons = 2;
  int store_max = -1;
  double max_deficit = 0.05;
  std::uint64_t seed = 0;
  int threads = 0;
  bool want_flux = true;
  bool want_g2_grid = false;
  bool want_amplitudes = true;
};

inline CommonSettings read_common(Section& root) {
  CommonSettings s;
  auto grid = root.child("grid");
  s.dt = grid.require<double>("dt");
  if (s.dt <= 0.0) throw ConfigError(grid.path() + ".dt: must be > 0");
  if (grid.has("horizon")) s.horizon = grid.require<double>("horizon");
  if (grid.has("tail")) s.tail = grid.require<double>("tail");
  if (s.horizon <= 0.0 && s.tail < 0.0)
    throw ConfigError(grid.path() + ": need 'horizon' or 'tail'");
  s.substeps = grid.value_or<int>("substeps", 16);
  s.force_rk4 = grid.value_or<bool>("force_rk4", false);
  grid.finish();

  auto trunc = root.child_or_empty("truncation");
  s.n_max_photons = trunc.value_or<int>("n_max_photons", 2);
  s.store_max = trunc.value_or<int>("store_max", -1);
  trunc.finish();

  auto diag = root.child_or_empty("diagnostics");
  s.max_deficit = diag.value_or<double>("max_deficit", 0.05);
  diag.finish();

  auto outputs = root.child_or_empty("outputs");
  s.out_dir = outputs.value_or<std::string>("dir", "out");
  s.want_flux = outputs.value_or<bool>("flux", true);
  s.want_g2_grid = outputs.value_or<bool>("g2_grid", false);
  s.want_amplitudes = outputs.value_or<bool>("amplitudes", true);
  outputs.finish();

  s.seed = root.value_or<std::uint64_t>("seed", 0);
  s.threads = root.value_or<int>("threads", 0);
  return s;
}

inline TimeGrid make_grid(const CommonSettings& s, double t_pulse) {
  const double horizon = s.tail >= 0.0 ? t_pulse + s.tail : s.horizon;
  if (horizon < t_pulse) throw ConfigError("$.grid.horizon: must cover the drive window");
  const int bins = static_cast<int>(std::ceil(horizon / s.dt - 1e-9));
  return TimeGrid(s.dt, bins);
}

// Snap the pulse length onto the grid and report the snap in the manifest.
inline double snap_pulse(double t_pulse, double dt) {
  return std::round(t_pulse / dt) * dt;
}

struct TlsModelSpec {
  double gamma = 1.0;
  double t_pulse = 0.0;
  std::optional<double> area, omega;
  TlsInitial initial = TlsInitial::ground;

  double omega_at(double area_value) const { return area_value / (2.0 * t_pulse); }
  double resolved_omega() const { return omega ? *omega : omega_at(*area); }
};

inline TlsModelSpec read_tls_model(Section& model) {
  TlsModelSpec spec;
  spec.gamma = model.value_or<double>("gamma", 1.0);
  require_nonneg(spec.gamma, model.path() + ".gamma");
  spec.t_pulse = model.require<double>("t_pulse");
  require_nonneg(spec.t_pulse, model.path() + ".t_pulse");
  if (model.has("area")) spec.area = model.require<double>("area");
  if (model.has("omega")) spec.omega = model.require<double>("omega");
  if (spec.area && spec.omega)
    throw ConfigError(model.path() + ": give either 'area' or 'omega', not both");
  if (!spec.area && !spec.omega)
    throw ConfigError(model.path() + ": missing 'area' or 'omega'");
  const std::string init = model.value_or<std::string>("initial", "ground");
  if (init == "ground")
    spec.initial = TlsInitial::ground;
  else if (init == "excited")
    spec.initial = TlsInitial::excited;
  else
    throw ConfigError(model.path() + ".initial: must be 'ground' or 'excited'");
  model.finish();
  return spec;
}

struct PairModelSpec {
  double g0 = 1.0, sigma = 0.1, gamma1 = 1.0, gamma2 = 1.0;
  std::optional<double> t0;
  double t0_over_sigma = 5.0;
  int n_max = 6;
  double window_sigmas = 5.0;

  double t0_at(double sig) const { return t0 ? *t0 : t0_over_sigma * sig; }
};

inline PairModelSpec read_pair_model(Section& model) {
  PairModelSpec spec;
  spec.g0 = model.value_or<double>("g0", 1.0);
  require_nonneg(spec.g0, model.path() + ".g0");
  spec.sigma = model.require<double>("sigma");
  if (spec.sigma <= 0.0) throw ConfigError(model.path() + ".sigma: must be > 0");
  spec.gamma1 = model.value_or<double>("gamma1", 1.0);
  spec.gamma2 = model.value_or<double>("gamma2", 1.0);
  require_nonneg(spec.gamma1, model.path() + ".gamma1");
  require_nonneg(spec.gamma2, model.path() + ".gamma2");
  if (model.has("t0")) spec.t0 = model.require<double>("t0");
  spec.t0_over_sigma = model.value_or<double>("t0_over_sigma", 5.0);
  spec.n_max = model.value_or<int>("n_max", 6);
  if (spec.n_max < 1) throw ConfigError(model.path() + ".n_max: must be >= 1");
  spec.window_sigmas = model.value_or<double>("window_sigmas", 5.0);
  model.finish();
  return spec;
}

struct TlsRun {
  std::vector<double> p;
  double g2 = 0.0;
  bool g2_defined = false;
  double deficit = 0.0;
  ScatteredState state;
  PropagatorGrid gridp;
};

inline TlsRun run_tls_once(const TlsModelSpec& spec, double omega, const CommonSettings& s,
                           double t_pulse_snapped) {
  TlsRun run;
  const auto m = build_tls(spec.gamma, omega, t_pulse_snapped, spec.initial);
  const TimeGrid grid = make_grid(s, t_pulse_snapped);
  run.gridp = PropagatorGrid::build(m, grid, {.substeps = s.substeps, .force_rk4 = s.force_rk4});
  run.state = scattered_state(m, run.gridp, s.n_max_photons, s.store_max, s.threads);
  run.p = photocounts(run.state);
  run.deficit = truncation_deficit(run.state);
  try {
    run.g2 = g2_pulsewise(run.p);
    run.g2_defined = true;
  } catch (const std::domain_error&) {
  }
  return run;
}

inline int finish_with_deficit(double worst_deficit, const CommonSettings& s) {
  return worst_deficit > s.max_deficit ? 3 : 0;
}

inline int run_tls(Section& root, const Json& raw, CommonSettings& s) {
  auto model = root.child("model");
  const TlsModelSpec spec = read_tls_model(model);
  std::vector<double> areas;
  if (root.has("sweep")) {
    auto sweep = root.child("sweep");
    areas = sweep.require<std::vector<double>>("areas");
    sweep.finish();
  }
  root.finish();

  const double t_pulse = snap_pulse(spec.t_pulse, s.dt);
  std::filesystem::create_directories(s.out_dir);

  Json manifest = raw;
  manifest["resolved"] = {{"t_pulse_snapped", t_pulse},
                          {"snap_error", std::abs(t_pulse - spec.t_pulse)},
                          {"n_bins", make_grid(s, t_pulse).n_bins},
                          {"threads", resolve_threads(s.threads)},
                          {"seed", s.seed}};
  detail::write_json(s.out_dir / "manifest.json", manifest);

  Json summary;
  double worst_deficit = 0.0;

  if (!areas.empty()) {
    TableWriter table(s.out_dir / "area_sweep.tsv",
                      {"area", "p0", "p1", "p2", "g2_pulsewise", "p0_exact_closed",
                       "p1_first_order", "p2_first_order"});
    Json rows = Json::array();
    for (double area : areas) {
      const auto run = run_tls_once(spec, spec.omega_at(area), s, t_pulse);
      const auto cf = TlsParams::from_area(spec.gamma, area, t_pulse);
      const double p2 = run.p.size() > 2 ? run.p[2] : 0.0;
      table.row({area, run.p[0], run.p[1], p2, run.g2_defined ? run.g2 : 0.0, tls_p0_exact(cf),
                 tls_pm_closed(cf, 1), tls_pm_closed(cf, 2)});
      rows.push_back({{"area", area},
                      {"p0", run.p[0]},
                      {"p1", run.p[1]},
                      {"p2", p2},
                      {"deficit", run.deficit}});
      worst_deficit = std::max(worst_deficit, run.deficit);
    }
    summary["area_sweep"] = rows;
  } else {
    const auto run = run_tls_once(spec, spec.resolved_omega(), s, t_pulse);
    worst_deficit = run.deficit;
    summary["photocounts"] = run.p;
    if (run.g2_defined) summary["g2_pulsewise"] = run.g2;
    summary["vacuum_amplitude"] = {{"re", run.state.vacuum_amplitude.real()},
                                   {"im", run.state.vacuum_amplitude.imag()}};
    const TimeGrid& grid = run.state.grid;

    if (s.want_amplitudes) {
      if (const SectorData* s1 = run.state.find({1})) {
        TableWriter table(s.out_dir / "one_photon.tsv", {"tau", "re", "im", "abs"});
        for (int k = 0; k < grid.n_bins; ++k)
          table.row({grid.midpoint(k), s1->amps[k].real(), s1->amps[k].imag(),
                     std::abs(s1->amps[k])});
      }
    }
    if (s.want_flux) {
      const auto f = flux_trace(run.state);
      TableWriter table(s.out_dir / "flux.tsv", {"t", "flux"});
      for (int k = 0; k < grid.n_bins; ++k) table.row({grid.midpoint(k), f[k]});
    }
    if (s.want_g2_grid) {
      const Eigen::MatrixXd g2 = g2_grid(run.state);
      TableWriter table(s.out_dir / "g2_grid.tsv", {"t1", "t2", "g2"});
      for (int i = 0; i < grid.n_bins; ++i)
        for (int j = 0; j < grid.n_bins; ++j)
          table.row({grid.midpoint(i), grid.midpoint(j), g2(i, j)});
    }
  }

  summary["deficit"] = worst_deficit;
  summary["snap_error"] = std::abs(t_pulse - spec.t_pulse);
  detail::write_json(s.out_dir / "summary.json", summary);
  return finish_with_deficit(worst_deficit, s);
}

struct PairRun {
  std::vector<double> p;
  double purity_value = 0.0, schmidt_number = 0.0, deficit = 0.0;
  bool measures_defined = false;
  ScatteredState state;
};

inline PairRun run_pair_once(const PairModelSpec& spec, double sigma, double g0,
                             const CommonSettings& s) {
  PairRun run;
  const double t0 = spec.t0_at(sigma);
  auto m = build_pair_source(g0, t0, sigma, spec.gamma1, spec.gamma2, spec.n_max,
                             spec.window_sigmas);
  const TimeGrid grid = make_grid(s, m.t_pulse);
  const auto gridp =
      PropagatorGrid::build(m, grid, {.substeps = s.substeps, .with_tree = false});
  run.state = scattered_state(m, gridp, s.n_max_photons, s.store_max, s.threads);
  run.p = photocounts(run.state);
  run.deficit = truncation_deficit(run.state);
  try {
    run.purity_value = purity(run.p);
    run.schmidt_number = schmidt(run.state).schmidt_number;
    run.measures_defined = true;
  } catch (const std::domain_error&) {
    // near-vacuum output: purity and Schmidt number are undefined
  }
  return run;
}

inline int run_pair(Section& root, const Json& raw, CommonSettings& s) {
  auto model = root.child("model");
  const PairModelSpec spec = read_pair_model(model);
  std::vector<double> sigmas, g0s;
  if (root.has("sweep")) {
    auto sweep = root.child("sweep");
    sigmas = sweep.require<std::vector<double>>("sigmas");
    g0s = sweep.value_or<std::vector<double>>("g0s", {spec.g0});
    sweep.finish();
  }
  root.finish();
  std::filesystem::create_directories(s.out_dir);

  Json manifest = raw;
  manifest["resolved"] = {{"threads", resolve_threads(s.threads)}, {"seed", s.seed}};
  detail::write_json(s.out_dir / "manifest.json", manifest);

  Json summary;
  double worst_deficit = 0.0;

  if (!sigmas.empty()) {
    TableWriter table(s.out_dir / "sweep.tsv",
                      {"sigma", "g0", "p0", "p2", "purity", "schmidt_number"});
    Json rows = Json::array();
    for (double g0 : g0s) {
      for (double sigma : sigmas) {
        const auto run = run_pair_once(spec, sigma, g0, s);
        table.row({sigma, g0, run.p[0], run.p[2], run.purity_value, run.schmidt_number});
        rows.push_back({{"sigma", sigma},
                        {"g0", g0},
                        {"p0", run.p[0]},
                        {"p2", run.p[2]},
                        {"purity", run.purity_value},
                        {"schmidt_number", run.schmidt_number}});
        worst_deficit = std::max(worst_deficit, run.deficit);
      }
    }
    summary["sweep"] = rows;
  } else {
    const auto run = run_pair_once(spec, spec.sigma, spec.g0, s);
    worst_deficit = run.deficit;
    summary["photocounts"] = run.p;
    if (run.measures_defined) {
      summary["purity"] = run.purity_value;
      summary["schmidt_number"] = run.schmidt_number;
    }
    const SectorData* s11 = run.state.find({1, 1});
    if (s.want_amplitudes && s11 != nullptr && s11->stored) {
      const TimeGrid& grid = run.state.grid;
      TableWriter table(s.out_dir / "joint_two_photon.tsv", {"t1", "t2", "abs2"});
      for (int i = 0; i < grid.n_bins; ++i)
        for (int j = 0; j < grid.n_bins; ++j)
          table.row({grid.midpoint(i), grid.midpoint(j),
                     std::norm(s11->amps[static_cast<long long>(i) * grid.n_bins + j])});
    }
    if (s.want_flux) {
      const auto f = flux_trace(run.state);
      const TimeGrid& grid = run.state.grid;
      TableWriter table(s.out_dir / "flux.tsv", {"t", "flux"});
      for (int k = 0; k < grid.n_bins; ++k) table.row({grid.midpoint(k), f[k]});
    }
  }

  summary["deficit"] = worst_deficit;
  detail::write_json(s.out_dir / "summary.json", summary);
  return finish_with_deficit(worst_deficit, s);
}

inline int run_trajectories(Section& root, const Json& raw, CommonSettings& s) {
  auto model = root.child("model");
  const std::string type = model.require<std::string>("type");

  SystemModel m;
  TlsModelSpec tls_spec;
  if (type == "tls") {
    tls_spec = read_tls_model(model);
    m = build_tls(tls_spec.gamma, tls_spec.resolved_omega(), snap_pulse(tls_spec.t_pulse, s.dt),
                  tls_spec.initial);
  } else if (type == "pair") {
    const PairModelSpec spec = read_pair_model(model);
    m = build_pair_source(spec.g0, spec.t0_at(spec.sigma), spec.sigma, spec.gamma1, spec.gamma2,
                          spec.n_max, spec.window_sigmas);
  } else {
    throw ConfigError(model.path() + ".type: must be 'tls' or 'pair'");
  }

  auto traj = root.child("trajectories");
  const long long n_traj = traj.require<long long>("n");
  TrajectoryOptions opt;
  opt.step_dt = traj.value_or<double>("step_dt", 0.0);
  const int max_count = traj.value_or<int>("max_count", 8);
  traj.finish();
  root.finish();

  const double horizon = s.tail >= 0.0 ? m.t_pulse + s.tail : s.horizon;
  std::filesystem::create_directories(s.out_dir);

  Json manifest = raw;
  manifest["resolved"] = {{"horizon", horizon},
                          {"threads", resolve_threads(s.threads)},
                          {"seed", s.seed}};
  detail::write_json(s.out_dir / "manifest.json", manifest);

  const auto est = estimate_photocounts(m, horizon, n_traj, s.seed, max_count, opt, s.threads);

  Json summary;
  summary["n_traj"] = n_traj;
  summary["channel_counts_equal"] = est.channel_counts_equal;
  summary["mean_channel_counts"] = est.mean_channel_counts;

  std::vector<double> p_ref;
  if (type == "tls") {
    const TimeGrid grid = make_grid(s, m.t_pulse);
    const auto gridp = PropagatorGrid::build(m, grid, {.substeps = s.substeps});
    p_ref = photocounts(scattered_state(m, gridp, 2, -1, s.threads));
    // chi-square of {0, 1, 2, 3+} clicks against the quadrature reference
    std::vector<long long> observed(4, 0);
    for (int k = 0; k < static_cast<int>(est.p.size()); ++k)
      observed[std::min(k, 3)] += std::llround(est.p[k] * static_cast<double>(n_traj));
    const std::vector<double> expected = {p_ref[0], p_ref[1], p_ref[2],
                                          std::max(0.0, 1.0 - p_ref[0] - p_ref[1] - p_ref[2])};
    summary["chi_square"] = chi_square_statistic(observed, expected, n_traj);
    summary["chi_square_dof"] = 3;
    summary["chi_square_critical_1pct"] = 11.345;
  }

  TableWriter table(s.out_dir / "photocounts.tsv",
                    type == "tls" ? std::vector<std::string>{"m", "p_hat", "stderr", "p_quadrature"}
                                  : std::vector<std::string>{"m", "p_hat", "stderr"});
  for (int k = 0; k < static_cast<int>(est.p.size()); ++k) {
    std::vector<double> row = {static_cast<double>(k), est.p[k], est.se[k]};
    if (type == "tls")
      row.push_back(k < static_cast<int>(p_ref.size()) ? p_ref[k] : 0.0);
    table.row(row);
  }

  detail::write_json(s.out_dir / "summary.json", summary);
  return 0;
}

inline int run_convergence(Section& root, const Json& raw, CommonSettings& s) {
  auto model = root.child("model");
  const TlsModelSpec spec = read_tls_model(model);

  auto conv = root.child_or_empty("convergence");
  const int base_bins = conv.value_or<int>("base_bins", 50);
  const int halvings = conv.value_or<int>("halvings", 3);
  const int refine = conv.value_or<int>("substeps_refine", 4);
  conv.finish();
  root.finish();

  const double horizon = s.tail >= 0.0 ? spec.t_pulse + s.tail : s.horizon;
  const auto m = build_tls(spec.gamma, spec.resolved_omega(), spec.t_pulse, spec.initial);
  std::filesystem::create_directories(s.out_dir);

  Json manifest = raw;
  manifest["resolved"] = {{"horizon", horizon}, {"threads", resolve_threads(s.threads)}};
  detail::write_json(s.out_dir / "manifest.json", manifest);

  TableWriter table(s.out_dir / "convergence.tsv", {"n_bins", "dt", "max_err", "ratio"});
  Json rows = Json::array();
  double prev_err = -1.0;
  bool all_halved = true;
  for (int level = 0; level <= halvings; ++level) {
    const int bins = base_bins << level;
    const TimeGrid grid(horizon / bins, bins);
    const auto coarse =
        PropagatorGrid::build(m, grid, {.substeps = s.substeps, .force_rk4 = true});
    const auto fine = PropagatorGrid::build(
        m, grid, {.substeps = s.substeps * refine, .force_rk4 = true});
    const double err = (coarse.interval(0, bins) - fine.interval(0, bins)).cwiseAbs().maxCoeff();
    const double ratio = prev_err > 0.0 ? prev_err / err : 0.0;
    if (prev_err > 0.0 && ratio < 2.0) all_halved = false;
    table.row({static_cast<double>(bins), grid.dt, err, ratio});
    rows.push_back({{"n_bins", bins}, {"dt", grid.dt}, {"max_err", err}, {"ratio", ratio}});
    prev_err = err;
  }

  Json summary;
  summary["levels"] = rows;
  summary["error_halves_per_refinement"] = all_halved;
  detail::write_json(s.out_dir / "summary.json", summary);
  return 0;
}

}  // namespace detail

// Runs one experiment from a parsed config; returns the process exit status
// (0 success, 2 config error handled by the caller, 3 truncation diagnostic).
inline int run_experiment(const Json& config) {
  Section root(config, "$");
  const std::string experiment = root.require<std::string>("experiment");
  detail::CommonSettings s = detail::read_common(root);
  if (experiment == "tls") return detail::run_tls(root, config, s);
  if (experiment == "pair") return detail::run_pair(root, config, s);
  if (experiment == "trajectories") return detail::run_trajectories(root, config, s);
  if (experiment == "convergence") return detail::run_convergence(root, config, s);
  throw ConfigError("$.experiment: unknown experiment '" + experiment + "'");
}

}  // namespace wgscatter
