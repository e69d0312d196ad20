#pragma once

// Command-line front end. dispatch() parses argv, merges an optional config file, runs one
// subcommand and writes CSV or JSON. Exit status: 0 success, 1 validation error, 2 numerical
// failure; errors also go to stderr as one JSON object.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "starspec/config.hpp"
#include "starspec/eos.hpp"
#include "starspec/equilibrium.hpp"
#include "starspec/error.hpp"
#include "starspec/mrcurve.hpp"
#include "starspec/simulator.hpp"
#include "starspec/spectral.hpp"
#include "starspec/svg.hpp"

namespace starspec::cli {

using json = nlohmann::ordered_json;

/// 17 significant digits, enough to round-trip any double.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Rows of numbers or strings, rendered as CSV (with '#' comment lines) or JSON.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;
  std::vector<std::string> comments;  // CSV trailer lines, without the leading "# "
  json meta = json::object();          // JSON-only context

  std::string csv() const {
    std::string s;
    for (std::size_t i = 0; i < columns.size(); ++i) s += (i ? "," : "") + columns[i];
    s += '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) s += ',';
        const auto& c = row[i];
        if (c.is_number()) s += fmt(c.get<double>());
        else if (c.is_string()) s += c.get<std::string>();
        else if (c.is_null()) s += "nan";
        else s += c.dump();
      }
      s += '\n';
    }
    for (const auto& c : comments) s += "# " + c + '\n';
    return s;
  }

  json to_json() const {
    json j = meta;
    json arr = json::array();
    for (const auto& row : rows) {
      json o = json::object();
      for (std::size_t i = 0; i < columns.size() && i < row.size(); ++i) o[columns[i]] = row[i];
      arr.push_back(std::move(o));
    }
    j["rows"] = std::move(arr);
    return j;
  }
};

/// Writes to path.tmp and renames, so readers never see a partial file.
inline void write_atomic(const std::string& path, const std::string& data) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DomainError("cannot write '" + path + "'");
    f << data;
    if (!f) throw DomainError("write failed for '" + path + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DomainError("cannot move output into place at '" + path + "': " + ec.message());
}

namespace detail {

inline EquationOfState make_eos(const RunConfig& c) {
  const std::string model = c.text("eos");
  if (model == "polytrope") {
    if (c.has("A") || c.has("B")) throw DomainError("conflicting flags: --A/--B apply to --eos whitedwarf only");
    return EquationOfState::polytrope(c.real("K", 1.0), c.real("gamma"));
  }
  if (model == "whitedwarf" || model == "white-dwarf") {
    if (c.has("gamma") || c.has("K")) throw DomainError("conflicting flags: --gamma/--K apply to --eos polytrope only");
    return EquationOfState::white_dwarf(c.real("A", 1.0), c.real("B", 1.0));
  }
  throw DomainError("--eos must be polytrope or whitedwarf, got '" + model + "'");
}

inline double single_mu(const RunConfig& c) {
  const auto mus = c.list("mu");
  if (mus.size() != 1) throw DomainError("--mu takes a single value for this command");
  if (!(mus[0] > 0.0)) throw DomainError("--mu must be positive");
  return mus[0];
}

inline std::pair<double, double> window(const RunConfig& c, const std::string& key) {
  const auto w = c.list(key);
  if (w.size() != 2 || !(w[1] > w[0])) throw DomainError("--" + key + " expects t0,t1 with t1 > t0");
  return {w[0], w[1]};
}

inline Coordinate coordinate(const RunConfig& c) {
  const auto s = c.text("coordinate", "eulerian");
  if (s == "eulerian") return Coordinate::eulerian;
  if (s == "mass") return Coordinate::mass;
  throw DomainError("--coordinate must be eulerian or mass");
}

inline OperatorTriple assemble(const StarProfile& p, const RunConfig& c, int cells) {
  const double nu1 = c.real("nu1", 0.1), nu2 = c.real("nu2", 0.1);
  return coordinate(c) == Coordinate::eulerian ? assemble_eulerian(p, nu1, nu2, cells)
                                               : assemble_mass_coord(p, nu1, nu2, cells);
}

inline json complex_list(const std::vector<std::complex<double>>& v) {
  json a = json::array();
  for (const auto& l : v) a.push_back({{"re", l.real()}, {"im", l.imag()}});
  return a;
}

inline json spectrum_json(const SpectrumReport& r) {
  json j;
  j["mu"] = r.mu;
  j["cells"] = r.cells;
  j["nu1"] = r.nu1;
  j["nu2"] = r.nu2;
  j["n_minus"] = r.n_minus;
  j["ker_margin"] = r.ker_margin;
  j["unstable_eigenvalues"] = complex_list(r.unstable_eigenvalues);
  j["ep_unstable_eigenvalues"] = r.ep_unstable_eigenvalues;
  json hc = json::array();
  for (const auto& [tau, count] : r.homotopy_counts) hc.push_back({{"tau", tau}, {"count", count}});
  j["homotopy_counts"] = std::move(hc);
  j["ktc_verified"] = r.ktc_verified ? json(*r.ktc_verified) : json(nullptr);
  return j;
}

// Result of one subcommand: a table or a JSON document, plus an optional chart.
struct Result {
  std::optional<Table> table;
  json doc;
  std::optional<SvgChart> chart;
  int status = 0;
  std::string failure;  // set with status 2 when output was still produced
};

inline Result cmd_eos_show(const RunConfig& c) {
  const auto eos = make_eos(c);
  Table t;
  t.columns = {"rho", "P", "dP", "d2P", "enthalpy", "phi2"};
  for (double rho : c.list("rho", std::vector<double>{1.0})) {
    if (!(rho > 0.0)) throw DomainError("--rho values must be positive");
    t.rows.push_back({rho, eos.pressure(rho), eos.dpressure(rho), eos.d2pressure(rho), eos.enthalpy(rho),
                      eos.phi2(rho)});
  }
  t.meta["eos"] = eos.describe();
  t.meta["gamma1"] = eos.gamma1();
  t.meta["near_vacuum_law"] = eos.satisfies_near_vacuum_law();
  t.meta["second_derivative_law"] = eos.satisfies_second_derivative_law();
  t.comments = {"eos=" + eos.describe(), "gamma1=" + fmt(eos.gamma1()),
                std::string("near_vacuum_law=") + (eos.satisfies_near_vacuum_law() ? "true" : "false"),
                std::string("second_derivative_law=") + (eos.satisfies_second_derivative_law() ? "true" : "false")};
  Result r;
  r.table = std::move(t);
  return r;
}

inline Result cmd_profile(const RunConfig& c) {
  const auto eos = make_eos(c);
  ProfileOptions opts;
  opts.nodes = c.integer("nodes", opts.nodes);
  const auto p = solve_profile(eos, single_mu(c), c.real("tol", 1e-10), opts);
  Table t;
  t.columns = {"r", "rho", "drho", "m", "h", "P"};
  for (std::size_t i = 0; i < p.grid().size(); ++i) {
    t.rows.push_back({p.grid()[i], p.rho()[i], p.drho()[i], p.m()[i], p.h()[i], eos.pressure(p.rho()[i])});
  }
  t.meta["mu"] = p.mu();
  t.meta["R"] = p.radius();
  t.meta["M"] = p.mass();
  Result r;
  r.table = std::move(t);
  r.chart = SvgChart{"density profile", "r", "rho", false, false, {{"rho", p.grid(), p.rho()}}};
  return r;
}

inline Result cmd_curve(const RunConfig& c) {
  const auto eos = make_eos(c);
  auto curve = sweep_curve(eos, c.real("mu-min"), c.real("mu-max"), c.integer("points", 65), c.real("tol", 1e-10));
  std::optional<std::string> no_counts;
  try {
    curve = turning_point_counts(std::move(curve), eos.gamma1());
  } catch (const DomainError& e) {
    no_counts = e.what();
  }
  Table t;
  t.columns = {"mu", "M", "R", "dM", "dR", "n_unstable"};
  for (std::size_t i = 0; i < curve.mus.size(); ++i) {
    const json count = no_counts ? json(nullptr) : json(curve.count_at(curve.mus[i]));
    t.rows.push_back({curve.mus[i], curve.M[i], curve.R[i], curve.dM[i], curve.dR[i], count});
  }
  json ex = json::array();
  for (const auto& e : curve.extrema) {
    t.comments.push_back("extremum mu=" + fmt(e.mu_star) + " kind=" + to_string(e.kind) + " bend=" + to_string(e.bend));
    ex.push_back({{"mu", e.mu_star}, {"kind", to_string(e.kind)}, {"bend", to_string(e.bend)}});
  }
  if (no_counts) t.comments.push_back("counts unavailable: " + *no_counts);
  t.meta["extrema"] = std::move(ex);
  if (no_counts) t.meta["counts_unavailable"] = *no_counts;
  Result r;
  r.table = std::move(t);
  r.chart = SvgChart{"mass-radius curve", "R", "M", false, false, {{"(R, M)", curve.R, curve.M}}};
  return r;
}

inline Result cmd_spectrum(const RunConfig& c) {
  const auto p = solve_profile(make_eos(c), single_mu(c), c.real("tol", 1e-10));
  const auto rep = verify_ktc(assemble(p, c, c.integer("cells", 400)), c.list("tau-grid", default_tau_grid()));
  Result r;
  r.doc = spectrum_json(rep);
  Table t;
  t.columns = {"kind", "tau", "re", "im"};
  for (const auto& l : rep.unstable_eigenvalues) t.rows.push_back({"qep", 1.0, l.real(), l.imag()});
  for (double l : rep.ep_unstable_eigenvalues) t.rows.push_back({"ep", 0.0, l, 0.0});
  for (const auto& [tau, count] : rep.homotopy_counts) t.rows.push_back({"count", tau, count, 0.0});
  t.comments = {"n_minus=" + std::to_string(rep.n_minus), "ker_margin=" + fmt(rep.ker_margin),
                "ktc_verified=" + std::string(rep.ktc_verified ? (*rep.ktc_verified ? "true" : "false") : "null")};
  r.table = std::move(t);
  return r;
}

inline Result cmd_evolve_linear(const RunConfig& c) {
  const auto p = solve_profile(make_eos(c), single_mu(c), c.real("tol", 1e-10));
  const auto t = assemble(p, c, c.integer("cells", 400));
  const auto pert = parse_perturbation(c.text("perturb", "displacement:1e-3"));
  const std::size_t n = t.size();
  std::vector<double> u(n, 0.0), v(n, 0.0);
  switch (pert.kind) {
    case PerturbKind::none: break;
    case PerturbKind::displacement:
      for (std::size_t i = 0; i < n; ++i) u[i] = pert.amplitude * t.radii[i + 1] / p.radius();
      u = from_displacement(t, u);
      break;
    case PerturbKind::velocity:
      for (std::size_t i = 0; i < n; ++i) v[i] = pert.amplitude * t.radii[i + 1] / p.radius();
      v = from_displacement(t, v);
      break;
    case PerturbKind::eigenmode: {
      const auto root = real_unstable_root(t, pert.mode);
      if (!root) throw DomainError("eigenmode perturbation: fewer than " + std::to_string(pert.mode) + " unstable mode(s)");
      const auto shape = to_displacement(t, root->second);
      double mx = 0.0;
      for (double x : shape) mx = std::max(mx, std::abs(x));
      for (std::size_t i = 0; i < n; ++i) u[i] = root->second[i] * pert.amplitude / mx;
      break;
    }
  }
  const auto ts = evolve_linear(t, u, v, c.real("tmax", 10.0), c.real("dt", 1e-2), c.real("output-dt", 0.1));
  Table tab;
  tab.columns = {"t", "kinetic", "potential", "norm", "dissipated", "residual"};
  std::vector<double> tt, e;
  for (const auto& s : ts.rows) {
    const double res = std::abs(s.energy() - ts.rows.front().energy() + s.dissipated);
    tab.rows.push_back({s.t, s.kinetic, s.potential, s.norm, s.dissipated, res});
    tt.push_back(s.t);
    e.push_back(s.energy());
  }
  tab.comments = {"residual_rate=" + fmt(ts.residual_rate())};
  tab.meta["residual_rate"] = ts.residual_rate();
  Result r;
  r.table = std::move(tab);
  r.chart = SvgChart{"linear energy", "t", "v.Mv + u.Ku", false, false, {{"energy", tt, e}}};
  return r;
}

inline Result cmd_simulate(const RunConfig& c) {
  const auto p = solve_profile(make_eos(c), single_mu(c), c.real("tol", 1e-10));
  SimConfig cfg;
  cfg.N = c.integer("N", cfg.N);
  cfg.nu1 = c.real("nu1", cfg.nu1);
  cfg.nu2 = c.real("nu2", cfg.nu2);
  cfg.perturbation = parse_perturbation(c.text("perturb", "none"));
  cfg.tmax = c.real("tmax", cfg.tmax);
  cfg.dt = c.real("dt", cfg.dt);
  cfg.output_dt = c.real("output-dt", cfg.output_dt);
  if (c.has("stop-amplitude")) cfg.stop_amplitude = c.real("stop-amplitude");
  std::optional<std::pair<double, double>> wd, wg;
  if (c.has("fit-decay")) wd = window(c, "fit-decay");
  if (c.has("fit-growth")) wg = window(c, "fit-growth");

  auto ts = run(p, cfg);
  if (wd) ts.fits.push_back(fit_decay(ts, wd->first, wd->second));
  if (wg) ts.fits.push_back(fit_growth(ts, wg->first, wg->second));

  Table t;
  t.columns = {"t", "E_N", "sup_r_err", "sup_v", "E0_sigma", "E0_v", "r_N", "status"};
  std::vector<double> tt, en, e0;
  for (const auto& row : ts.rows) {
    t.rows.push_back({row.t, row.E_N, row.sup_r_err, row.sup_v, row.E0_sigma, row.E0_v, row.r_N, row.status});
    tt.push_back(row.t);
    en.push_back(row.E_N);
    e0.push_back(row.E0());
  }
  json fits = json::array();
  for (const auto& f : ts.fits) {
    t.comments.push_back("fit kind=" + f.kind + " window=" + fmt(f.t0) + "," + fmt(f.t1) +
                         " value=" + (f.ok ? fmt(f.value) : "nan") + " residual=" + (f.ok ? fmt(f.residual) : "nan") +
                         (f.super_polynomial ? " super_polynomial=true" : ""));
    fits.push_back({{"kind", f.kind},
                    {"window", {f.t0, f.t1}},
                    {"value", f.ok ? json(f.value) : json(nullptr)},
                    {"residual", f.ok ? json(f.residual) : json(nullptr)},
                    {"super_polynomial", f.super_polynomial}});
  }
  t.comments.push_back("max_energy_ratio=" + fmt(ts.max_energy_ratio));
  t.comments.push_back("status=" + ts.status);
  t.meta["status"] = ts.status;
  t.meta["max_energy_ratio"] = ts.max_energy_ratio;
  t.meta["fits"] = std::move(fits);
  Result r;
  if (ts.status.rfind("aborted", 0) == 0) {
    r.status = 2;
    r.failure = ts.status;
    t.meta["dump_r"] = ts.dump_r;
    t.meta["dump_v"] = ts.dump_v;
  }
  r.table = std::move(t);
  r.chart = SvgChart{"discrete energy", "t", "energy", false, true, {{"E_N", tt, en}, {"E0", tt, e0}}};
  return r;
}

/// The consistency battery at one centre density.
inline json verify_one(const EquationOfState& eos, double mu, const RunConfig& c) {
  const auto p = solve_profile(eos, mu, c.real("tol", 1e-10));
  const int cells = c.integer("cells", 400);
  const double nu1 = c.real("nu1", 0.1), nu2 = c.real("nu2", 0.1);
  const auto rep = verify_ktc(assemble_eulerian(p, nu1, nu2, cells), c.list("tau-grid", default_tau_grid()));
  json j = spectrum_json(rep);
  const int mass_n = inertia_nminus(assemble_mass_coord(p, nu1, nu2, cells)).n_minus;
  j["mass_coordinate_n_minus"] = mass_n;

  json tp = nullptr;
  std::optional<int> tp_count;
  try {
    const double lo = c.real("mu-min", mu / 100.0), hi = c.real("mu-max", mu * 100.0);
    if (!(lo <= mu && mu <= hi)) throw DomainError("--mu-min/--mu-max must bracket mu");
    const auto curve = turning_point_counts(sweep_curve(eos, lo, hi, c.integer("points", 65)), eos.gamma1());
    tp_count = curve.count_at(mu);
    tp = *tp_count;
  } catch (const DomainError& e) {
    j["turning_point_note"] = e.what();
  }
  j["turning_point_count"] = tp;
  j["consistent"] = rep.ktc_verified.value_or(false) && mass_n == rep.n_minus && (!tp_count || *tp_count == rep.n_minus);
  return j;
}

inline Result cmd_verify(const RunConfig& c) {
  const auto eos = make_eos(c);
  const auto mus = c.list("mu");
  for (double mu : mus) {
    if (!(mu > 0.0)) throw DomainError("--mu must be positive");
  }
  Result r;
  Table t;
  t.columns = {"mu", "n_minus", "mass_coordinate_n_minus", "turning_point_count", "n_unstable", "ktc_verified",
               "consistent"};
  json all = json::array();
  for (double mu : mus) {
    json j = verify_one(eos, mu, c);
    t.rows.push_back({mu, j["n_minus"], j["mass_coordinate_n_minus"], j["turning_point_count"],
                      j["unstable_eigenvalues"].size(), j["ktc_verified"], j["consistent"]});
    all.push_back(std::move(j));
  }
  r.doc = mus.size() == 1 ? all[0] : all;
  r.table = std::move(t);
  return r;
}

}  // namespace detail

inline int dispatch(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"starspec: gaseous-star equilibria, unstable-mode counts and free-boundary simulation", "starspec"};
  app.require_subcommand(1);
  std::string config_path;
  RunConfig flags;
  std::string fmt_flag;

  // Raw strings are collected here and validated after parsing, so all errors share one path.
  auto add = [&](CLI::App* sub, const std::string& key, const std::string& desc) {
    sub->add_option_function<std::string>("--" + key, [&flags, key](const std::string& v) { flags.values[key] = v; },
                                           desc);
  };
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value file; flags override its values");
    add(sub, "format", "csv or json");
    add(sub, "out", "output file (default: stdout)");
    add(sub, "eos", "polytrope or whitedwarf");
    add(sub, "gamma", "polytrope exponent");
    add(sub, "K", "polytrope constant (default 1)");
    add(sub, "A", "white-dwarf pressure scale (default 1)");
    add(sub, "B", "white-dwarf density scale (default 1)");
    add(sub, "tol", "equilibrium tolerance (default 1e-10)");
  };

  auto* eos_cmd = app.add_subcommand("eos", "equation-of-state queries");
  eos_cmd->require_subcommand(1);
  auto* show = eos_cmd->add_subcommand("show", "P, P', P'', enthalpy and Phi'' at given densities");
  common(show);
  add(show, "rho", "comma-separated densities (default 1)");

  auto* profile = app.add_subcommand("profile", "equilibrium profile as r,rho,drho,m,h,P");
  common(profile);
  add(profile, "mu", "centre density");
  add(profile, "nodes", "output grid size (default 800)");
  add(profile, "svg", "density chart");

  auto* curve = app.add_subcommand("curve", "mass-radius sweep with turning-point counts");
  common(curve);
  add(curve, "mu-min", "lowest centre density");
  add(curve, "mu-max", "highest centre density");
  add(curve, "points", "log-spaced samples (default 65)");
  add(curve, "svg", "(R, M) chart");

  auto* spectrum = app.add_subcommand("spectrum", "inertia, viscous and inviscid unstable spectra");
  auto* evolve = app.add_subcommand("evolve-linear", "linear damped evolution with the energy identity");
  auto* simulate = app.add_subcommand("simulate", "nonlinear free-boundary simulation");
  auto* verify = app.add_subcommand("verify", "unstable-count consistency battery");
  for (auto* sub : {spectrum, evolve, simulate, verify}) {
    common(sub);
    add(sub, "mu", sub == verify ? "centre density or comma-separated list" : "centre density");
    add(sub, "nu1", "shear viscosity (default 0.1)");
    add(sub, "nu2", "bulk viscosity (default 0.1)");
  }
  for (auto* sub : {spectrum, evolve, verify}) add(sub, "cells", "finite elements (default 400)");
  for (auto* sub : {spectrum, evolve}) add(sub, "coordinate", "eulerian or mass (default eulerian)");
  for (auto* sub : {spectrum, verify}) add(sub, "tau-grid", "homotopy parameters (default 0,0.25,0.5,0.75,1)");
  add(verify, "mu-min", "turning-point sweep start (default mu/100)");
  add(verify, "mu-max", "turning-point sweep end (default 100 mu)");
  add(verify, "points", "turning-point sweep samples (default 65)");
  for (auto* sub : {evolve, simulate}) {
    add(sub, "perturb", "kind:amplitude[:mode], kind = none|displacement|velocity|eigenmode");
    add(sub, "tmax", "final time (default 10)");
    add(sub, "dt", "time step");
    add(sub, "output-dt", "sampling interval (default 0.1)");
    add(sub, "svg", "energy chart");
  }
  add(simulate, "N", "Lagrangian cells (default 200)");
  add(simulate, "stop-amplitude", "stop once sqrt(E0) reaches this value");
  add(simulate, "fit-decay", "t0,t1 window for the decay exponent of sup|r - x|");
  add(simulate, "fit-growth", "t0,t1 window for the growth rate of sqrt(E0)");

  auto fail = [&](int code, const std::string& kind, const std::string& msg, const CLI::App* usage) {
    err << json{{"error", kind}, {"message", msg}, {"exit", code}}.dump() << '\n';
    if (usage) err << usage->help();
    return code;
  };

  std::vector<std::string> args(argv.rbegin(), argv.rend());
  if (!args.empty()) args.pop_back();  // program name
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    return fail(1, "usage", e.what(), &app);
  }

  CLI::App* sub = nullptr;
  std::string name;
  if (eos_cmd->parsed()) sub = show, name = "eos show";
  for (auto* s : {profile, curve, spectrum, evolve, simulate, verify}) {
    if (s->parsed()) sub = s, name = s->get_name();
  }

  detail::Result res;
  RunConfig cfg;
  try {
    RunConfig flag_cfg;
    for (const auto& [k, v] : flags.values) flag_cfg.set(k, v);
    cfg = config_path.empty() ? flag_cfg : load_config(config_path).merged(flag_cfg);
    for (const auto& w : cfg.warnings) err << "warning: " << w << '\n';
    const std::string format = cfg.text("format", (name == "spectrum" || name == "verify" || name == "eos show")
                                                      ? "json" : "csv");
    if (format != "csv" && format != "json") throw DomainError("--format must be csv or json");
    // Required inputs are checked before any compute starts.
    cfg.text("eos");
    if (name != "eos show" && name != "curve") cfg.list("mu");
    if (name == "curve") cfg.real("mu-min"), cfg.real("mu-max");

    if (name == "eos show") res = detail::cmd_eos_show(cfg);
    else if (name == "profile") res = detail::cmd_profile(cfg);
    else if (name == "curve") res = detail::cmd_curve(cfg);
    else if (name == "spectrum") res = detail::cmd_spectrum(cfg);
    else if (name == "evolve-linear") res = detail::cmd_evolve_linear(cfg);
    else if (name == "simulate") res = detail::cmd_simulate(cfg);
    else res = detail::cmd_verify(cfg);

    std::string data;
    if (format == "csv") {
      data = res.table->csv();
    } else {
      data = (res.doc.is_null() ? res.table->to_json() : res.doc).dump(2) + "\n";
    }
    if (cfg.has("out")) write_atomic(cfg.text("out"), data);
    else out << data;
    if (cfg.has("svg") && res.chart) write_atomic(cfg.text("svg"), render_svg(*res.chart));
  } catch (const DomainError& e) {
    const bool missing = std::string(e.what()).rfind("missing required", 0) == 0;
    return fail(1, "domain", e.what(), missing ? sub : nullptr);
  } catch (const NumericalError& e) {
    return fail(2, "numerical", e.what(), nullptr);
  } catch (const std::exception& e) {
    return fail(2, "internal", e.what(), nullptr);
  }
  if (res.status != 0) return fail(res.status, "numerical", res.failure, nullptr);
  return 0;
}

inline int dispatch(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return dispatch(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace starspec::cli
