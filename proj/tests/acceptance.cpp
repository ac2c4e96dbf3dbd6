// Acceptance criteria 1-9. Run with a criterion number, or with none for all.
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "iontrap/cache.hpp"
#include "iontrap/figures_of_merit.hpp"
#include "iontrap/kernel.hpp"
#include "iontrap/solver.hpp"

using namespace iontrap;

namespace {

constexpr double kMHz = 2.0 * kPi * 1e6;

struct Outcome {
  bool pass = true;
  std::vector<std::string> lines;

  void require(bool ok, std::string what) {
    pass = pass && ok;
    lines.push_back(fmt::format("  [{}] {}", ok ? "ok" : "FAIL", what));
  }
};

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

const IonSpecies& calcium() {
  static const IonSpecies s = IonSpecies::calcium40();
  return s;
}

std::shared_ptr<const TrapGeometry> trap(Design d, std::optional<double> h = std::nullopt) {
  GeometryParams p = default_params(d);
  if (h) p.h = *h;
  return std::make_shared<const TrapGeometry>(build_trap(p));
}

TrapReport report(std::shared_ptr<const TrapGeometry> g, bool depth) {
  ReportOptions o;
  o.cache_dir = cache_dir_from_env();
  o.compute_depth = depth;
  o.compute_capacitance = false;
  return full_report(std::move(g), calcium(), DriveParams{}, o);
}

// ------------------------------------------------------------------ 1

Outcome drive_frequency_column() {
  Outcome o;
  const double qs[] = {0.250, 0.333, 0.905};
  const double listed[] = {110.0, 85.0, 31.0};
  const char* names[] = {"surface", "gnd-surface", "cross-rf"};
  for (int i = 0; i < 3; ++i) {
    const double mhz = drive_for_target(0.21, 90e-6, calcium(), 10.0 * kMHz, qs[i]).omega / kMHz;
    o.require(rel(mhz, listed[i]) <= 0.03,
              fmt::format("{}: q = {:.3f} -> Omega/2pi = {:.2f} MHz vs {:.0f} (dev {:.2f}%, tol 3%)", names[i], qs[i],
                          mhz, listed[i], 100 * rel(mhz, listed[i])));
  }
  return o;
}

// ------------------------------------------------------------------ 2

Outcome power_column() {
  Outcome o;
  const double gnd = power_norm(4.0e3, 85.0 * kMHz, 15e3, 110.0 * kMHz);
  const double cross = power_norm(0.42e3, 31.0 * kMHz, 15e3, 110.0 * kMHz);
  o.require(rel(gnd, 4.0e-2) <= 0.05,
            fmt::format("gnd-surface: P = {:.4e} vs 4.0e-2 (dev {:.2f}%, tol 5%)", gnd, 100 * rel(gnd, 4.0e-2)));
  o.require(rel(cross, 6.1e-5) <= 0.05,
            fmt::format("cross-rf: P = {:.4e} vs 6.1e-5 (dev {:.2f}%, tol 5%)", cross, 100 * rel(cross, 6.1e-5)));
  return o;
}

// ------------------------------------------------------------------ 3

Outcome surface_max_frequency() {
  Outcome o;
  const double mhz = max_frequency(0.210, 90e-6, calcium(), 10.0).omega_max / kMHz;
  o.require(rel(mhz, 1.00) <= 0.02, fmt::format("omega_max/2pi = {:.4f} MHz vs 1.00 (tol 2%)", mhz));
  return o;
}

// ------------------------------------------------------------------ 4

Outcome cross_rf_symmetry() {
  Outcome o;
  for (double h_um : {80.0, 135.0, 190.0, 245.0, 300.0}) {
    const auto g = trap(Design::CrossRf, h_um * 1e-6);
    const SolvedTrap s = solve_cached(g, cache_dir_from_env());
    const PseudoField f(s, calcium(), DriveParams{});
    const NullResult n = find_rf_null(f, default_null_region(*g));
    const double err = std::abs(n.d - 0.5 * h_um * 1e-6) * 1e6;
    o.require(err <= 1.0, fmt::format("h = {:.0f} um: d = {:.3f} um vs h/2 = {:.1f} (|dev| {:.3f} um, tol 1 um)", h_um,
                                      n.d * 1e6, 0.5 * h_um, err));
  }
  return o;
}

// ------------------------------------------------------------------ 5

Outcome calibrated_surface() {
  Outcome o;
  const TrapReport r = report(trap(Design::Surface), false);
  if (!r.d || !r.k_y) {
    o.require(false, "surface trap: null or fit not computed");
    return o;
  }
  const double d = *r.d * 1e6, k = std::abs(*r.k_y);
  o.require(std::abs(d - 90.0) <= 2.0, fmt::format("d = {:.3f} um vs 90 (tol 2 um)", d));
  o.require(std::abs(k - 0.210) <= 0.02, fmt::format("k_y = {:.4f} vs 0.210 (tol 0.02)", k));
  o.require(*r.k_stderr < 1e-3, fmt::format("fit standard error {:.2e} (tol < 1e-3)", *r.k_stderr));
  return o;
}

// ------------------------------------------------------------------ 6

Outcome trends() {
  Outcome o;
  const double h = 200e-6;
  const TrapReport s = report(trap(Design::Surface), true);
  const TrapReport g = report(trap(Design::GndSurface, h), true);
  const TrapReport c = report(trap(Design::CrossRf, h), true);
  auto ordered = [&](const char* name, std::optional<double> a, std::optional<double> b, std::optional<double> x,
                     double scale, const char* unit) {
    const bool ok = a && b && x && *a < *b && *b < *x;
    auto v = [&](std::optional<double> y) { return y ? fmt::format("{:.4g}", *y * scale) : std::string("NA"); };
    o.require(ok, fmt::format("h = 200 um: {} surface {} < gnd-surface {} < cross-rf {}{}", name, v(a), v(b), v(x),
                              unit));
  };
  auto abs_k = [](const TrapReport& r) { return r.k ? std::optional<double>(std::abs(*r.k)) : std::nullopt; };
  ordered("k", abs_k(s), abs_k(g), abs_k(c), 1.0, "");
  ordered("D", s.depth_meV, g.depth_meV, c.depth_meV, 1.0, " meV");
  ordered("omega/2pi", s.omega_rad, g.omega_rad, c.omega_rad, 1.0 / kMHz, " MHz");
  if (g.depth_boundary_limited && *g.depth_boundary_limited) o.lines.push_back("  note: gnd-surface D is a lower bound");

  // Ground plane far away: gnd-surface approaches the bare surface trap.
  const double far = 10.0 * rf_span(default_params(Design::GndSurface));
  const TrapReport g_far = report(trap(Design::GndSurface, far), false);
  if (g_far.d && s.d) {
    const double dev = std::abs(*g_far.d - *s.d) * 1e6;
    o.require(dev <= 2.0, fmt::format("h = {:.0f} um (10x lateral extent): gnd-surface d = {:.3f} um vs surface {:.3f} "
                                      "(|dev| {:.3f} um, tol 2 um)",
                                      far * 1e6, *g_far.d * 1e6, *s.d * 1e6, dev));
  } else {
    o.require(false, "gnd-surface at 10x lateral extent: null not computed");
  }

  // Secular frequency at fixed drive over h: the largest value is not at either end.
  const std::vector<double> hs_um = {50, 70, 100, 140, 200, 300, 500};
  std::vector<double> w;
  std::string trace;
  for (double h_um : hs_um) {
    const TrapReport r = report(trap(Design::GndSurface, h_um * 1e-6), false);
    w.push_back(r.omega_rad ? *r.omega_rad / kMHz : std::numeric_limits<double>::quiet_NaN());
    trace += fmt::format(" {:.0f}:{:.4f}", h_um, w.back());
  }
  const auto best = std::max_element(w.begin(), w.end());
  const bool finite = std::all_of(w.begin(), w.end(), [](double x) { return std::isfinite(x); });
  const bool interior = finite && best != w.begin() && best != w.end() - 1;
  o.require(interior, fmt::format("gnd-surface omega/2pi [MHz] vs h [um]:{} -> maximum at h = {:.0f} um {}", trace,
                                  hs_um[std::size_t(best - w.begin())], interior ? "(interior)" : "(at an end)"));
  return o;
}

// ------------------------------------------------------------------ 7

Outcome solver_validation() {
  Outcome o;
  const double a = 1e-6;
  const PanelFrame p(Rect{Vec3::Zero(), Vec3(a, 0, 0), Vec3(0, a, 0)});

  double worst = 0.0;
  for (const Vec3& dir : {Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(1, 1, 1).normalized(), Vec3(-1, 2, 0.5).normalized()}) {
    const Vec3 r = p.center() + 100.0 * a * dir;
    const double point = a * a / (4.0 * kPi * kVacuumPermittivity * (r - p.center()).norm());
    worst = std::max(worst, rel(panel_potential(p, r), point));
  }
  o.require(worst <= 1e-3, fmt::format("far-field potential at 100x panel size: max rel dev {:.2e} (tol 1e-3)", worst));

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 2.0), n(0.2, 3.0);
  std::bernoulli_distribution sign;
  worst = 0.0;
  const double h = 1e-5 * a;
  for (int i = 0; i < 100; ++i) {
    const Vec3 r(u(rng) * a, u(rng) * a, (sign(rng) ? 1 : -1) * n(rng) * a);
    Vec3 fd;
    for (int j = 0; j < 3; ++j) {
      const Vec3 e = h * Vec3::Unit(j);
      fd[j] = -(panel_potential(p, r + e) - panel_potential(p, r - e)) / (2.0 * h);
    }
    const Vec3 f = panel_field(p, r).field;
    worst = std::max(worst, (f - fd).norm() / f.norm());
  }
  o.require(worst < 1e-6, fmt::format("analytic vs finite-difference field, 100 points: max rel dev {:.2e} (tol 1e-6)",
                                      worst));

  const SolvedTrap surface = solve_cached(trap(Design::Surface), cache_dir_from_env());
  o.require(surface.diagnostics.max_residual < 1e-8,
            fmt::format("surface trap boundary residual {:.2e} V (tol 1e-8)", surface.diagnostics.max_residual));

  // Square plates of side L at gap L/20 held at +-0.5 V, elements the size of the gap.
  const double side = 1e-3, gap = side / 20.0;
  TrapGeometry t;
  t.electrodes = {Electrode{"bottom", ElectrodeRole::Rf, {Rect{Vec3::Zero(), Vec3(side, 0, 0), Vec3(0, 0, side)}}},
                  Electrode{"top", ElectrodeRole::Ground, {Rect{Vec3(0, gap, 0), Vec3(side, 0, 0), Vec3(0, 0, side)}}}};
  MeshParams mesh;
  mesh.fine_element = gap;
  mesh.coarse_element = gap;
  Box everywhere;
  everywhere.lo = Vec3::Constant(-1.0);
  everywhere.hi = Vec3::Constant(1.0);
  const SolvedTrap plates = solve_unit_excitations(refine_mesh(t, mesh, everywhere));
  const CapacitanceMatrix c = capacitance_matrix(plates);
  const double cap = 0.25 * (c.farads(0, 0) + c.farads(1, 1) - c.farads(0, 1) - c.farads(1, 0));
  const double c0 = kVacuumPermittivity * side * side / gap;
  o.require(plates.diagnostics.max_residual < 1e-8,
            fmt::format("parallel plates boundary residual {:.2e} V (tol 1e-8)", plates.diagnostics.max_residual));
  o.require(rel(cap, c0) <= 0.10, fmt::format("parallel plates, gap = side/20: C = {:.4f} eps0 A/g (dev {:.1f}%, tol 10%)",
                                              cap / c0, 100 * rel(cap, c0)));
  return o;
}

// ------------------------------------------------------------------ 8

double minimax_oracle(const std::vector<double>& v, std::size_t n, std::size_t start) {
  std::vector<double> level(v.size(), std::numeric_limits<double>::infinity());
  level[start] = v[start];
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t iz = 0; iz < n; ++iz)
      for (std::size_t iy = 0; iy < n; ++iy)
        for (std::size_t ix = 0; ix < n; ++ix) {
          const std::size_t i = (iz * n + iy) * n + ix;
          double best = level[i];
          auto relax = [&](std::size_t j) { best = std::min(best, std::max(level[j], v[i])); };
          if (ix > 0) relax(i - 1);
          if (ix + 1 < n) relax(i + 1);
          if (iy > 0) relax(i - n);
          if (iy + 1 < n) relax(i + n);
          if (iz > 0) relax(i - n * n);
          if (iz + 1 < n) relax(i + n * n);
          if (best < level[i]) {
            level[i] = best;
            changed = true;
          }
        }
  }
  double escape = std::numeric_limits<double>::infinity();
  for (std::size_t iz = 0; iz < n; ++iz)
    for (std::size_t iy = 0; iy < n; ++iy)
      for (std::size_t ix = 0; ix < n; ++ix)
        if (ix == 0 || iy == 0 || iz == 0 || ix + 1 == n || iy + 1 == n || iz + 1 == n)
          escape = std::min(escape, level[(iz * n + iy) * n + ix]);
  return escape;
}

Outcome oracle_equivalences() {
  Outcome o;
  const std::size_t n = 41;
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mismatches = 0;
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<double> v(n * n * n);
    for (std::size_t iz = 0; iz < n; ++iz)
      for (std::size_t iy = 0; iy < n; ++iy)
        for (std::size_t ix = 0; ix < n; ++ix) {
          const double dx = double(ix) - 20, dy = double(iy) - 20, dz = double(iz) - 20;
          v[(iz * n + iy) * n + ix] = 0.003 * (dx * dx + dy * dy + dz * dz) + u(rng);
        }
    const std::size_t start = (20 * n + 20) * n + 20;
    mismatches += escape_level(v, n, n, n, start).level != minimax_oracle(v, n, start);
  }
  o.require(mismatches == 0, fmt::format("flood fill vs minimax oracle on 41^3 grids: {} of 3 differ (exact)", mismatches));

  const double r0 = 80e-6;
  const QuadrupoleSource quad(1.0, r0, Vec3(0, r0, 0));
  const FitOptions fo;
  const double k = std::abs(fit_axis(quad, Vec3(0, r0, 0), Vec3::UnitY(), r0, fo.half_width_fraction * r0, fo.samples).k);
  o.require(std::abs(k - 1.0) <= 1e-3, fmt::format("quadrupole harmonicity fit k = {:.6f} (1.000 +- 0.001)", k));

  const PseudoField f(std::make_shared<QuadrupoleSource>(0.7, 90e-6), calcium(), DriveParams{});
  const double wh = hessian_frequency(f.grad_hess(Vec3::Zero()).hess(1, 1), calcium());
  const double w3 = radial_frequency(0.7, 90e-6, calcium(), f.drive());
  o.require(rel(wh, w3) < 1e-6, fmt::format("closed-form vs Hessian frequency on a quadrupole: rel dev {:.2e} (tol 1e-6)",
                                            rel(wh, w3)));
  return o;
}

// ------------------------------------------------------------------ 9

Outcome heating() {
  Outcome o;
  const TrapReport s = report(trap(Design::Surface), false);
  TrapReport g = report(trap(Design::GndSurface), false);
  TrapReport c = report(trap(Design::CrossRf), false);
  normalize_report(g, s);
  normalize_report(c, s);
  auto show = [](const std::optional<double>& x) { return x ? fmt::format("{:.4f}", *x) : std::string("NA"); };
  o.require(c.heating_norm && *c.heating_norm >= 0.05 && *c.heating_norm <= 0.2,
            fmt::format("cross-rf (h = {:.0f} um) heating relative to surface = {} (range [0.05, 0.2])",
                        c.h.value_or(0) * 1e6, show(c.heating_norm)));
  o.require(g.heating_norm && *g.heating_norm >= 0.25 && *g.heating_norm <= 1.0,
            fmt::format("gnd-surface (h = {:.0f} um) heating relative to surface = {} (range [0.25, 1.0])",
                        g.h.value_or(0) * 1e6, show(g.heating_norm)));
  return o;
}

const std::vector<std::pair<std::string, std::function<Outcome()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Outcome()>>> list = {
      {"drive frequency column", drive_frequency_column},
      {"power column", power_column},
      {"surface maximum frequency", surface_max_frequency},
      {"cross-rf symmetry d = h/2", cross_rf_symmetry},
      {"calibrated surface trap", calibrated_surface},
      {"trend suite", trends},
      {"solver validation", solver_validation},
      {"oracle equivalences", oracle_equivalences},
      {"heating ratios", heating},
  };
  return list;
}

bool run(std::size_t i) {
  const auto& [name, fn] = criteria()[i - 1];
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o.require(false, fmt::format("threw: {}", e.what()));
  }
  for (const auto& line : o.lines) fmt::print("{}\n", line);
  fmt::print("criterion {}: {} ({})\n", i, o.pass ? "PASS" : "FAIL", name);
  std::fflush(stdout);
  return o.pass;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 2) {
    fmt::print(stderr, "usage: {} [criterion 1-9]\n", argv[0]);
    return 2;
  }
  if (argc == 2) {
    const int i = std::atoi(argv[1]);
    if (i < 1 || i > 9) {
      fmt::print(stderr, "criterion must be 1-9\n");
      return 2;
    }
    return run(std::size_t(i)) ? 0 : 1;
  }
  bool all = true;
  for (std::size_t i = 1; i <= criteria().size(); ++i) all = run(i) && all;
  return all ? 0 : 1;
}
