#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "commands.hpp"
#include "iontrap/constants.hpp"
#include "iontrap/figures_of_merit.hpp"
#include "iontrap/kernel.hpp"
#include "iontrap/solver.hpp"

namespace iontrap::cli {

namespace {

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

PanelFrame unit_square(double side) { return PanelFrame(Rect{Vec3::Zero(), Vec3(side, 0, 0), Vec3(0, side, 0)}); }

// Random point outside the panel plane, between 0.2 and 3 sides away.
Vec3 random_point(std::mt19937_64& rng, double side) {
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  std::uniform_real_distribution<double> n(0.2, 3.0);
  std::bernoulli_distribution sign;
  return Vec3(u(rng) * side, u(rng) * side, (sign(rng) ? 1 : -1) * n(rng) * side);
}

Check far_field_potential() {
  const double a = 1e-6;
  const PanelFrame p = unit_square(a);
  double worst = 0.0;
  for (const Vec3& dir : {Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(1, 1, 1).normalized(), Vec3(-1, 2, 0.5).normalized()}) {
    const Vec3 r = p.center() + 100.0 * a * dir;
    const double point = a * a / (4.0 * kPi * kVacuumPermittivity * (r - p.center()).norm());
    worst = std::max(worst, rel(panel_potential(p, r), point));
  }
  return {"kernel.far_field_potential", worst < 1e-3, fmt::format("max rel err {:.2e} (tol 1e-3)", worst)};
}

Check far_field_field() {
  const double a = 1e-6;
  const PanelFrame p = unit_square(a);
  double worst = 0.0;
  for (const Vec3& dir : {Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(1, 1, 1).normalized()}) {
    const Vec3 d = 100.0 * a * dir;
    const Vec3 point = a * a / (4.0 * kPi * kVacuumPermittivity * std::pow(d.norm(), 3)) * d;
    worst = std::max(worst, (panel_field(p, p.center() + d).field - point).norm() / point.norm());
  }
  return {"kernel.far_field_field", worst < 1e-3, fmt::format("max rel err {:.2e} (tol 1e-3)", worst)};
}

Check self_term() {
  const double a = 3e-6;
  const PanelFrame p = unit_square(a);
  const double exact = a / (kPi * kVacuumPermittivity) * std::log(1.0 + std::sqrt(2.0));
  const double err = rel(panel_potential(p, p.center()), exact);
  return {"kernel.square_self_potential", err < 1e-10, fmt::format("rel err {:.2e} (tol 1e-10)", err)};
}

Check field_vs_fd() {
  const double a = 1e-6;
  const PanelFrame p = unit_square(a);
  std::mt19937_64 rng(7);
  double worst = 0.0;
  const double h = 1e-5 * a;
  for (int i = 0; i < 100; ++i) {
    const Vec3 r = random_point(rng, a);
    Vec3 fd;
    for (int j = 0; j < 3; ++j) {
      const Vec3 e = h * Vec3::Unit(j);
      fd[j] = -(panel_potential(p, r + e) - panel_potential(p, r - e)) / (2.0 * h);
    }
    const Vec3 f = panel_field(p, r).field;
    worst = std::max(worst, (f - fd).norm() / f.norm());
  }
  return {"kernel.field_vs_finite_difference", worst < 1e-6,
          fmt::format("max rel err {:.2e} over 100 points (tol 1e-6)", worst)};
}

Check jacobian_vs_fd() {
  const double a = 1e-6;
  const PanelFrame p = unit_square(a);
  std::mt19937_64 rng(11);
  double worst = 0.0;
  const double h = 1e-5 * a;
  for (int i = 0; i < 100; ++i) {
    const Vec3 r = random_point(rng, a);
    Mat3 fd;
    for (int j = 0; j < 3; ++j) {
      const Vec3 e = h * Vec3::Unit(j);
      fd.col(j) = (panel_field(p, r + e).field - panel_field(p, r - e).field) / (2.0 * h);
    }
    const Mat3 jac = panel_field_jacobian(p, r);
    worst = std::max(worst, (jac - fd).norm() / jac.norm());
  }
  return {"kernel.jacobian_vs_finite_difference", worst < 1e-6,
          fmt::format("max rel err {:.2e} over 100 points (tol 1e-6)", worst)};
}

// Two square plates of side L at gap L/20, elements the size of the gap.
SolvedTrap parallel_plates() {
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
  return solve_unit_excitations(refine_mesh(t, mesh, everywhere));
}

std::vector<Check> plate_checks() {
  const SolvedTrap s = parallel_plates();
  const CapacitanceMatrix c = capacitance_matrix(s);
  const double side = 1e-3, gap = side / 20.0;
  const double c0 = kVacuumPermittivity * side * side / gap;
  // Two-terminal capacitance with the plates at +-0.5 V.
  const double two_terminal = 0.25 * (c.farads(0, 0) + c.farads(1, 1) - c.farads(0, 1) - c.farads(1, 0));
  const double ratio = gap / (kPi * side) * (1.0 + std::log(2.0 * kPi * side / gap));
  const double palmer = c0 * (1.0 + ratio) * (1.0 + ratio);
  return {
      {"bem.boundary_residual", s.diagnostics.max_residual < 1e-8,
       fmt::format("max residual {:.2e} V (tol 1e-8)", s.diagnostics.max_residual)},
      {"bem.parallel_plate_fringing", rel(two_terminal, palmer) < 0.05,
       fmt::format("C = {:.4f} eps0 A/g vs Palmer {:.4f} (tol 5%)", two_terminal / c0, palmer / c0)},
      {"bem.capacitance_symmetry", c.symmetry_defect < 0.01,
       fmt::format("defect {:.2e} (tol 1e-2)", c.symmetry_defect)},
  };
}

PseudoField quadrupole(double k, double r0, Vec3 center, double b4 = 0.0) {
  return PseudoField(std::make_shared<QuadrupoleSource>(k, r0, center, b4), IonSpecies::calcium40(),
                     DriveParams::from_mhz(10.0, 20.0));
}

Check pseudo_hand_value() {
  const double r0 = 100e-6;
  const PseudoField f = quadrupole(1.0, r0, Vec3::Zero());
  const Vec3 r(3e-6, 4e-6, 0);
  const double c = 1.0 / (2.0 * r0 * r0);
  const double m = IonSpecies::calcium40().mass;
  const double omega = 2.0 * kPi * 20e6;
  const double e = kElementaryCharge;
  const double exact = e * e * 100.0 * 4.0 * c * c * r.squaredNorm() / (4.0 * m * omega * omega);
  const double err = rel(f.psi(r), exact);
  return {"pseudo.quadrupole_hand_value", err < 1e-12, fmt::format("rel err {:.2e} (tol 1e-12)", err)};
}

Check pseudo_gradient() {
  const double r0 = 100e-6;
  const PseudoField f = quadrupole(0.8, r0, Vec3::Zero(), 3e8);
  const Vec3 r(7e-6, -12e-6, 1e-6);
  const PseudoGradHess gh = f.grad_hess(r);
  const double h = 1e-9;
  Vec3 fd;
  for (int j = 0; j < 3; ++j) {
    const Vec3 e = h * Vec3::Unit(j);
    fd[j] = (f.psi(r + e) - f.psi(r - e)) / (2.0 * h);
  }
  const double err = (gh.grad - fd).norm() / gh.grad.norm();
  return {"pseudo.gradient_vs_finite_difference", err < 1e-6, fmt::format("rel err {:.2e} (tol 1e-6)", err)};
}

Check quadrupole_fit() {
  const double r0 = 80e-6;
  const QuadrupoleSource q(1.0, r0, Vec3(0, r0, 0));
  const FitOptions o;
  const AxisFit fit = fit_axis(q, Vec3(0, r0, 0), Vec3::UnitY(), r0, o.half_width_fraction * r0, o.samples);
  const double k = std::abs(fit.k);
  return {"fit.quadrupole_harmonicity", std::abs(k - 1.0) < 1e-3,
          fmt::format("k = {:.6f} (expect 1.000 +- 0.001)", k)};
}

Check quadrupole_null() {
  const Vec3 center(0, 50e-6, 0);
  const PseudoField f = quadrupole(1.0, 50e-6, center);
  NullSearchRegion region;
  region.box.lo = Vec3(0, 10e-6, 0);
  region.box.hi = Vec3(0, 120e-6, 0);
  const NullResult n = find_rf_null(f, region);
  const double err = (n.r_null - center).norm();
  return {"null.quadrupole_center", err < 1e-9, fmt::format("|r_null - center| = {:.2e} m (tol 1e-9)", err)};
}

Check eq3_vs_hessian() {
  const double r0 = 90e-6, k = 0.7;
  const PseudoField f = quadrupole(k, r0, Vec3::Zero());
  const PseudoGradHess gh = f.grad_hess(Vec3::Zero());
  const double wh = hessian_frequency(gh.hess(1, 1), f.species());
  const double w3 = radial_frequency(k, r0, f.species(), f.drive());
  const double err = rel(wh, w3);
  return {"freq.closed_form_vs_hessian", err < 1e-6, fmt::format("rel err {:.2e} (tol 1e-6)", err)};
}

// Minimax path value by repeated relaxation; independent of the priority queue.
double minimax_oracle(const std::vector<double>& v, std::size_t n, std::size_t start) {
  std::vector<double> level(v.size(), std::numeric_limits<double>::infinity());
  level[start] = v[start];
  bool changed = true;
  while (changed) {
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

Check flood_fill() {
  const std::size_t n = 21;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mismatches = 0;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> v(n * n * n);
    for (std::size_t iz = 0; iz < n; ++iz)
      for (std::size_t iy = 0; iy < n; ++iy)
        for (std::size_t ix = 0; ix < n; ++ix) {
          const double dx = double(ix) - 10, dy = double(iy) - 10, dz = double(iz) - 10;
          v[(iz * n + iy) * n + ix] = 0.01 * (dx * dx + dy * dy + dz * dz) + u(rng);
        }
    const std::size_t start = (10 * n + 10) * n + 10;
    if (escape_level(v, n, n, n, start).level != minimax_oracle(v, n, start)) ++mismatches;
  }
  return {"depth.flood_fill_vs_minimax_oracle", mismatches == 0,
          fmt::format("{} mismatches in 5 random 21^3 grids (exact)", mismatches)};
}

Check q_identity() {
  const IonSpecies ca = IonSpecies::calcium40();
  const DriveParams drive = DriveParams::from_mhz(150.0, 30.0);
  const StabilityQ q = stability_q(0.4, 100e-6, ca, drive);
  const double err = rel(q.from_frequency, q.from_drive);
  return {"freq.stability_q_identity", err < 1e-12, fmt::format("rel err {:.2e} (tol 1e-12)", err)};
}

Check omega_column() {
  const IonSpecies ca = IonSpecies::calcium40();
  const double target = 2.0 * kPi * 10e6;
  const double qs[] = {0.250, 0.333, 0.905};
  const double listed[] = {110.0, 85.0, 31.0};
  double worst = 0.0;
  std::string values;
  for (int i = 0; i < 3; ++i) {
    const double mhz = drive_for_target(0.21, 90e-6, ca, target, qs[i]).omega / (2.0 * kPi * 1e6);
    worst = std::max(worst, rel(mhz, listed[i]));
    values += fmt::format("{}{:.1f}", i ? "/" : "", mhz);
  }
  return {"table.drive_frequency_column", worst < 0.03,
          fmt::format("Omega = {} MHz, max dev {:.1f}% (tol 3%)", values, 100 * worst)};
}

Check power_column() {
  const double ref_v = 15e3, ref_w = 110.0;
  const double gnd = power_norm(4.0e3, 85.0, ref_v, ref_w);
  const double cross = power_norm(0.42e3, 31.0, ref_v, ref_w);
  const double worst = std::max(rel(gnd, 4.0e-2), rel(cross, 6.1e-5));
  return {"table.power_column", worst < 0.05,
          fmt::format("P = {:.3e} / {:.3e} vs 4.0e-2 / 6.1e-5, max dev {:.1f}% (tol 5%)", gnd, cross, 100 * worst)};
}

Check max_frequency_point() {
  const MaxFrequency m = max_frequency(0.210, 90e-6, IonSpecies::calcium40(), 10.0);
  const double mhz = m.omega_max / (2.0 * kPi * 1e6);
  return {"freq.surface_max_frequency", rel(mhz, 1.0) < 0.02, fmt::format("{:.4f} MHz vs 1.00 (tol 2%)", mhz)};
}

}  // namespace

int cmd_validate(const CommonOptions&, const ValidateOptions& opts) {
  std::unique_ptr<testing::ScopedPermittivityScale> fault;
  if (opts.eps0_scale != 1.0) fault = std::make_unique<testing::ScopedPermittivityScale>(opts.eps0_scale);

  const std::vector<std::function<std::vector<Check>()>> suite = {
      [] { return std::vector{far_field_potential()}; },
      [] { return std::vector{far_field_field()}; },
      [] { return std::vector{self_term()}; },
      [] { return std::vector{field_vs_fd()}; },
      [] { return std::vector{jacobian_vs_fd()}; },
      plate_checks,
      [] { return std::vector{pseudo_hand_value()}; },
      [] { return std::vector{pseudo_gradient()}; },
      [] { return std::vector{quadrupole_fit()}; },
      [] { return std::vector{quadrupole_null()}; },
      [] { return std::vector{eq3_vs_hessian()}; },
      [] { return std::vector{flood_fill()}; },
      [] { return std::vector{q_identity()}; },
      [] { return std::vector{omega_column()}; },
      [] { return std::vector{power_column()}; },
      [] { return std::vector{max_frequency_point()}; },
  };

  std::vector<Check> results;
  for (const auto& run : suite) {
    try {
      for (auto& c : run()) results.push_back(std::move(c));
    } catch (const std::exception& e) {
      results.push_back({"(check threw)", false, e.what()});
    }
  }
  std::size_t passed = 0;
  for (const auto& c : results) {
    passed += c.pass;
    if (opts.verbose || !c.pass) {
      fmt::print("{:4}  {:<40} {}\n", c.pass ? "PASS" : "FAIL", c.name, c.detail);
    } else {
      fmt::print("{:4}  {}\n", "PASS", c.name);
    }
  }
  fmt::print("{}/{} checks passed\n", passed, results.size());
  return passed == results.size() ? kExitOk : kExitFailure;
}

}  // namespace iontrap::cli
