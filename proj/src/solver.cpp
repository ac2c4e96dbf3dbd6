#include "iontrap/solver.hpp"

#include <cmath>

#include <Eigen/LU>
#include <fmt/core.h>

#include "iontrap/errors.hpp"

namespace iontrap {

std::vector<double> SolvedTrap::rf_unit_voltages() const {
  std::vector<double> v(geometry->electrodes.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (geometry->electrodes[i].role == ElectrodeRole::Rf) v[i] = 1.0;
  }
  return v;
}

Eigen::MatrixXd assemble_collocation(const TrapGeometry& geometry) {
  const auto n = static_cast<Eigen::Index>(geometry.panels.size());
  std::vector<PanelFrame> frames;
  std::vector<Vec3> centers;
  frames.reserve(geometry.panels.size());
  for (const auto& p : geometry.panels) {
    frames.emplace_back(p.rect);
    centers.push_back(p.rect.center());
  }
  Eigen::MatrixXd a(n, n);
  // Column-major storage: fill one source panel (column) at a time.
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) a(i, j) = panel_potential(frames[j], centers[i]);
  }
  return a;
}

SolvedTrap solve_unit_excitations(const TrapGeometry& geometry, const SolveOptions& options) {
  return solve_unit_excitations(std::make_shared<const TrapGeometry>(geometry), options);
}

SolvedTrap solve_unit_excitations(std::shared_ptr<const TrapGeometry> geometry, const SolveOptions& options) {
  const auto& g = *geometry;
  const std::string label(to_string(g.design));
  bool has_rf = false;
  for (const auto& e : g.electrodes) has_rf |= e.role == ElectrodeRole::Rf;
  if (!has_rf) throw InvalidGeometry(fmt::format("{} geometry has no rf electrode", label));
  if (g.panels.empty()) throw InvalidGeometry(fmt::format("{} geometry has no panels", label));
  check_no_overlap(g);

  const Eigen::MatrixXd a = assemble_collocation(g);
  const auto n = a.rows();
  const auto m = static_cast<Eigen::Index>(g.electrodes.size());

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const double rcond = lu.rcond();
  const double condition = rcond > 0.0 ? 1.0 / rcond : INFINITY;
  if (!(condition <= options.max_condition)) {
    throw SolverFailure(fmt::format("{} geometry: collocation matrix is ill-conditioned (condition ~ {:.3g})", label,
                                    condition));
  }

  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, m);
  for (Eigen::Index e = 0; e < m; ++e) {
    const auto& el = g.electrodes[static_cast<std::size_t>(e)];
    for (std::size_t p = el.panel_begin; p < el.panel_end; ++p) rhs(static_cast<Eigen::Index>(p), e) = 1.0;
  }
  Eigen::MatrixXd sigma = lu.solve(rhs);
  Eigen::MatrixXd residual = a * sigma - rhs;
  // One step of iterative refinement keeps the boundary residual at round-off.
  sigma -= lu.solve(residual);
  residual = a * sigma - rhs;

  SolvedTrap out;
  out.geometry = std::move(geometry);
  out.diagnostics.condition_estimate = condition;
  out.diagnostics.panel_count = static_cast<std::size_t>(n);
  for (Eigen::Index e = 0; e < m; ++e) {
    UnitSolution u;
    u.electrode_index = static_cast<std::size_t>(e);
    u.electrode = g.electrodes[u.electrode_index].name;
    u.panel_count = static_cast<std::size_t>(n);
    u.charge_density.assign(sigma.col(e).data(), sigma.col(e).data() + n);
    u.residual_norm = residual.col(e).cwiseAbs().maxCoeff();
    for (double s : u.charge_density) {
      if (!std::isfinite(s)) throw SolverFailure(fmt::format("{} geometry: non-finite charge density", label));
    }
    if (!(u.residual_norm < options.max_residual)) {
      throw SolverFailure(fmt::format("{} geometry: boundary residual {:.3g} V on electrode '{}'", label,
                                      u.residual_norm, u.electrode));
    }
    out.diagnostics.max_residual = std::max(out.diagnostics.max_residual, u.residual_norm);
    out.units.push_back(std::move(u));
  }
  return out;
}

FieldEvaluator::FieldEvaluator(const SolvedTrap& solved, std::span<const double> voltages)
    : geometry_(solved.geometry) {
  const auto& g = *geometry_;
  if (voltages.size() != g.electrodes.size()) {
    throw InvalidInput(fmt::format("expected {} electrode voltages, got {}", g.electrodes.size(), voltages.size()));
  }
  frames_.reserve(g.panels.size());
  for (const auto& p : g.panels) frames_.emplace_back(p.rect);
  density_.assign(g.panels.size(), 0.0);
  for (std::size_t e = 0; e < solved.units.size(); ++e) {
    const double v = voltages[solved.units[e].electrode_index];
    if (v == 0.0) continue;
    const auto& sigma = solved.units[e].charge_density;
    for (std::size_t p = 0; p < density_.size(); ++p) density_[p] += v * sigma[p];
  }
}

FieldSample FieldEvaluator::sample(const Vec3& point, bool with_jacobian) const {
  FieldSample s;
  s.point = point;
  for (std::size_t p = 0; p < frames_.size(); ++p) {
    const double sigma = density_[p];
    if (sigma == 0.0) continue;
    const KernelAll k = panel_kernel_all(frames_[p], point, with_jacobian);
    s.potential += sigma * k.potential;
    s.field += sigma * k.field.field;
    if (with_jacobian) s.jacobian += sigma * k.jacobian;
    if (k.field.on_sheet) {
      s.on_sheet = true;
      s.sheet_normal = frames_[p].e_n;
    }
  }
  return s;
}

FieldSample evaluate_field(const SolvedTrap& solved, std::span<const double> voltages, const Vec3& point) {
  return FieldEvaluator(solved, voltages).sample(point);
}

CapacitanceMatrix capacitance_matrix(const SolvedTrap& solved) {
  const auto& g = *solved.geometry;
  const auto m = static_cast<Eigen::Index>(g.electrodes.size());
  CapacitanceMatrix c;
  c.farads = Eigen::MatrixXd::Zero(m, m);
  for (const auto& e : g.electrodes) c.names.push_back(e.name);
  for (const auto& unit : solved.units) {
    const auto j = static_cast<Eigen::Index>(unit.electrode_index);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& el = g.electrodes[static_cast<std::size_t>(i)];
      double q = 0.0;
      for (std::size_t p = el.panel_begin; p < el.panel_end; ++p) q += unit.charge_density[p] * g.panels[p].rect.area();
      c.farads(i, j) = q;
    }
  }
  const double scale = c.farads.cwiseAbs().maxCoeff();
  c.symmetry_defect = scale > 0.0 ? (c.farads - c.farads.transpose()).cwiseAbs().maxCoeff() / scale : 0.0;
  return c;
}

double CapacitanceMatrix::rf_capacitance(const TrapGeometry& geometry) const {
  double total = 0.0;
  for (std::size_t i = 0; i < geometry.electrodes.size(); ++i) {
    if (geometry.electrodes[i].role != ElectrodeRole::Rf) continue;
    for (std::size_t j = 0; j < geometry.electrodes.size(); ++j) {
      if (geometry.electrodes[j].role != ElectrodeRole::Rf) continue;
      total += farads(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return total;
}

}  // namespace iontrap
