#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "iontrap/box.hpp"
#include "iontrap/geometry.hpp"
#include "iontrap/kernel.hpp"

namespace iontrap {

/// Surface charge on every panel when one electrode is held at 1 V and all
/// others at 0 V.
struct UnitSolution {
  std::string electrode;
  std::size_t electrode_index = 0;
  std::vector<double> charge_density;  // C/m^2 per panel
  double residual_norm = 0.0;          // max |A sigma - b| over collocation points (V)
  std::size_t panel_count = 0;
};

struct SolveDiagnostics {
  double condition_estimate = 0.0;  // 1-norm condition number estimate
  double max_residual = 0.0;
  std::size_t panel_count = 0;
  bool from_cache = false;
};

/// All unit excitations of one geometry.
struct SolvedTrap {
  std::shared_ptr<const TrapGeometry> geometry;
  std::vector<UnitSolution> units;  // one per electrode, in electrode order
  SolveDiagnostics diagnostics;

  /// Voltages with 1 V on every rf electrode and 0 V elsewhere.
  std::vector<double> rf_unit_voltages() const;
};

struct SolveOptions {
  double max_condition = 1e12;
  double max_residual = 1e-8;  // V
};

SolvedTrap solve_unit_excitations(std::shared_ptr<const TrapGeometry> geometry, const SolveOptions& options = {});
SolvedTrap solve_unit_excitations(const TrapGeometry& geometry, const SolveOptions& options = {});

/// Collocation matrix A[i][j] = potential at panel i's center from unit
/// density on panel j.
Eigen::MatrixXd assemble_collocation(const TrapGeometry& geometry);

struct FieldSample {
  Vec3 point = Vec3::Zero();
  double potential = 0.0;        // V
  Vec3 field = Vec3::Zero();     // V/m
  Mat3 jacobian = Mat3::Zero();  // dE_i/dx_j, V/m^2 (only if requested)
  bool on_sheet = false;         // principal value on a charged sheet
  Vec3 sheet_normal = Vec3::Zero();
};

/// Superposition of unit solutions for a fixed set of electrode voltages.
/// Immutable once built; evaluation is safe from multiple threads.
class FieldEvaluator {
 public:
  FieldEvaluator(const SolvedTrap& solved, std::span<const double> voltages);

  FieldSample sample(const Vec3& point, bool with_jacobian = false) const;
  double potential(const Vec3& point) const { return sample(point).potential; }
  Vec3 field(const Vec3& point) const { return sample(point).field; }

  const TrapGeometry& geometry() const { return *geometry_; }
  std::span<const double> combined_density() const { return density_; }

 private:
  std::shared_ptr<const TrapGeometry> geometry_;
  std::vector<PanelFrame> frames_;
  std::vector<double> density_;
};

/// evaluate_field: sum_i V_i * (unit field of electrode i) at `point`.
/// `voltages` must have one entry per electrode.
FieldSample evaluate_field(const SolvedTrap& solved, std::span<const double> voltages, const Vec3& point);

struct CapacitanceMatrix {
  std::vector<std::string> names;
  Eigen::MatrixXd farads;          // C[i][j]: charge on i for 1 V on j
  double symmetry_defect = 0.0;    // max |C_ij - C_ji| / max |C|

  /// Capacitance of the rf net (all rf electrodes tied together) to everything else.
  double rf_capacitance(const TrapGeometry& geometry) const;
};

CapacitanceMatrix capacitance_matrix(const SolvedTrap& solved);

}  // namespace iontrap
