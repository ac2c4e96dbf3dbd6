#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "iontrap/box.hpp"
#include "iontrap/pseudopotential.hpp"

namespace iontrap {

// Working point used to scale q with harmonicity.
inline constexpr double kSurfaceQ = 0.250;
inline constexpr double kSurfaceK = 0.210;

// ---------------------------------------------------------------- rf null

/// The null is searched on the segment through `box` parallel to y at the
/// box's x and z center, then polished in the x-y plane.
struct NullSearchRegion {
  Box box;
  double scan_step = 1e-6;
  double reference_height = 0.0;  // d is measured from here (bottom wafer)
};

/// x = 0, z = 0, from just above the bottom wafer to just below the top wafer
/// (multi-wafer) or the top of the fine-mesh region (surface).
NullSearchRegion default_null_region(const TrapGeometry& geometry);

struct NullResult {
  Vec3 r_null = Vec3::Zero();
  double d = 0.0;             // height above the reference (m)
  double psi = 0.0;           // J
  double grad_norm = 0.0;     // |grad psi| at r_null (J/m)
  double grad_tolerance = 0.0;
  double psi_scale = 0.0;     // max psi on the scan line (J)
  int polish_iterations = 0;
  std::size_t scan_points = 0;
  std::vector<Vec3> candidates;  // polished local minima found on the scan
};

NullResult find_rf_null(const PseudoField& field, const NullSearchRegion& region);

// ---------------------------------------------------------- harmonicity

struct AxisFit {
  Vec3 axis = Vec3::UnitY();
  double k = 0.0;           // 2 c r0^2 / V, signed
  double k_stderr = 0.0;
  double curvature = 0.0;   // c, V/m^2 per volt
  double half_width = 0.0;  // m
  std::size_t samples = 0;
  double rms_residual = 0.0;       // V per volt
  double relative_residual = 0.0;  // rms residual / quadratic swing
  bool residual_warning = false;
};

struct FitOptions {
  double half_width_fraction = 0.2;  // of r0
  std::size_t samples = 1001;       // at least 41
  double residual_warning = 1e-3;    // relative residual flagging a poor fit
};

/// Least-squares quadratic a + b t + c t^2 of the rf potential per volt
/// along `axis` through `center`; k = 2 c r0^2.
AxisFit fit_axis(const RfFieldSource& source, const Vec3& center, const Vec3& axis, double r0, double half_width,
                 std::size_t samples, double residual_warning = 1e-3);

enum class FitAxis { X, Y, Diagonal };
FitAxis primary_fit_axis(Design design);

struct HarmonicityResult {
  AxisFit x, y, diagonal;  // diagonal is (1, 1, 0)/sqrt(2)
  FitAxis primary = FitAxis::Y;
  double r0 = 0.0;

  const AxisFit& primary_fit() const;
  double k() const { return std::abs(primary_fit().k); }
  double k_stderr() const { return primary_fit().k_stderr; }
  bool residual_warning() const { return x.residual_warning || y.residual_warning || diagonal.residual_warning; }
};

/// r0 is the ion height d.
HarmonicityResult fit_harmonicity(const PseudoField& field, const NullResult& null, FitAxis primary,
                                  const FitOptions& options = {});

// ----------------------------------------------------------- trap depth

/// Escape level on a 6-connected grid (x fastest): the smallest threshold at
/// which the region connected to `start` reaches the grid boundary.
struct EscapeLevel {
  double level = 0.0;
  std::size_t bottleneck = 0;  // node where the level is attained
  std::size_t exit = 0;        // first boundary node reached
  bool bottleneck_on_boundary = false;
};
EscapeLevel escape_level(std::span<const double> values, std::size_t nx, std::size_t ny, std::size_t nz,
                         std::size_t start);

struct DepthOptions {
  std::optional<Box> box;    // default: default_depth_box
  double resolution = 5e-6;
  bool polish = true;
};

/// Fine-mesh region in the z = 0 plane, trimmed to the space between the wafers.
Box default_depth_box(const TrapGeometry& geometry, double resolution);

struct DepthResult {
  double depth = 0.0;           // J
  double saddle_psi = 0.0;      // J
  Vec3 saddle = Vec3::Zero();
  Vec3 escape_direction = Vec3::Zero();
  bool boundary_limited = false;  // no saddle inside the box; depth is a lower bound
  bool zero_depth = false;        // null region already touches the boundary
  bool saddle_polished = false;
  int negative_eigenvalues = -1;  // of the in-box Hessian at the saddle
  Box box;
  double resolution = 0.0;
  std::size_t grid_nodes = 0;

  double depth_meV() const { return depth / kMilliElectronVolt; }
};

DepthResult trap_depth(const PseudoField& field, const NullResult& null, const DepthOptions& options = {});

// ---------------------------------------------- frequency and drive formulas

/// Secular frequency omega = V k e / (sqrt 2 m Omega r0^2).
double radial_frequency(double k, double r0, const IonSpecies& species, const DriveParams& drive);
/// sqrt(H / m) for a pseudopotential curvature H (J/m^2).
double hessian_frequency(double curvature, const IonSpecies& species);

struct StabilityQ {
  double from_drive = 0.0;      // 2 e V k / (m Omega^2 r0^2)
  double from_frequency = 0.0;  // 2 sqrt 2 omega / Omega
};
StabilityQ stability_q(double k, double r0, const IonSpecies& species, const DriveParams& drive);

struct OperatingQ {
  double q = 0.0;
  bool clamped = false;
};
/// q = 0.250 k / 0.210, clamped to 1.
OperatingQ operating_q(double k);

struct MaxFrequency {
  double omega_max = 0.0;  // rad/s
  double drive_omega = 0.0;
  double q = 0.0;
  bool q_clamped = false;
};
MaxFrequency max_frequency(double k, double r0, const IonSpecies& species, double voltage);

struct DriveRequirement {
  double voltage = 0.0;  // V
  double omega = 0.0;    // rad/s
};
DriveRequirement drive_for_target(double k, double r0, const IonSpecies& species, double omega_target, double q);

/// Heating rate relative to a reference, scaling as omega^-2 d^-4.
double heating_norm(double omega, double d, double omega_ref, double d_ref);
/// Electrical power relative to a reference, scaling as V^2 Omega^2.
double power_norm(double voltage, double omega, double voltage_ref, double omega_ref);

// --------------------------------------------------------------- report

struct TrapReport {
  std::string geometry;  // design label
  std::optional<double> h;  // m
  IonSpecies species;
  DriveParams drive;
  double target_omega = 0.0;

  std::optional<double> d;  // m
  std::optional<Vec3> r_null;
  std::optional<double> k_x, k_y, k_diagonal, k, k_stderr;
  std::optional<double> depth_meV;
  std::optional<Vec3> saddle;
  std::optional<bool> depth_boundary_limited;
  std::optional<double> omega_rad;      // secular frequency at the drive (rad/s)
  std::optional<double> omega_hessian;  // Hessian route along the fit axis
  std::optional<double> q_drive;        // stability parameter at the drive
  std::optional<double> q;              // operating q
  std::optional<bool> q_clamped;
  std::optional<double> omega_max;      // at the drive voltage and operating q
  std::optional<double> V_rf;           // drive for the target frequency
  std::optional<double> Omega_rf;
  std::optional<double> heating_norm;
  std::optional<double> power_norm;
  std::optional<double> rf_capacitance;  // F

  std::map<std::string, std::string> not_computed;  // field -> reason
  std::vector<std::string> warnings;
  SolveDiagnostics solve;
};

struct ReportOptions {
  double target_omega = 2.0 * kPi * 10e6;
  std::optional<NullSearchRegion> null_region;
  FitOptions fit;
  DepthOptions depth;
  bool compute_depth = true;
  bool compute_capacitance = true;
  /// Normalizes heating_norm and power_norm; without it they are not computed.
  const TrapReport* reference = nullptr;
  std::optional<std::filesystem::path> cache_dir;
};

TrapReport full_report(const SolvedTrap& solved, const IonSpecies& species, const DriveParams& drive,
                       const ReportOptions& options = {});
TrapReport full_report(std::shared_ptr<const TrapGeometry> geometry, const IonSpecies& species,
                       const DriveParams& drive, const ReportOptions& options = {});

/// Fills heating_norm and power_norm of `report` against `reference`.
void normalize_report(TrapReport& report, const TrapReport& reference);

nlohmann::json report_to_json(const TrapReport& report);
/// Table-shaped row: geometry,d_um,k,q,omega_MHz,V_kV,Omega_MHz,P_norm
std::string report_csv_header();
std::string report_csv_row(const TrapReport& report);

}  // namespace iontrap
