#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "iontrap/box.hpp"
#include "iontrap/constants.hpp"
#include "iontrap/solver.hpp"

namespace iontrap {

struct IonSpecies {
  std::string label;
  double charge = 0.0;  // C
  double mass = 0.0;    // kg

  static IonSpecies calcium40();
};

/// Known species by label ("Ca40", "40Ca+", "Be9", ...). Throws InvalidInput.
IonSpecies species_by_name(std::string_view name);
std::vector<std::string> species_names();

struct DriveParams {
  double voltage = 10.0;                 // V_rf amplitude (V)
  double omega = 2.0 * kPi * 20e6;       // Omega_rf (rad/s)
  double phase = 0.0;                    // not used by the pseudopotential

  static DriveParams from_mhz(double voltage, double freq_mhz);
  double freq_mhz() const { return omega / (2.0 * kPi * 1e6); }
};

void validate(const IonSpecies& species);
void validate(const DriveParams& drive);

/// Source of the rf field per volt of drive amplitude (all rf electrodes
/// at 1 V, everything else grounded).
class RfFieldSource {
 public:
  virtual ~RfFieldSource() = default;
  virtual FieldSample sample(const Vec3& point, bool with_jacobian) const = 0;
  /// Geometry behind the field, if any.
  virtual const TrapGeometry* geometry() const { return nullptr; }
};

/// rf field of a solved electrode layout.
class BemRfSource final : public RfFieldSource {
 public:
  explicit BemRfSource(const SolvedTrap& solved);
  FieldSample sample(const Vec3& point, bool with_jacobian) const override;
  const TrapGeometry* geometry() const override { return &evaluator_.geometry(); }

 private:
  FieldEvaluator evaluator_;
};

/// Ideal radial quadrupole Phi = k/(2 r0^2) ((x-cx)^2 - (y-cy)^2) per volt,
/// optionally with a quartic term b4 (y-cy)^4 per volt along y.
class QuadrupoleSource final : public RfFieldSource {
 public:
  QuadrupoleSource(double k, double r0, Vec3 center = Vec3::Zero(), double b4 = 0.0);
  FieldSample sample(const Vec3& point, bool with_jacobian) const override;

 private:
  double c_;
  Vec3 center_;
  double b4_;
};

struct PseudoGradHess {
  double psi = 0.0;           // J
  Vec3 grad = Vec3::Zero();   // J/m
  Mat3 hess = Mat3::Zero();   // J/m^2
  double step = 0.0;          // differencing step actually used (m)
  std::vector<std::string> warnings;
};

/// Pseudopotential psi = e^2 V^2 |E1|^2 / (4 m Omega^2) with E1 the rf field
/// per volt. Immutable; evaluation is thread-safe.
class PseudoField {
 public:
  PseudoField(std::shared_ptr<const RfFieldSource> source, IonSpecies species, DriveParams drive);
  /// Convenience: wraps the solution in a BemRfSource.
  PseudoField(const SolvedTrap& solved, IonSpecies species, DriveParams drive);

  /// Energy per (V/m)^2 of physical field: e^2 / (4 m Omega^2).
  double energy_per_field2() const { return alpha_; }

  /// Physical rf field amplitude V_rf * E1 (V/m).
  Vec3 field(const Vec3& point) const;
  /// rf potential amplitude per volt.
  double unit_potential(const Vec3& point) const;

  double psi(const Vec3& point) const;  // J
  double psi_meV(const Vec3& point) const { return psi(point) / kMilliElectronVolt; }
  PseudoGradHess grad_hess(const Vec3& point, double step = 0.1e-6) const;

  const RfFieldSource& source() const { return *source_; }
  const TrapGeometry* geometry() const { return source_->geometry(); }
  const IonSpecies& species() const { return species_; }
  const DriveParams& drive() const { return drive_; }

 private:
  std::shared_ptr<const RfFieldSource> source_;
  IonSpecies species_;
  DriveParams drive_;
  double alpha_ = 0.0;  // e^2 / (4 m Omega^2)
};

inline double pseudo_at(const PseudoField& field, const Vec3& point) { return field.psi(point); }
inline PseudoGradHess pseudo_grad_hess(const PseudoField& field, const Vec3& point) { return field.grad_hess(point); }

/// Regular grid of psi values. Axes with zero extent have one node.
/// Values are row-major with x fastest: index = (iz * ny + iy) * nx + ix.
struct PseudoGrid {
  std::vector<double> x, y, z;  // node coordinates (m)
  std::vector<double> psi_meV;

  std::size_t nx() const { return x.size(); }
  std::size_t ny() const { return y.size(); }
  std::size_t nz() const { return z.size(); }
  std::size_t index(std::size_t ix, std::size_t iy, std::size_t iz) const { return (iz * ny() + iy) * nx() + ix; }
  Vec3 node(std::size_t ix, std::size_t iy, std::size_t iz) const { return Vec3(x[ix], y[iy], z[iz]); }
};

/// Region in which field values are meaningful: the wafer footprint in x
/// and z, and from the bottom wafer up to 5 mm or the top wafer in y.
Box simulation_volume(const TrapGeometry& geometry);

/// Node coordinates lo, lo + h, ... up to hi (inclusive within h/1000).
std::vector<double> grid_axis(double lo, double hi, double resolution);

PseudoGrid pseudo_map(const PseudoField& field, const Box& box, double resolution);

void write_grid_csv(const PseudoGrid& grid, std::ostream& out);
nlohmann::json grid_header(const PseudoGrid& grid, const PseudoField& field, const Box& box, double resolution);

}  // namespace iontrap
