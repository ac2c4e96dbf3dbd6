#pragma once

#include "iontrap/box.hpp"
#include "iontrap/geometry.hpp"

namespace iontrap {

/// Orthonormal local frame of a panel, precomputed for repeated kernel
/// evaluation. Local coordinates: s along edge_u in [0, a], t along edge_v
/// in [0, b], n along the normal.
struct PanelFrame {
  Vec3 origin;
  Vec3 e_u;
  Vec3 e_v;
  Vec3 e_n;
  double a = 0.0;
  double b = 0.0;

  PanelFrame() = default;
  explicit PanelFrame(const Rect& rect);

  Vec3 to_local(const Vec3& p) const {
    const Vec3 d = p - origin;
    return Vec3(d.dot(e_u), d.dot(e_v), d.dot(e_n));
  }
  Vec3 to_global(const Vec3& v) const { return v.x() * e_u + v.y() * e_v + v.z() * e_n; }
  Vec3 center() const { return origin + 0.5 * (a * e_u + b * e_v); }
  double area() const { return a * b; }
  bool covers_in_plane(const Vec3& local) const {
    return local.x() > 0.0 && local.x() < a && local.y() > 0.0 && local.y() < b;
  }
};

struct KernelField {
  Vec3 field = Vec3::Zero();  // V/m per C/m^2
  /// Point lies on the charged sheet itself; `field` then holds the
  /// principal value (mean of both sides) and the normal component jumps
  /// by sigma/eps0 across the sheet.
  bool on_sheet = false;
  /// Point lies on an edge line of the panel, where the tangential field
  /// diverges logarithmically; the returned value is clamped.
  bool on_edge = false;
};

/// Potential at `point` of the panel carrying unit surface charge density
/// (V per C/m^2). Closed-form integral of 1/(4 pi eps0 |r - r'|).
double panel_potential(const PanelFrame& panel, const Vec3& point);
double panel_potential(const Panel& panel, const Vec3& point);

KernelField panel_field(const PanelFrame& panel, const Vec3& point);
KernelField panel_field(const Panel& panel, const Vec3& point);

/// Spatial derivative dE_i/dx_j of panel_field (symmetric, traceless off
/// the sheet), in V/m^2 per C/m^2.
Mat3 panel_field_jacobian(const PanelFrame& panel, const Vec3& point);

/// Potential, field and Jacobian together; cheaper than three calls.
struct KernelAll {
  double potential = 0.0;
  KernelField field;
  Mat3 jacobian = Mat3::Zero();
};
KernelAll panel_kernel_all(const PanelFrame& panel, const Vec3& point, bool with_jacobian);

}  // namespace iontrap
