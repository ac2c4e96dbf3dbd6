#include "iontrap/kernel.hpp"

#include <cmath>

#include "iontrap/constants.hpp"

namespace iontrap {

PanelFrame::PanelFrame(const Rect& rect) : origin(rect.origin) {
  a = rect.edge_u.norm();
  b = rect.edge_v.norm();
  e_u = rect.edge_u / a;
  e_v = rect.edge_v / b;
  e_n = e_u.cross(e_v);
}

namespace {

// Corner quantities in the panel frame. With the field point at local
// (x, y, z), corner offsets are U in {-x, a - x} and W in {-y, b - y}; the
// rectangle integrals are signed corner sums
//   sum(f) = f(U2,W2) - f(U1,W2) - f(U2,W1) + f(U1,W1).
struct Corners {
  double U[2];
  double W[2];
  double z;
  double R[2][2];   // R[i][j] = |(U_i, W_j, z)|
  double rho_u[2];  // |(U_i, z)|, distance to the edge line s = const
  double rho_w[2];  // |(W_j, z)|
  bool on_edge = false;

  Corners(const PanelFrame& p, const Vec3& local) {
    U[0] = -local.x();
    U[1] = p.a - local.x();
    W[0] = -local.y();
    W[1] = p.b - local.y();
    z = local.z();
    const double tiny = 1e-12 * (p.a + p.b);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) R[i][j] = std::sqrt(U[i] * U[i] + W[j] * W[j] + z * z);
    }
    for (int i = 0; i < 2; ++i) {
      rho_u[i] = std::hypot(U[i], z);
      if (rho_u[i] == 0.0) {
        if (W[0] < 0.0 && W[1] > 0.0) on_edge = true;
        rho_u[i] = tiny;
      }
      rho_w[i] = std::hypot(W[i], z);
      if (rho_w[i] == 0.0) {
        if (U[0] < 0.0 && U[1] > 0.0) on_edge = true;
        rho_w[i] = tiny;
      }
    }
  }

  // (W1/R1 - W2/R2) / rho^2 along the edge line at U_i, written to avoid
  // cancellation when both W have the same sign.
  double q_u(int i) const {
    const double w1 = W[0], w2 = W[1];
    const double r1 = R[i][0], r2 = R[i][1];
    const double den = w1 * r2 + w2 * r1;
    if (w1 * w2 > 0.0 && den != 0.0) return (w1 * w1 - w2 * w2) / (r1 * r2 * den);
    const double rho2 = rho_u[i] * rho_u[i];
    return (w1 / r1 - w2 / r2) / rho2;
  }

  double q_w(int j) const {
    const double u1 = U[0], u2 = U[1];
    const double r1 = R[0][j], r2 = R[1][j];
    const double den = u1 * r2 + u2 * r1;
    if (u1 * u2 > 0.0 && den != 0.0) return (u1 * u1 - u2 * u2) / (r1 * r2 * den);
    const double rho2 = rho_w[j] * rho_w[j];
    return (u1 / r1 - u2 / r2) / rho2;
  }
};

double corner_sum(const double f[2][2]) { return f[1][1] - f[0][1] - f[1][0] + f[0][0]; }

double potential_sum(const Corners& c) {
  double f[2][2];
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double u = c.U[i];
      const double w = c.W[j];
      // U log(W + R) + W log(U + R) - z atan(UW / (zR)), with
      // log(W + R) = asinh(W / rho_u) + log(rho_u).
      double v = 0.0;
      if (u != 0.0) v += u * (std::asinh(w / c.rho_u[i]) + std::log(c.rho_u[i]));
      if (w != 0.0) v += w * (std::asinh(u / c.rho_w[j]) + std::log(c.rho_w[j]));
      if (c.z != 0.0) v -= c.z * std::atan(u * w / (c.z * c.R[i][j]));
      f[i][j] = v;
    }
  }
  return corner_sum(f);
}

Vec3 field_sum(const Corners& c) {
  // E_u: difference over U of log((W2 + R)/(W1 + R)).
  double eu = 0.0;
  double ev = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double sign = i == 1 ? 1.0 : -1.0;
    eu += sign * (std::asinh(c.W[1] / c.rho_u[i]) - std::asinh(c.W[0] / c.rho_u[i]));
    ev += sign * (std::asinh(c.U[1] / c.rho_w[i]) - std::asinh(c.U[0] / c.rho_w[i]));
  }
  double en = 0.0;
  if (c.z != 0.0) {
    double f[2][2];
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) f[i][j] = std::atan(c.U[i] * c.W[j] / (c.z * c.R[i][j]));
    }
    en = corner_sum(f);
  }
  return Vec3(eu, ev, en);
}

Mat3 jacobian_sum(const Corners& c) {
  double juu = 0.0, jun = 0.0, jvv = 0.0, jvn = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double sign = i == 1 ? 1.0 : -1.0;
    const double qu = c.q_u(i);
    juu -= sign * c.U[i] * qu;
    jun += sign * c.z * qu;
    const double qw = c.q_w(i);
    jvv -= sign * c.W[i] * qw;
    jvn += sign * c.z * qw;
  }
  double inv_r[2][2];
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) inv_r[i][j] = 1.0 / c.R[i][j];
  }
  const double juv = -corner_sum(inv_r);
  Mat3 j;
  j << juu, juv, jun,
       juv, jvv, jvn,
       jun, jvn, -(juu + jvv);
  return j;
}

double coulomb_factor() { return 1.0 / (4.0 * kPi * kernel_permittivity()); }

}  // namespace

double panel_potential(const PanelFrame& panel, const Vec3& point) {
  const Corners c(panel, panel.to_local(point));
  return coulomb_factor() * potential_sum(c);
}

double panel_potential(const Panel& panel, const Vec3& point) { return panel_potential(PanelFrame(panel.rect), point); }

KernelField panel_field(const PanelFrame& panel, const Vec3& point) {
  const Vec3 local = panel.to_local(point);
  const Corners c(panel, local);
  KernelField out;
  out.field = panel.to_global(coulomb_factor() * field_sum(c));
  out.on_sheet = local.z() == 0.0 && panel.covers_in_plane(local);
  out.on_edge = c.on_edge;
  return out;
}

KernelField panel_field(const Panel& panel, const Vec3& point) { return panel_field(PanelFrame(panel.rect), point); }

Mat3 panel_field_jacobian(const PanelFrame& panel, const Vec3& point) {
  const Corners c(panel, panel.to_local(point));
  Mat3 rot;
  rot.col(0) = panel.e_u;
  rot.col(1) = panel.e_v;
  rot.col(2) = panel.e_n;
  return coulomb_factor() * (rot * jacobian_sum(c) * rot.transpose());
}

KernelAll panel_kernel_all(const PanelFrame& panel, const Vec3& point, bool with_jacobian) {
  const Vec3 local = panel.to_local(point);
  const Corners c(panel, local);
  const double k = coulomb_factor();
  KernelAll out;
  out.potential = k * potential_sum(c);
  out.field.field = panel.to_global(k * field_sum(c));
  out.field.on_sheet = local.z() == 0.0 && panel.covers_in_plane(local);
  out.field.on_edge = c.on_edge;
  if (with_jacobian) {
    Mat3 rot;
    rot.col(0) = panel.e_u;
    rot.col(1) = panel.e_v;
    rot.col(2) = panel.e_n;
    out.jacobian = k * (rot * jacobian_sum(c) * rot.transpose());
  }
  return out;
}

}  // namespace iontrap
