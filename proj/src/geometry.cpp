#include "iontrap/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/core.h>

#include "iontrap/errors.hpp"

namespace iontrap {

std::string_view to_string(ElectrodeRole role) {
  switch (role) {
    case ElectrodeRole::Rf: return "rf";
    case ElectrodeRole::Dc: return "dc";
    case ElectrodeRole::Ground: return "ground";
  }
  return "ground";
}

std::string_view to_string(Design design) {
  switch (design) {
    case Design::Surface: return "surface";
    case Design::GndSurface: return "gnd-surface";
    case Design::CrossRf: return "cross-rf";
    case Design::Custom: return "custom";
  }
  return "custom";
}

ElectrodeRole parse_role(std::string_view text) {
  if (text == "rf") return ElectrodeRole::Rf;
  if (text == "dc") return ElectrodeRole::Dc;
  if (text == "ground" || text == "gnd") return ElectrodeRole::Ground;
  throw InvalidInput(fmt::format("unknown electrode role '{}'", text));
}

Design parse_design(std::string_view text) {
  if (text == "surface") return Design::Surface;
  if (text == "gnd-surface" || text == "gnd_surface") return Design::GndSurface;
  if (text == "cross-rf" || text == "cross_rf") return Design::CrossRf;
  if (text == "custom") return Design::Custom;
  throw InvalidInput(fmt::format("unknown design '{}'", text));
}

Box Rect::bounds() const {
  Vec3 a = origin;
  Vec3 b = origin + edge_u;
  Vec3 c = origin + edge_v;
  Vec3 d = origin + edge_u + edge_v;
  return Box{a.cwiseMin(b).cwiseMin(c).cwiseMin(d), a.cwiseMax(b).cwiseMax(c).cwiseMax(d)};
}

double Electrode::area() const {
  double total = 0.0;
  for (const auto& r : outline) total += r.area();
  return total;
}

std::optional<std::size_t> TrapGeometry::find_electrode(std::string_view name) const {
  for (std::size_t i = 0; i < electrodes.size(); ++i) {
    if (electrodes[i].name == name) return i;
  }
  return std::nullopt;
}

Box TrapGeometry::bounds() const {
  Box b{Vec3::Constant(INFINITY), Vec3::Constant(-INFINITY)};
  for (const auto& e : electrodes) {
    for (const auto& r : e.outline) {
      Box rb = r.bounds();
      b.lo = b.lo.cwiseMin(rb.lo);
      b.hi = b.hi.cwiseMax(rb.hi);
    }
  }
  return b;
}

double TrapGeometry::bottom_wafer_height() const { return bounds().lo.y(); }
double TrapGeometry::top_wafer_height() const { return bounds().hi.y(); }

GeometryParams default_params(Design design) {
  GeometryParams p;
  p.design = design;
  return p;
}

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InvalidGeometry(fmt::format("{} must be positive (got {} m)", name, value));
  }
}

void validate_mesh(const MeshParams& mesh) {
  require_positive(mesh.fine_element, "mesh.fine_element");
  require_positive(mesh.coarse_element, "mesh.coarse_element");
  if (mesh.fine_element > mesh.coarse_element) {
    throw InvalidGeometry("mesh.fine_element must not exceed mesh.coarse_element");
  }
  if (!(mesh.grading >= 0.0)) throw InvalidGeometry("mesh.grading must be non-negative");
  if ((mesh.fine_region_size.array() <= 0.0).any()) {
    throw InvalidGeometry("mesh fine region must be nonempty");
  }
}

void validate_lateral(const GeometryParams& p) {
  require_positive(p.rf_width, "rf_width");
  require_positive(p.center_width, "center_width");
  require_positive(p.gap, "gap");
  require_positive(p.electrode_length, "electrode_length");
  require_positive(p.wafer_extent, "wafer_extent");
  validate_mesh(p.mesh);
}

// Strip x in [x0, x1] lying in the plane y = height, spanning the trap axis.
Rect strip(double x0, double x1, double height, double length) {
  return Rect{Vec3(x0, height, -0.5 * length), Vec3(0.0, 0.0, length), Vec3(x1 - x0, 0.0, 0.0)};
}

// Strip y in [y0, y1] in the plane x = x, spanning the trap axis.
Rect wall(double x, double y0, double y1, double length) {
  return Rect{Vec3(x, y0, -0.5 * length), Vec3(0.0, 0.0, length), Vec3(0.0, y1 - y0, 0.0)};
}

std::vector<Electrode> surface_electrodes(const GeometryParams& p) {
  const double a = 0.5 * p.center_width;
  const double rf_in = a + p.gap;
  const double rf_out = rf_in + p.rf_width;
  const double gnd_in = rf_out + p.gap;
  const double edge = 0.5 * p.wafer_extent;
  if (!(edge > gnd_in)) {
    throw InvalidGeometry(fmt::format("wafer_extent {} m too small for the electrode layout", p.wafer_extent));
  }
  const double L = p.electrode_length;
  std::vector<Electrode> out;
  out.push_back({"gnd_left", ElectrodeRole::Ground, {strip(-edge, -gnd_in, 0.0, L)}});
  out.push_back({"rf_left", ElectrodeRole::Rf, {strip(-rf_out, -rf_in, 0.0, L)}});
  out.push_back({"dc_center", ElectrodeRole::Dc, {strip(-a, a, 0.0, L)}});
  out.push_back({"rf_right", ElectrodeRole::Rf, {strip(rf_in, rf_out, 0.0, L)}});
  out.push_back({"gnd_right", ElectrodeRole::Ground, {strip(gnd_in, edge, 0.0, L)}});
  return out;
}

TrapGeometry assemble(const GeometryParams& p, std::vector<Electrode> electrodes) {
  TrapGeometry g;
  g.design = p.design;
  g.params = p;
  g.electrodes = std::move(electrodes);
  return refine_mesh(g, p.mesh, resolve_fine_region(p));
}

// ---- graded 1D subdivision -------------------------------------------------

struct Grading {
  double center;      // fine interval center along this axis
  double half_width;  // fine interval half width
  double fine;        // element size inside the fine interval
  double coarse;
  double rate;

  Grading mirrored() const { return Grading{-center, half_width, fine, coarse, rate}; }

  double size_at(double dist) const { return std::min(coarse, fine + rate * dist); }

  // Integral of 1/size over [0, dist].
  double integral(double dist) const {
    if (rate <= 0.0 || fine >= coarse) return dist / std::min(fine, coarse);
    const double knee = (coarse - fine) / rate;
    if (dist <= knee) return std::log1p(rate * dist / fine) / rate;
    return std::log(coarse / fine) / rate + (dist - knee) / coarse;
  }

  double inverse_integral(double value) const {
    if (rate <= 0.0 || fine >= coarse) return value * std::min(fine, coarse);
    const double at_knee = std::log(coarse / fine) / rate;
    if (value <= at_knee) return fine * std::expm1(rate * value) / rate;
    return (coarse - fine) / rate + (value - at_knee) * coarse;
  }
};

// Subdivides a run of points moving away from the fine interval, with
// distance from it growing from d0 to d1. Emits interior points only.
void graded_run(const Grading& g, double d0, double d1, std::vector<double>& dists) {
  const double i0 = g.integral(d0);
  const double i1 = g.integral(d1);
  const auto n = static_cast<int>(std::max(1.0, std::ceil(i1 - i0 - 1e-9)));
  for (int k = 1; k < n; ++k) {
    dists.push_back(g.inverse_integral(i0 + (i1 - i0) * k / n));
  }
}

std::vector<double> breaks_direct(double lo, double hi, const Grading& g) {
  const double c0 = g.center - g.half_width;
  const double c1 = g.center + g.half_width;
  const double tol = 1e-3 * g.fine;

  std::vector<double> cuts{lo};
  if (c0 > lo + tol && c0 < hi - tol) cuts.push_back(c0);
  if (c1 > lo + tol && c1 < hi - tol) cuts.push_back(c1);
  cuts.push_back(hi);

  std::vector<double> pts{lo};
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double a = cuts[s];
    const double b = cuts[s + 1];
    const double mid = 0.5 * (a + b);
    if (mid < c0) {
      std::vector<double> d;
      graded_run(g, c0 - b, c0 - a, d);  // distances, from near to far
      for (auto it = d.rbegin(); it != d.rend(); ++it) pts.push_back(c0 - *it);
    } else if (mid > c1) {
      std::vector<double> d;
      graded_run(g, a - c1, b - c1, d);
      for (double v : d) pts.push_back(c1 + v);
    } else {
      const auto n = static_cast<int>(std::max(1.0, std::ceil((b - a) / g.fine - 1e-9)));
      for (int k = 1; k < n; ++k) pts.push_back(a + (b - a) * k / n);
    }
    pts.push_back(b);
  }
  return pts;
}

// Break points of [lo, hi]. Mirror-image intervals (under x -> -x with a
// mirrored fine interval) produce bitwise mirror-image break points.
std::vector<double> breaks(double lo, double hi, const Grading& g) {
  if (lo + hi > 0.0) {
    auto m = breaks(-hi, -lo, g.mirrored());
    std::vector<double> out(m.size());
    std::transform(m.rbegin(), m.rend(), out.begin(), [](double v) { return -v; });
    return out;
  }
  if (lo + hi == 0.0 && g.center == 0.0) {
    auto left = breaks_direct(lo, 0.0, g);
    std::vector<double> out = left;
    for (auto it = left.rbegin() + 1; it != left.rend(); ++it) out.push_back(-*it);
    return out;
  }
  return breaks_direct(lo, hi, g);
}

// Index of the single nonzero component, or -1.
int axis_of(const Vec3& v) {
  int axis = -1;
  for (int k = 0; k < 3; ++k) {
    if (v[k] != 0.0) {
      if (axis >= 0) return -1;
      axis = k;
    }
  }
  return axis;
}

void validate_rect(const Rect& r, const std::string& electrode) {
  const double lu = r.edge_u.norm();
  const double lv = r.edge_v.norm();
  if (!(lu > 0.0) || !(lv > 0.0)) {
    throw InvalidGeometry(fmt::format("electrode '{}' has a zero-area rectangle", electrode));
  }
  if (std::abs(r.edge_u.dot(r.edge_v)) > 1e-9 * lu * lv) {
    throw InvalidGeometry(fmt::format("electrode '{}' has a non-rectangular patch", electrode));
  }
}

void mesh_rect(const Rect& r, std::size_t electrode, const MeshParams& mesh, const Box& fine,
               std::vector<Panel>& out) {
  const int ku = axis_of(r.edge_u);
  const int kv = axis_of(r.edge_v);
  const Vec3 half = 0.5 * fine.size();
  const Vec3 center = fine.center();

  if (ku >= 0 && kv >= 0) {
    const int kn = 3 - ku - kv;
    const double plane = r.origin[kn];
    const double offset = std::max(0.0, std::abs(plane - center[kn]) - half[kn]);
    const double fine_eff = std::min(mesh.coarse_element, mesh.fine_element + mesh.grading * offset);

    auto axis_breaks = [&](int k, double o, double e) {
      Grading g{center[k], half[k], fine_eff, mesh.coarse_element, mesh.grading};
      return breaks(std::min(o, o + e), std::max(o, o + e), g);
    };
    const auto bu = axis_breaks(ku, r.origin[ku], r.edge_u[ku]);
    const auto bv = axis_breaks(kv, r.origin[kv], r.edge_v[kv]);
    for (std::size_t i = 0; i + 1 < bu.size(); ++i) {
      for (std::size_t j = 0; j + 1 < bv.size(); ++j) {
        Panel p;
        p.electrode = electrode;
        p.rect.origin[kn] = plane;
        p.rect.origin[ku] = bu[i];
        p.rect.origin[kv] = bv[j];
        p.rect.edge_u = Vec3::Zero();
        p.rect.edge_v = Vec3::Zero();
        p.rect.edge_u[ku] = bu[i + 1] - bu[i];
        p.rect.edge_v[kv] = bv[j + 1] - bv[j];
        out.push_back(p);
      }
    }
    return;
  }

  // Arbitrary orientation: uniform subdivision at the size required by the
  // part of the rectangle closest to the fine region.
  const Box rb = r.bounds();
  Vec3 gap_vec = (fine.lo - rb.hi).cwiseMax(rb.lo - fine.hi).cwiseMax(Vec3::Zero());
  const double size = std::min(mesh.coarse_element, mesh.fine_element + mesh.grading * gap_vec.norm());
  const auto nu = static_cast<int>(std::max(1.0, std::ceil(r.edge_u.norm() / size - 1e-9)));
  const auto nv = static_cast<int>(std::max(1.0, std::ceil(r.edge_v.norm() / size - 1e-9)));
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      Panel p;
      p.electrode = electrode;
      p.rect.origin = r.origin + r.edge_u * (static_cast<double>(i) / nu) + r.edge_v * (static_cast<double>(j) / nv);
      p.rect.edge_u = r.edge_u / nu;
      p.rect.edge_v = r.edge_v / nv;
      out.push_back(p);
    }
  }
}

}  // namespace

double rf_span(const GeometryParams& p) {
  if (p.design == Design::CrossRf) return p.h;
  return p.center_width + 2.0 * (p.gap + p.rf_width);
}

Vec3 expected_null(const GeometryParams& p) {
  // Gapless five-wire estimate, gaps split between neighbours.
  const double a = p.center_width + p.gap;
  const double b = p.rf_width + p.gap;
  const double surface_height = 0.5 * std::sqrt(a * (a + 2.0 * b));
  switch (p.design) {
    case Design::GndSurface: return Vec3(0.0, std::min(surface_height, 0.5 * p.h), 0.0);
    case Design::CrossRf: return Vec3(0.0, 0.5 * p.h, 0.0);
    default: return Vec3(0.0, surface_height, 0.0);
  }
}

Box resolve_fine_region(const GeometryParams& p) {
  const Vec3 center = p.mesh.fine_region_center.value_or(expected_null(p));
  return Box::centered(center, p.mesh.fine_region_size);
}

TrapGeometry build_surface_trap(const GeometryParams& params) {
  if (params.design != Design::Surface) throw InvalidGeometry("build_surface_trap needs design = surface");
  validate_lateral(params);
  return assemble(params, surface_electrodes(params));
}

TrapGeometry build_gnd_surface_trap(const GeometryParams& params) {
  if (params.design != Design::GndSurface) {
    throw InvalidGeometry("build_gnd_surface_trap needs design = gnd-surface");
  }
  validate_lateral(params);
  require_positive(params.h, "h");
  auto electrodes = surface_electrodes(params);
  const double edge = 0.5 * params.wafer_extent;
  electrodes.push_back({"gnd_top", ElectrodeRole::Ground, {strip(-edge, edge, params.h, params.electrode_length)}});
  return assemble(params, std::move(electrodes));
}

TrapGeometry build_cross_rf_trap(const GeometryParams& params) {
  if (params.design != Design::CrossRf) throw InvalidGeometry("build_cross_rf_trap needs design = cross-rf");
  validate_lateral(params);
  require_positive(params.h, "h");
  // Each rail is its inner face: a wall at |x| = h/2 facing the trap axis,
  // rf_width tall, shortened so rails on the same side stay `gap` apart.
  const double in = 0.5 * params.h;
  const double rail = std::min(params.rf_width, 0.5 * (params.h - params.gap));
  if (!(rail > 0.0)) {
    throw InvalidGeometry(fmt::format("h = {} m leaves no room for rails separated by gap = {} m", params.h, params.gap));
  }
  if (!(0.5 * params.wafer_extent >= in)) {
    throw InvalidGeometry(fmt::format("wafer_extent {} m too small for h = {} m", params.wafer_extent, params.h));
  }
  const double L = params.electrode_length;
  const double top = params.h;
  std::vector<Electrode> electrodes;
  electrodes.push_back({"rf_bottom", ElectrodeRole::Rf, {wall(-in, 0.0, rail, L)}});
  electrodes.push_back({"gnd_bottom", ElectrodeRole::Ground, {wall(in, 0.0, rail, L)}});
  electrodes.push_back({"gnd_top", ElectrodeRole::Ground, {wall(-in, top - rail, top, L)}});
  electrodes.push_back({"rf_top", ElectrodeRole::Rf, {wall(in, top - rail, top, L)}});
  return assemble(params, std::move(electrodes));
}

TrapGeometry build_trap(const GeometryParams& params) {
  switch (params.design) {
    case Design::Surface: return build_surface_trap(params);
    case Design::GndSurface: return build_gnd_surface_trap(params);
    case Design::CrossRf: return build_cross_rf_trap(params);
    case Design::Custom: break;
  }
  throw InvalidGeometry("custom geometries are loaded from files, not built from parameters");
}

TrapGeometry refine_mesh(const TrapGeometry& geometry, const MeshParams& mesh) {
  if (geometry.params) return refine_mesh(geometry, mesh, resolve_fine_region(*geometry.params));
  const Vec3 center = mesh.fine_region_center.value_or(geometry.fine_region.center());
  return refine_mesh(geometry, mesh, Box::centered(center, mesh.fine_region_size));
}

TrapGeometry refine_mesh(const TrapGeometry& geometry, const MeshParams& mesh, const Box& fine_region) {
  validate_mesh(mesh);
  TrapGeometry out;
  out.design = geometry.design;
  out.params = geometry.params;
  if (out.params) out.params->mesh = mesh;
  out.fine_region = fine_region;
  out.electrodes = geometry.electrodes;
  if (out.electrodes.empty()) throw InvalidGeometry("geometry has no electrodes");

  for (std::size_t e = 0; e < out.electrodes.size(); ++e) {
    auto& electrode = out.electrodes[e];
    if (electrode.outline.empty()) {
      throw InvalidGeometry(fmt::format("electrode '{}' has no rectangles", electrode.name));
    }
    electrode.panel_begin = out.panels.size();
    for (const auto& r : electrode.outline) {
      validate_rect(r, electrode.name);
      mesh_rect(r, e, mesh, fine_region, out.panels);
    }
    electrode.panel_end = out.panels.size();
  }

  if (!out.bounds().intersects(fine_region)) {
    out.warnings.push_back("fine mesh region lies outside the electrode bounding box");
  }
  return out;
}

namespace {

bool rects_overlap(const Rect& a, const Rect& b, double tol) {
  const Vec3 na = a.normal();
  const Vec3 nb = b.normal();
  if (std::abs(std::abs(na.dot(nb)) - 1.0) > 1e-9) return false;
  if (std::abs(na.dot(b.origin - a.origin)) > tol) return false;

  const Vec3 axes[4] = {a.edge_u.normalized(), a.edge_v.normalized(), b.edge_u.normalized(), b.edge_v.normalized()};
  for (const auto& axis : axes) {
    auto project = [&](const Rect& r) {
      const double o = r.origin.dot(axis);
      const double pu = r.edge_u.dot(axis);
      const double pv = r.edge_v.dot(axis);
      const double lo = o + std::min(0.0, pu) + std::min(0.0, pv);
      const double hi = o + std::max(0.0, pu) + std::max(0.0, pv);
      return std::pair{lo, hi};
    };
    auto [alo, ahi] = project(a);
    auto [blo, bhi] = project(b);
    if (std::min(ahi, bhi) - std::max(alo, blo) <= tol) return false;
  }
  return true;
}

}  // namespace

void check_no_overlap(const TrapGeometry& geometry) {
  const auto& panels = geometry.panels;
  std::vector<Box> boxes;
  boxes.reserve(panels.size());
  double scale = 0.0;
  for (const auto& p : panels) {
    boxes.push_back(p.rect.bounds());
    scale = std::max(scale, std::max(p.rect.edge_u.norm(), p.rect.edge_v.norm()));
  }
  const double tol = 1e-9 * scale;

  std::vector<std::size_t> order(panels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return boxes[a].lo.x() < boxes[b].lo.x(); });

  for (std::size_t s = 0; s < order.size(); ++s) {
    const std::size_t i = order[s];
    for (std::size_t t = s + 1; t < order.size(); ++t) {
      const std::size_t j = order[t];
      if (boxes[j].lo.x() > boxes[i].hi.x() + tol) break;
      if (boxes[j].lo.y() > boxes[i].hi.y() + tol || boxes[i].lo.y() > boxes[j].hi.y() + tol) continue;
      if (boxes[j].lo.z() > boxes[i].hi.z() + tol || boxes[i].lo.z() > boxes[j].hi.z() + tol) continue;
      if (rects_overlap(panels[i].rect, panels[j].rect, tol)) {
        throw InvalidGeometry(fmt::format("panels {} (electrode '{}') and {} (electrode '{}') overlap", i,
                                          geometry.electrodes[panels[i].electrode].name, j,
                                          geometry.electrodes[panels[j].electrode].name));
      }
    }
  }
}

}  // namespace iontrap
