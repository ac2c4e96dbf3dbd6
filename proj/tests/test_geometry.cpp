#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <tuple>
#include <vector>

#include "iontrap/errors.hpp"
#include "iontrap/geometry.hpp"
#include "iontrap/geometry_io.hpp"

using namespace iontrap;

namespace {

using Key = std::tuple<int, std::array<double, 6>>;

Key key(ElectrodeRole role, const Box& b) {
  return {static_cast<int>(role), {b.lo.x(), b.lo.y(), b.lo.z(), b.hi.x(), b.hi.y(), b.hi.z()}};
}

std::vector<Key> panel_keys(const TrapGeometry& g, auto transform) {
  std::vector<Key> out;
  for (const auto& p : g.panels) out.push_back(key(g.electrodes[p.electrode].role, transform(p.rect.bounds())));
  std::sort(out.begin(), out.end());
  return out;
}

Box identity(const Box& b) { return b; }

// Shares interior points with `fine` (touching faces do not count).
bool overlaps_interior(const Box& panel, const Box& fine) {
  for (int k = 0; k < 3; ++k) {
    if (panel.lo[k] == panel.hi[k]) {
      if (panel.lo[k] < fine.lo[k] || panel.lo[k] > fine.hi[k]) return false;
    } else if (!(panel.lo[k] < fine.hi[k] && panel.hi[k] > fine.lo[k])) {
      return false;
    }
  }
  return true;
}

double electrode_area_sum(const TrapGeometry& g, std::size_t e) {
  double s = 0.0;
  for (std::size_t i = g.electrodes[e].panel_begin; i < g.electrodes[e].panel_end; ++i) s += g.panels[i].rect.area();
  return s;
}

TrapGeometry plate(double side, double element) {
  TrapGeometry t;
  t.electrodes = {Electrode{"plate", ElectrodeRole::Rf, {Rect{Vec3::Zero(), Vec3(side, 0, 0), Vec3(0, 0, side)}}}};
  MeshParams m;
  m.fine_element = element;
  m.coarse_element = element;
  return refine_mesh(t, m, Box{Vec3::Constant(-1), Vec3::Constant(1)});
}

}  // namespace

// Largest coordinate mismatch between the panel set and its image; roles must match.
double image_mismatch(const TrapGeometry& g, auto transform) {
  const auto a = panel_keys(g, identity);
  const auto b = panel_keys(g, transform);
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::get<0>(a[i]) == std::get<0>(b[i]));
    for (int k = 0; k < 6; ++k) worst = std::max(worst, std::abs(std::get<1>(a[i])[k] - std::get<1>(b[i])[k]));
  }
  return worst;
}

Box mirror_x(const Box& b) { return Box{Vec3(-b.hi.x(), b.lo.y(), b.lo.z()), Vec3(-b.lo.x(), b.hi.y(), b.hi.z())}; }

TEST_CASE("surface and gnd-surface traps are mirror symmetric about x = 0") {
  // Panel corners are origin + edge, so images agree to rounding of that sum.
  CHECK(image_mismatch(build_surface_trap(default_params(Design::Surface)), mirror_x) < 1e-15);
  CHECK(image_mismatch(build_gnd_surface_trap(default_params(Design::GndSurface)), mirror_x) < 1e-15);
}

TEST_CASE("cross-rf trap maps to itself under the wafer-swapping rotation") {
  for (double h : {80e-6, 105e-6, 200e-6, 300e-6}) {
    GeometryParams p = default_params(Design::CrossRf);
    p.h = h;
    const TrapGeometry g = build_cross_rf_trap(p);
    // 180 degrees about the trap axis through (0, h/2): (x, y) -> (-x, h - y).
    auto rotate = [h](const Box& b) {
      return Box{Vec3(-b.hi.x(), h - b.hi.y(), b.lo.z()), Vec3(-b.lo.x(), h - b.lo.y(), b.hi.z())};
    };
    CHECK(image_mismatch(g, rotate) < 1e-15);
  }
}

TEST_CASE("cross-rf rails sit at |x| = h/2 with the rf pair diagonally opposed") {
  GeometryParams p = default_params(Design::CrossRf);
  p.h = 200e-6;
  const TrapGeometry g = build_cross_rf_trap(p);
  const auto rf_bottom = g.electrodes[*g.find_electrode("rf_bottom")].outline[0].bounds();
  const auto rf_top = g.electrodes[*g.find_electrode("rf_top")].outline[0].bounds();
  CHECK(rf_bottom.lo.x() == doctest::Approx(-100e-6));
  CHECK(rf_top.lo.x() == doctest::Approx(100e-6));
  CHECK(rf_bottom.lo.y() == 0.0);
  CHECK(rf_top.hi.y() == doctest::Approx(200e-6));
  // Horizontal rf-ground spacing equals h.
  const auto gnd_bottom = g.electrodes[*g.find_electrode("gnd_bottom")].outline[0].bounds();
  CHECK(gnd_bottom.lo.x() - rf_bottom.lo.x() == doctest::Approx(p.h));
}

TEST_CASE("gnd-surface bottom wafer equals the surface trap") {
  GeometryParams s = default_params(Design::Surface);
  GeometryParams g = default_params(Design::GndSurface);
  s.mesh.fine_region_center = g.mesh.fine_region_center = Vec3(0, 90e-6, 0);
  const TrapGeometry a = build_surface_trap(s);
  const TrapGeometry b = build_gnd_surface_trap(g);
  REQUIRE(b.electrodes.size() == a.electrodes.size() + 1);
  const std::size_t n = a.panel_count();
  REQUIRE(b.panel_count() > n);
  CHECK(std::equal(a.panels.begin(), a.panels.end(), b.panels.begin()));
  for (std::size_t i = n; i < b.panel_count(); ++i) CHECK(b.panels[i].rect.origin.y() == g.h);
}

TEST_CASE("tiling preserves electrode area") {
  for (Design d : {Design::Surface, Design::GndSurface, Design::CrossRf}) {
    const TrapGeometry g = build_trap(default_params(d));
    for (std::size_t e = 0; e < g.electrodes.size(); ++e) {
      const double exact = g.electrodes[e].area();
      CHECK(std::abs(electrode_area_sum(g, e) - exact) / exact < 1e-12);
    }
  }
}

TEST_CASE("element sizes respect the fine and coarse limits") {
  const TrapGeometry g = build_surface_trap(default_params(Design::Surface));
  const MeshParams& m = g.params->mesh;
  for (const auto& p : g.panels) {
    const double edge = std::max(p.rect.edge_u.norm(), p.rect.edge_v.norm());
    if (overlaps_interior(p.rect.bounds(), g.fine_region)) {
      CHECK(edge <= m.fine_element * (1 + 1e-12));
    }
    CHECK(edge <= m.coarse_element * (1 + 1e-12));
  }
}

TEST_CASE("panels are rectangles assigned to exactly one electrode") {
  const TrapGeometry g = build_gnd_surface_trap(default_params(Design::GndSurface));
  std::size_t covered = 0;
  for (std::size_t e = 0; e < g.electrodes.size(); ++e) {
    for (std::size_t i = g.electrodes[e].panel_begin; i < g.electrodes[e].panel_end; ++i) {
      CHECK(g.panels[i].electrode == e);
      CHECK(std::abs(g.panels[i].rect.edge_u.dot(g.panels[i].rect.edge_v)) == 0.0);
      CHECK(g.panels[i].rect.area() > 0.0);
    }
    covered += g.electrodes[e].panel_count();
  }
  CHECK(covered == g.panel_count());
  CHECK_NOTHROW(check_no_overlap(g));
}

TEST_CASE("uniform subdivision when fine equals coarse") {
  const TrapGeometry g = plate(1e-3, 100e-6);
  CHECK(g.panel_count() == 100);
  for (const auto& p : g.panels) {
    CHECK(p.rect.edge_u.norm() == doctest::Approx(100e-6));
    CHECK(p.rect.edge_v.norm() == doctest::Approx(100e-6));
  }
}

TEST_CASE("halving the element size quadruples the count on a plane") {
  CHECK(plate(1e-3, 50e-6).panel_count() == 4 * plate(1e-3, 100e-6).panel_count());
  // Ground planes are the wide regions; the narrow rails stay one element wide.
  auto ground_panels = [](const TrapGeometry& g) {
    std::size_t n = 0;
    for (const auto& e : g.electrodes) n += e.role == ElectrodeRole::Ground ? e.panel_count() : 0;
    return double(n);
  };
  GeometryParams p = default_params(Design::Surface);
  p.mesh.coarse_element = 100e-6;
  p.mesh.fine_element = p.mesh.coarse_element;
  GeometryParams q = p;
  q.mesh.coarse_element *= 0.5;
  q.mesh.fine_element = q.mesh.coarse_element;
  const double ratio = ground_panels(build_surface_trap(q)) / ground_panels(build_surface_trap(p));
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
}

TEST_CASE("builders are deterministic") {
  for (Design d : {Design::Surface, Design::GndSurface, Design::CrossRf}) {
    CHECK(build_trap(default_params(d)).panels == build_trap(default_params(d)).panels);
  }
}

TEST_CASE("invalid dimensions are rejected") {
  GeometryParams p = default_params(Design::Surface);
  p.rf_width = 0.0;
  CHECK_THROWS_AS(build_surface_trap(p), InvalidGeometry);
  p = default_params(Design::Surface);
  p.gap = -1e-6;
  CHECK_THROWS_AS(build_surface_trap(p), InvalidGeometry);
  p = default_params(Design::GndSurface);
  p.h = 0.0;
  CHECK_THROWS_AS(build_gnd_surface_trap(p), InvalidGeometry);
  p = default_params(Design::CrossRf);
  p.h = -5e-6;
  CHECK_THROWS_AS(build_cross_rf_trap(p), InvalidGeometry);
  p = default_params(Design::Surface);
  p.mesh.fine_element = 2.0 * p.mesh.coarse_element;
  CHECK_THROWS_AS(build_surface_trap(p), InvalidGeometry);
  p = default_params(Design::Surface);
  p.design = Design::CrossRf;
  CHECK_THROWS_AS(build_surface_trap(p), InvalidGeometry);
}

TEST_CASE("overlapping panels of different electrodes are rejected") {
  TrapGeometry t;
  t.electrodes = {Electrode{"a", ElectrodeRole::Rf, {Rect{Vec3::Zero(), Vec3(1e-4, 0, 0), Vec3(0, 0, 1e-4)}}},
                  Electrode{"b", ElectrodeRole::Ground, {Rect{Vec3(5e-5, 0, 5e-5), Vec3(1e-4, 0, 0), Vec3(0, 0, 1e-4)}}}};
  MeshParams m;
  m.fine_element = m.coarse_element = 5e-5;
  const TrapGeometry g = refine_mesh(t, m, Box{Vec3::Constant(-1), Vec3::Constant(1)});
  CHECK_THROWS_AS(check_no_overlap(g), InvalidGeometry);
}

TEST_CASE("fine region outside the electrodes warns without failing") {
  TrapGeometry t;
  t.electrodes = {Electrode{"a", ElectrodeRole::Rf, {Rect{Vec3::Zero(), Vec3(1e-4, 0, 0), Vec3(0, 0, 1e-4)}}}};
  MeshParams m;
  const TrapGeometry g = refine_mesh(t, m, Box::centered(Vec3(1.0, 1.0, 1.0), Vec3::Constant(1e-4)));
  CHECK(g.warnings.size() == 1);
  CHECK(g.panel_count() >= 1);
}

TEST_CASE("geometry JSON round trip") {
  for (Design d : {Design::Surface, Design::GndSurface, Design::CrossRf}) {
    const TrapGeometry g = build_trap(default_params(d));
    const TrapGeometry back = geometry_from_json(geometry_to_json(g));
    REQUIRE(back.panel_count() == g.panel_count());
    CHECK(back.design == g.design);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.panel_count(); ++i) {
      worst = std::max(worst, (back.panels[i].rect.origin - g.panels[i].rect.origin).norm());
      CHECK(back.panels[i].electrode == g.panels[i].electrode);
    }
    CHECK(worst < 1e-15);
  }
}

TEST_CASE("malformed geometry JSON reports line and column") {
  try {
    parse_json_text("{\n  \"design\": \"surface\"\n  \"h\": 3\n}", "bad.json");
    FAIL("expected InvalidInput");
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find("bad.json:3:") != std::string::npos);
  }
  CHECK_THROWS_AS(geometry_from_json(nlohmann::json::parse(R"({"design": "hexagon"})")), InvalidInput);
  CHECK_THROWS_AS(geometry_from_json(nlohmann::json::parse(R"({"design": "surface", "units": "mm"})")), InvalidInput);
}
