#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iontrap/box.hpp"

namespace iontrap {

enum class ElectrodeRole { Rf, Dc, Ground };
enum class Design { Surface, GndSurface, CrossRf, Custom };

std::string_view to_string(ElectrodeRole role);
std::string_view to_string(Design design);
ElectrodeRole parse_role(std::string_view text);
Design parse_design(std::string_view text);

/// Planar rectangle spanned by two orthogonal edges from `origin`.
struct Rect {
  Vec3 origin = Vec3::Zero();
  Vec3 edge_u = Vec3::Zero();
  Vec3 edge_v = Vec3::Zero();

  double area() const { return edge_u.cross(edge_v).norm(); }
  Vec3 center() const { return origin + 0.5 * (edge_u + edge_v); }
  Vec3 normal() const { return edge_u.cross(edge_v).normalized(); }
  Box bounds() const;
  bool operator==(const Rect&) const = default;
};

/// One boundary element: a rectangle carrying uniform charge density.
struct Panel {
  Rect rect;
  std::size_t electrode = 0;

  bool operator==(const Panel&) const = default;
};

struct Electrode {
  std::string name;
  ElectrodeRole role = ElectrodeRole::Ground;
  std::vector<Rect> outline;     // unmeshed conductor shape
  std::size_t panel_begin = 0;   // panels [panel_begin, panel_end) of TrapGeometry::panels
  std::size_t panel_end = 0;

  std::size_t panel_count() const { return panel_end - panel_begin; }
  double area() const;
};

struct MeshParams {
  double coarse_element = 1000e-6;
  double fine_element = 20e-6;
  /// Growth of the target element size per unit distance from the fine region.
  double grading = 0.5;
  Vec3 fine_region_size{600e-6, 600e-6, 500e-6};
  /// Unset: the builders center the region on their estimate of the rf null.
  std::optional<Vec3> fine_region_center;
};

struct GeometryParams {
  Design design = Design::Surface;
  double h = 200e-6;               // wafer separation (multi-wafer designs)
  double rf_width = 58e-6;      // also the rail height for cross-rf
  double center_width = 115e-6;
  double gap = 10e-6;
  double electrode_length = 8e-3;  // along the trap axis (z)
  double wafer_extent = 8e-3;      // lateral size of the wafers (x)
  MeshParams mesh;
};

GeometryParams default_params(Design design);

struct TrapGeometry {
  Design design = Design::Custom;
  std::optional<GeometryParams> params;  // set when produced by a builder
  std::vector<Electrode> electrodes;
  std::vector<Panel> panels;
  Box fine_region;                       // resolved mesh refinement box
  std::vector<std::string> warnings;

  std::size_t panel_count() const { return panels.size(); }
  std::optional<std::size_t> find_electrode(std::string_view name) const;
  Box bounds() const;
  /// y of the lowest electrode plane; ion heights are measured from here.
  double bottom_wafer_height() const;
  /// y of the highest electrode plane.
  double top_wafer_height() const;
};

TrapGeometry build_surface_trap(const GeometryParams& params);
TrapGeometry build_gnd_surface_trap(const GeometryParams& params);
TrapGeometry build_cross_rf_trap(const GeometryParams& params);
/// Dispatches on params.design.
TrapGeometry build_trap(const GeometryParams& params);

/// Re-tiles every electrode outline into panels: at most `fine_element`
/// wide inside `fine_region`, growing with distance up to `coarse_element`.
TrapGeometry refine_mesh(const TrapGeometry& geometry, const MeshParams& mesh);
TrapGeometry refine_mesh(const TrapGeometry& geometry, const MeshParams& mesh, const Box& fine_region);

/// Rough rf-null location for a design, used to center the fine region.
Vec3 expected_null(const GeometryParams& params);
Box resolve_fine_region(const GeometryParams& params);

/// Throws InvalidGeometry if any two panels (of any electrodes) overlap
/// with positive area.
void check_no_overlap(const TrapGeometry& geometry);

/// Outer lateral span of the rf rails of a planar design.
double rf_span(const GeometryParams& params);

}  // namespace iontrap
