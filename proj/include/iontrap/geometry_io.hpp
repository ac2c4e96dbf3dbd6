#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "iontrap/geometry.hpp"

namespace iontrap {

// Geometry files store every length in micrometres:
//   {design, units: "um", params: {...}, electrodes: [{name, role, rects: [{origin, u, v}]}]}

nlohmann::json params_to_json(const GeometryParams& params);
GeometryParams params_from_json(const nlohmann::json& j, GeometryParams base = {});
nlohmann::json mesh_to_json(const MeshParams& mesh);
MeshParams mesh_from_json(const nlohmann::json& j, MeshParams base = {});

nlohmann::json geometry_to_json(const TrapGeometry& geometry);
/// Builds and meshes a geometry. Electrode rectangles in the document take
/// precedence; without them the design builder is run from `params`.
TrapGeometry geometry_from_json(const nlohmann::json& j);

/// Parses JSON text, turning syntax errors into InvalidInput with
/// line/column information.
nlohmann::json parse_json_text(const std::string& text, const std::string& source);
nlohmann::json read_json_file(const std::filesystem::path& path);
TrapGeometry load_geometry(const std::filesystem::path& path);
void save_geometry(const TrapGeometry& geometry, const std::filesystem::path& path);

}  // namespace iontrap
