#include "iontrap/geometry_io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/core.h>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"

namespace iontrap {

using nlohmann::json;

namespace {

json vec_um(const Vec3& v) { return json::array({v.x() / kMicron, v.y() / kMicron, v.z() / kMicron}); }

Vec3 vec_from_um(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw InvalidInput(fmt::format("'{}' must be a 3-element array", what));
  Vec3 v;
  for (int k = 0; k < 3; ++k) {
    if (!j[k].is_number()) throw InvalidInput(fmt::format("'{}' must contain numbers", what));
    v[k] = j[k].get<double>() * kMicron;
  }
  return v;
}

double length_um(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw InvalidInput(fmt::format("'{}' must be a number (micrometres)", key));
  return j[key].get<double>() * kMicron;
}

}  // namespace

json mesh_to_json(const MeshParams& mesh) {
  json j{{"coarse_element", mesh.coarse_element / kMicron},
         {"fine_element", mesh.fine_element / kMicron},
         {"grading", mesh.grading},
         {"fine_region_size", vec_um(mesh.fine_region_size)}};
  if (mesh.fine_region_center) j["fine_region_center"] = vec_um(*mesh.fine_region_center);
  return j;
}

MeshParams mesh_from_json(const json& j, MeshParams base) {
  if (!j.is_object()) throw InvalidInput("'mesh' must be an object");
  base.coarse_element = length_um(j, "coarse_element", base.coarse_element);
  base.fine_element = length_um(j, "fine_element", base.fine_element);
  if (j.contains("grading")) base.grading = j.at("grading").get<double>();
  if (j.contains("fine_region_size")) base.fine_region_size = vec_from_um(j["fine_region_size"], "fine_region_size");
  if (j.contains("fine_region_center")) {
    base.fine_region_center = vec_from_um(j["fine_region_center"], "fine_region_center");
  }
  return base;
}

json params_to_json(const GeometryParams& p) {
  return json{{"design", std::string(to_string(p.design))},
              {"h", p.h / kMicron},
              {"rf_width", p.rf_width / kMicron},
              {"center_width", p.center_width / kMicron},
              {"gap", p.gap / kMicron},
              {"electrode_length", p.electrode_length / kMicron},
              {"wafer_extent", p.wafer_extent / kMicron},
              {"mesh", mesh_to_json(p.mesh)}};
}

GeometryParams params_from_json(const json& j, GeometryParams base) {
  if (!j.is_object()) throw InvalidInput("'params' must be an object");
  if (j.contains("design")) base.design = parse_design(j["design"].get<std::string>());
  base.h = length_um(j, "h", base.h);
  base.rf_width = length_um(j, "rf_width", base.rf_width);
  base.center_width = length_um(j, "center_width", base.center_width);
  base.gap = length_um(j, "gap", base.gap);
  base.electrode_length = length_um(j, "electrode_length", base.electrode_length);
  base.wafer_extent = length_um(j, "wafer_extent", base.wafer_extent);
  if (j.contains("mesh")) base.mesh = mesh_from_json(j["mesh"], base.mesh);
  return base;
}

json geometry_to_json(const TrapGeometry& g) {
  json electrodes = json::array();
  for (const auto& e : g.electrodes) {
    json rects = json::array();
    for (const auto& r : e.outline) {
      rects.push_back({{"origin", vec_um(r.origin)}, {"u", vec_um(r.edge_u)}, {"v", vec_um(r.edge_v)}});
    }
    electrodes.push_back({{"name", e.name}, {"role", std::string(to_string(e.role))}, {"rects", rects}});
  }
  json j{{"design", std::string(to_string(g.design))}, {"units", "um"}, {"electrodes", electrodes}};
  if (g.params) {
    j["params"] = params_to_json(*g.params);
  } else {
    MeshParams mesh;
    mesh.fine_region_size = g.fine_region.size();
    mesh.fine_region_center = g.fine_region.center();
    j["params"] = json{{"mesh", mesh_to_json(mesh)}};
  }
  return j;
}

TrapGeometry geometry_from_json(const json& j) {
  try {
    if (!j.is_object()) throw InvalidInput("geometry document must be a JSON object");
    if (j.value("units", std::string("um")) != "um") throw InvalidInput("geometry 'units' must be \"um\"");
    const Design design = parse_design(j.value("design", std::string("custom")));

    GeometryParams params = default_params(design == Design::Custom ? Design::Surface : design);
    params.design = design;
    if (j.contains("params")) params = params_from_json(j["params"], params);
    params.design = design;

    if (!j.contains("electrodes")) {
      if (design == Design::Custom) throw InvalidInput("custom geometry needs an 'electrodes' list");
      return build_trap(params);
    }

    TrapGeometry g;
    g.design = design;
    if (design != Design::Custom) g.params = params;
    for (const auto& je : j.at("electrodes")) {
      Electrode e;
      e.name = je.at("name").get<std::string>();
      e.role = parse_role(je.at("role").get<std::string>());
      for (const auto& jr : je.at("rects")) {
        e.outline.push_back(Rect{vec_from_um(jr.at("origin"), "origin"), vec_from_um(jr.at("u"), "u"),
                                 vec_from_um(jr.at("v"), "v")});
      }
      g.electrodes.push_back(std::move(e));
    }
    Box fine;
    if (g.params) {
      fine = resolve_fine_region(params);
    } else {
      const Box bounds = g.bounds();
      const Vec3 center = params.mesh.fine_region_center.value_or(bounds.center());
      fine = Box::centered(center, params.mesh.fine_region_size);
    }
    return refine_mesh(g, params.mesh, fine);
  } catch (const json::exception& e) {
    throw InvalidInput(fmt::format("geometry document: {}", e.what()));
  }
}

json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t end = std::min(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw InvalidInput(fmt::format("{}:{}:{}: malformed JSON ({})", source, line, column, e.what()));
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput(fmt::format("cannot open '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_json_text(buffer.str(), path.string());
}

TrapGeometry load_geometry(const std::filesystem::path& path) { return geometry_from_json(read_json_file(path)); }

void save_geometry(const TrapGeometry& geometry, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput(fmt::format("cannot write '{}'", path.string()));
  out << geometry_to_json(geometry).dump(2) << '\n';
}

}  // namespace iontrap
