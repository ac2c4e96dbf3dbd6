#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <fmt/core.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "iontrap/cache.hpp"
#include "iontrap/errors.hpp"
#include "iontrap/figures_of_merit.hpp"
#include "iontrap/geometry_io.hpp"
#include "manifest.hpp"

namespace iontrap::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const InvalidInput& e) {
    throw InvalidInput(fmt::format("{}: {}", name, e.what()));
  } catch (const SolverFailure& e) {
    throw SolverFailure(fmt::format("{}: {}", name, e.what()));
  }
}

DriveParams drive_of(const CommonOptions& c) {
  DriveParams d = DriveParams::from_mhz(c.voltage_V, c.freq_MHz);
  validate(d);
  return d;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput(fmt::format("cannot open '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void apply_mesh_override(json& doc, const CommonOptions& c) {
  if (!c.mesh_fine_um) return;
  if (!(*c.mesh_fine_um > 0.0)) throw InvalidInput("--mesh-fine-um must be positive");
  doc["params"]["mesh"]["fine_element"] = *c.mesh_fine_um;
}

GeometryParams params_with_override(Design design, const CommonOptions& c) {
  GeometryParams p = default_params(design);
  if (c.mesh_fine_um) {
    if (!(*c.mesh_fine_um > 0.0)) throw InvalidInput("--mesh-fine-um must be positive");
    p.mesh.fine_element = *c.mesh_fine_um * 1e-6;
  }
  return p;
}

fs::path with_suffix(const std::string& prefix, const std::string& suffix) { return fs::path(prefix + suffix); }

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

json solve_json(const SolveDiagnostics& d) {
  return {{"panels", d.panel_count},
          {"condition_estimate", d.condition_estimate},
          {"max_residual_V", d.max_residual},
          {"from_cache", d.from_cache}};
}

/// Surface trap at its default dimensions, used to normalize heating and power.
TrapReport reference_report(const CommonOptions& c, double target_omega) {
  auto g = std::make_shared<const TrapGeometry>(build_trap(params_with_override(Design::Surface, c)));
  ReportOptions o;
  o.target_omega = target_omega;
  o.compute_depth = false;
  o.compute_capacitance = false;
  o.cache_dir = cache_dir_from_env();
  return full_report(g, species_by_name(c.species), drive_of(c), o);
}

std::string num(const std::optional<double>& v, double scale, const char* spec) {
  return v ? fmt::format(fmt::runtime(spec), *v * scale) : std::string("NA");
}

}  // namespace

int cmd_build(const CommonOptions& c, const BuildOptions& opts) {
  std::vector<Design> designs;
  if (opts.design == "all") {
    designs = {Design::Surface, Design::GndSurface, Design::CrossRf};
  } else {
    const Design d = parse_design(opts.design);
    if (d == Design::Custom) throw InvalidInput("build: --design must be surface, gnd-surface, cross-rf or all");
    designs = {d};
  }
  const fs::path dir = c.out.empty() ? fs::path(".") : fs::path(c.out);
  fs::create_directories(dir);
  Manifest manifest("build", c.argv);
  const fs::path manifest_file = dir / "build.manifest.json";
  std::vector<fs::path> outputs;
  json panels = json::object();
  for (Design d : designs) {
    GeometryParams p = params_with_override(d, c);
    if (opts.h_um) p.h = *opts.h_um * 1e-6;
    const TrapGeometry g = stage("build geometry", [&] { return build_trap(p); });
    json doc = geometry_to_json(g);
    doc["manifest"] = manifest.reference(manifest_file);
    std::string name(to_string(d));
    std::replace(name.begin(), name.end(), '-', '_');
    const fs::path file = dir / (name + ".json");
    std::ofstream out(file);
    if (!out) throw InvalidInput(fmt::format("cannot write '{}'", file.string()));
    out << doc.dump(2) << '\n';
    outputs.push_back(file);
    panels[std::string(to_string(d))] = g.panel_count();
    fmt::print("{} ({} panels)\n", file.string(), g.panel_count());
  }
  manifest.diagnostics()["panels"] = panels;
  manifest.write(manifest_file, outputs);
  return kExitOk;
}

int cmd_report(const CommonOptions& c, const ReportCmdOptions& opts) {
  Manifest manifest("report", c.argv);
  const std::string text = stage("read geometry", [&] { return read_text(opts.geometry); });
  manifest.add_input_text(opts.geometry, text);
  json doc = stage("parse geometry", [&] { return parse_json_text(text, opts.geometry); });
  apply_mesh_override(doc, c);
  auto g = stage("build geometry", [&] { return std::make_shared<const TrapGeometry>(geometry_from_json(doc)); });
  const IonSpecies species = stage("species", [&] { return species_by_name(c.species); });
  const DriveParams drive = stage("drive", [&] { return drive_of(c); });
  if (!(opts.target_MHz > 0.0)) throw InvalidInput("--target-MHz must be positive");

  ReportOptions o;
  o.target_omega = 2.0 * kPi * opts.target_MHz * 1e6;
  o.compute_depth = opts.depth;
  o.depth.resolution = opts.depth_resolution_um * 1e-6;
  o.cache_dir = cache_dir_from_env();
  const SolvedTrap solved = stage("solve", [&] { return solve_cached(g, o.cache_dir); });
  TrapReport report = stage("figures of merit", [&] { return full_report(solved, species, drive, o); });
  if (opts.reference) {
    const TrapReport ref = stage("reference surface trap", [&] { return reference_report(c, o.target_omega); });
    normalize_report(report, ref);
  }

  const std::string prefix = c.out.empty() ? "report" : c.out;
  const fs::path json_file = with_suffix(prefix, ".json");
  const fs::path csv_file = with_suffix(prefix, ".csv");
  const fs::path manifest_file = with_suffix(prefix, ".manifest.json");
  ensure_parent(json_file);

  json j = report_to_json(report);
  j["manifest"] = manifest.reference(manifest_file);
  std::ofstream(json_file) << j.dump(2) << '\n';
  {
    std::ofstream csv(csv_file);
    csv << manifest.csv_comment(manifest_file) << '\n' << report_csv_header() << '\n' << report_csv_row(report) << '\n';
  }
  manifest.diagnostics()["solve"] = solve_json(report.solve);
  manifest.diagnostics()["warnings"] = report.warnings;
  manifest.write(manifest_file, {json_file, csv_file});

  fmt::print("{}\n{}\n", report_csv_header(), report_csv_row(report));
  for (const auto& w : report.warnings) fmt::print(std::cerr, "warning: {}\n", w);
  for (const auto& [field, why] : report.not_computed) fmt::print(std::cerr, "not computed: {} ({})\n", field, why);
  return kExitOk;
}

int cmd_sweep(const CommonOptions& c, const std::string& spec_file) {
  Manifest manifest("sweep", c.argv);
  const std::string text = stage("read sweep spec", [&] { return read_text(spec_file); });
  manifest.add_input_text(spec_file, text);
  const json spec = stage("parse sweep spec", [&] { return parse_json_text(text, spec_file); });

  CommonOptions eff = c;
  Design design = Design::Custom;
  GeometryParams base;
  std::vector<double> hs;
  bool depth = true;
  double depth_res_um = 5.0;
  double target_MHz = 10.0;
  stage("sweep spec", [&] {
    try {
      if (!spec.is_object()) throw InvalidInput("sweep spec must be a JSON object");
      design = parse_design(spec.at("design").get<std::string>());
      if (design == Design::Custom) throw InvalidInput("sweep design must be surface, gnd-surface or cross-rf");
      hs = spec.at("h_um").get<std::vector<double>>();
      if (spec.contains("drive")) {
        eff.voltage_V = spec["drive"].value("voltage_V", eff.voltage_V);
        eff.freq_MHz = spec["drive"].value("freq_MHz", eff.freq_MHz);
      }
      eff.species = spec.value("species", eff.species);
      depth = spec.value("depth", true);
      depth_res_um = spec.value("depth_resolution_um", depth_res_um);
      target_MHz = spec.value("target_MHz", target_MHz);
      base = params_with_override(design, eff);
      if (spec.contains("params")) base = params_from_json(spec["params"], base);
      if (spec.contains("mesh")) base.mesh = mesh_from_json(spec["mesh"], base.mesh);
      if (c.mesh_fine_um) base.mesh.fine_element = *c.mesh_fine_um * 1e-6;
      base.design = design;
    } catch (const json::exception& e) {
      throw InvalidInput(e.what());
    }
    if (hs.empty()) throw InvalidInput("h_um list is empty");
    for (std::size_t i = 0; i < hs.size(); ++i) {
      if (!(hs[i] > 0.0)) throw InvalidInput(fmt::format("h_um[{}] = {} is not positive", i, hs[i]));
      if (i > 0 && !(hs[i] > hs[i - 1])) throw InvalidInput("h_um must be strictly increasing");
    }
    return 0;
  });
  const IonSpecies species = stage("species", [&] { return species_by_name(eff.species); });
  const DriveParams drive = stage("drive", [&] { return drive_of(eff); });
  const double target_omega = 2.0 * kPi * target_MHz * 1e6;

  const TrapReport ref = stage("reference surface trap", [&] { return reference_report(eff, target_omega); });

  const fs::path csv_file = c.out.empty() ? fs::path("sweep.csv") : fs::path(c.out);
  const fs::path manifest_file = fs::path(csv_file).replace_extension(".manifest.json");
  ensure_parent(csv_file);
  std::ofstream csv(csv_file);
  if (!csv) throw InvalidInput(fmt::format("cannot write '{}'", csv_file.string()));
  csv << manifest.csv_comment(manifest_file) << '\n';
  csv << "h_um,d_um,k,D_meV,omega_MHz,q,heating_norm,status\n";
  fmt::print("h_um,d_um,k,D_meV,omega_MHz,q,heating_norm,status\n");

  constexpr double mhz = 1.0 / (2.0 * kPi * 1e6);
  std::size_t failures = 0;
  json rows = json::array();
  for (double h_um : hs) {
    std::string line;
    json diag{{"h_um", h_um}};
    try {
      GeometryParams p = base;
      p.h = h_um * 1e-6;
      auto g = std::make_shared<const TrapGeometry>(build_trap(p));
      ReportOptions o;
      o.target_omega = target_omega;
      o.compute_depth = depth;
      o.depth.resolution = depth_res_um * 1e-6;
      o.compute_capacitance = false;
      o.reference = &ref;
      o.cache_dir = cache_dir_from_env();
      const TrapReport r = full_report(g, species, drive, o);
      std::string status = "ok";
      if (!r.d || !r.k) {
        status = "error: " + (r.not_computed.count("d") ? r.not_computed.at("d") : r.not_computed.at("k"));
        ++failures;
      }
      std::replace(status.begin(), status.end(), ',', ';');
      line = fmt::format("{},{},{},{},{},{},{},{}", fmt::format("{:.3f}", h_um), num(r.d, 1e6, "{:.3f}"),
                         num(r.k, 1.0, "{:.5f}"), num(r.depth_meV, 1.0, "{:.5g}"), num(r.omega_rad, mhz, "{:.5f}"),
                         num(r.q, 1.0, "{:.5f}"), num(r.heating_norm, 1.0, "{:.5g}"), status);
      diag["solve"] = solve_json(r.solve);
      diag["warnings"] = r.warnings;
    } catch (const std::exception& e) {
      ++failures;
      std::string msg = e.what();
      std::replace(msg.begin(), msg.end(), ',', ';');
      line = fmt::format("{:.3f},NA,NA,NA,NA,NA,NA,error: {}", h_um, msg);
      diag["error"] = e.what();
    }
    csv << line << '\n';
    csv.flush();
    fmt::print("{}\n", line);
    rows.push_back(diag);
  }
  manifest.diagnostics()["rows"] = rows;
  manifest.write(manifest_file, {csv_file});
  return failures == hs.size() ? kExitFailure : kExitOk;
}

int cmd_map(const CommonOptions& c, const MapOptions& opts) {
  Manifest manifest("map", c.argv);
  const std::string text = stage("read geometry", [&] { return read_text(opts.geometry); });
  manifest.add_input_text(opts.geometry, text);
  json doc = stage("parse geometry", [&] { return parse_json_text(text, opts.geometry); });
  apply_mesh_override(doc, c);
  auto g = stage("build geometry", [&] { return std::make_shared<const TrapGeometry>(geometry_from_json(doc)); });

  Box box = g->fine_region;
  if (!opts.box_um.empty()) {
    if (opts.box_um.size() != 6) throw InvalidInput("--box-um needs six numbers: xlo,xhi,ylo,yhi,zlo,zhi");
    for (int a = 0; a < 3; ++a) {
      box.lo[a] = opts.box_um[2 * a] * 1e-6;
      box.hi[a] = opts.box_um[2 * a + 1] * 1e-6;
    }
  } else {
    const auto eq = opts.plane.find('=');
    if (eq == std::string::npos || eq != 1 || std::string("xyz").find(opts.plane[0]) == std::string::npos) {
      throw InvalidInput(fmt::format("--plane '{}' must look like z=0 (value in um)", opts.plane));
    }
    const int axis = static_cast<int>(std::string("xyz").find(opts.plane[0]));
    double value = 0.0;
    try {
      value = std::stod(opts.plane.substr(2)) * 1e-6;
    } catch (const std::exception&) {
      throw InvalidInput(fmt::format("--plane '{}' has no numeric value", opts.plane));
    }
    box.lo[axis] = value;
    box.hi[axis] = value;
    if (axis != 1) box.lo.y() = std::max(box.lo.y(), g->bottom_wafer_height());
  }
  const IonSpecies species = stage("species", [&] { return species_by_name(c.species); });
  const DriveParams drive = stage("drive", [&] { return drive_of(c); });
  const SolvedTrap solved = stage("solve", [&] { return solve_cached(g, cache_dir_from_env()); });
  const PseudoField field(solved, species, drive);
  const double res = opts.resolution_um * 1e-6;
  const PseudoGrid grid = stage("map", [&] { return pseudo_map(field, box, res); });

  const std::string prefix = c.out.empty() ? "map" : c.out;
  const fs::path csv_file = with_suffix(prefix, ".csv");
  const fs::path header_file = with_suffix(prefix, ".json");
  const fs::path manifest_file = with_suffix(prefix, ".manifest.json");
  ensure_parent(csv_file);
  {
    std::ofstream csv(csv_file);
    csv << manifest.csv_comment(manifest_file) << '\n';
    write_grid_csv(grid, csv);
  }
  json header = grid_header(grid, field, box, res);
  header["geometry"] = std::string(to_string(g->design));
  header["data"] = csv_file.filename().string();
  header["manifest"] = manifest.reference(manifest_file);
  std::ofstream(header_file) << header.dump(2) << '\n';
  manifest.diagnostics()["solve"] = solve_json(solved.diagnostics);
  manifest.diagnostics()["nodes"] = grid.psi_meV.size();
  manifest.write(manifest_file, {csv_file, header_file});
  fmt::print("{} ({} x {} x {} nodes)\n", csv_file.string(), grid.nx(), grid.ny(), grid.nz());
  return kExitOk;
}

}  // namespace iontrap::cli
