#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <fmt/ostream.h>

#include "commands.hpp"
#include "iontrap/errors.hpp"
#include "manifest.hpp"

using namespace iontrap;
using namespace iontrap::cli;

int main(int argc, char** argv) {
  CLI::App app{"Ion-trap geometry solver and figures of merit"};
  app.set_version_flag("--version", "iontrap " + tool_version());
  app.require_subcommand(1);

  CommonOptions common;
  for (int i = 1; i < argc; ++i) common.argv.emplace_back(argv[i]);
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--voltage-V", common.voltage_V, "rf amplitude (V)")->capture_default_str();
    sub->add_option("--freq-MHz", common.freq_MHz, "rf drive frequency (MHz)")->capture_default_str();
    sub->add_option("--species", common.species, "ion species, e.g. Ca40")->capture_default_str();
    sub->add_option("--mesh-fine-um", common.mesh_fine_um, "fine mesh element size (um)");
    sub->add_option("--out", common.out, "output path or prefix");
  };

  BuildOptions build;
  auto* build_cmd = app.add_subcommand("build", "write the default geometry JSON files");
  add_common(build_cmd);
  build_cmd->add_option("--design", build.design, "surface, gnd-surface, cross-rf or all")->capture_default_str();
  build_cmd->add_option("--h-um", build.h_um, "wafer separation (um)");

  ReportCmdOptions report;
  auto* report_cmd = app.add_subcommand("report", "figures of merit for one geometry");
  add_common(report_cmd);
  report_cmd->add_option("geometry", report.geometry, "geometry JSON")->required();
  report_cmd->add_flag("!--no-depth", report.depth, "skip the trap depth search");
  report_cmd->add_flag("!--no-reference", report.reference, "skip heating and power normalization");
  report_cmd->add_option("--target-MHz", report.target_MHz, "secular frequency target (MHz)")->capture_default_str();
  report_cmd->add_option("--depth-resolution-um", report.depth_resolution_um, "depth grid spacing (um)")
      ->capture_default_str();

  std::string sweep_spec;
  auto* sweep_cmd = app.add_subcommand("sweep", "figures of merit over wafer separations");
  add_common(sweep_cmd);
  sweep_cmd->add_option("spec", sweep_spec, "sweep spec JSON")->required();

  MapOptions map;
  auto* map_cmd = app.add_subcommand("map", "pseudopotential on a grid");
  add_common(map_cmd);
  map_cmd->add_option("geometry", map.geometry, "geometry JSON")->required();
  map_cmd->add_option("--plane", map.plane, "slice such as z=0 or y=90 (um)")->capture_default_str();
  map_cmd->add_option("--box-um", map.box_um, "xlo,xhi,ylo,yhi,zlo,zhi (um)")->delimiter(',')->expected(6);
  map_cmd->add_option("--resolution-um", map.resolution_um, "grid spacing (um)")->capture_default_str();

  ValidateOptions validate;
  auto* validate_cmd = app.add_subcommand("validate", "run the invariant suite");
  add_common(validate_cmd);
  validate_cmd->add_flag("-v,--verbose", validate.verbose, "print details for passing checks");
  validate_cmd->add_option("--inject-eps0-scale", validate.eps0_scale)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalidInput;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "build") return cmd_build(common, build);
    if (name == "report") return cmd_report(common, report);
    if (name == "sweep") return cmd_sweep(common, sweep_spec);
    if (name == "map") return cmd_map(common, map);
    return cmd_validate(common, validate);
  } catch (const InvalidInput& e) {
    fmt::print(std::cerr, "iontrap {}: invalid input: {}\n", name, e.what());
    return kExitInvalidInput;
  } catch (const SolverFailure& e) {
    fmt::print(std::cerr, "iontrap {}: solver failure: {}\n", name, e.what());
    return kExitSolverFailure;
  } catch (const std::exception& e) {
    fmt::print(std::cerr, "iontrap {}: error: {}\n", name, e.what());
    return kExitFailure;
  }
}
