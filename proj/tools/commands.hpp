#pragma once

#include <optional>
#include <string>
#include <vector>

namespace iontrap::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInvalidInput = 2;
inline constexpr int kExitSolverFailure = 3;

struct CommonOptions {
  double voltage_V = 10.0;
  double freq_MHz = 20.0;
  std::string species = "Ca40";
  std::optional<double> mesh_fine_um;
  std::string out;
  std::vector<std::string> argv;  // for the manifest
};

struct BuildOptions {
  std::string design = "all";
  std::optional<double> h_um;
};

struct ReportCmdOptions {
  std::string geometry;
  bool depth = true;
  bool reference = true;
  double target_MHz = 10.0;
  double depth_resolution_um = 5.0;
};

struct MapOptions {
  std::string geometry;
  std::string plane = "z=0";
  std::vector<double> box_um;  // xlo,xhi,ylo,yhi,zlo,zhi
  double resolution_um = 5.0;
};

struct ValidateOptions {
  double eps0_scale = 1.0;  // fault injection
  bool verbose = false;
};

int cmd_build(const CommonOptions& common, const BuildOptions& opts);
int cmd_report(const CommonOptions& common, const ReportCmdOptions& opts);
int cmd_sweep(const CommonOptions& common, const std::string& spec_file);
int cmd_map(const CommonOptions& common, const MapOptions& opts);
int cmd_validate(const CommonOptions& common, const ValidateOptions& opts);

}  // namespace iontrap::cli
