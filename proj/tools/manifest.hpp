#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace iontrap::cli {

/// Provenance for one CLI invocation. The run id depends only on the tool
/// version, the command line and the input file contents, so reruns with
/// equal inputs reference the same id and produce identical outputs; the
/// timestamp lives only in the manifest file itself.
class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> args);

  void add_input(const std::filesystem::path& path);
  void add_input_text(const std::string& label, const std::string& text);
  void set_diagnostics(nlohmann::json diagnostics) { diagnostics_ = std::move(diagnostics); }
  nlohmann::json& diagnostics() { return diagnostics_; }

  std::string run_id() const;
  /// Short record embedded in every output file.
  nlohmann::json reference(const std::filesystem::path& manifest_file) const;
  /// One-line form for CSV outputs: "# manifest: <file> run <id>".
  std::string csv_comment(const std::filesystem::path& manifest_file) const;
  void write(const std::filesystem::path& manifest_file, const std::vector<std::filesystem::path>& outputs) const;

 private:
  std::string command_;
  std::vector<std::string> args_;
  std::vector<std::pair<std::string, std::string>> inputs_;  // label, hash
  nlohmann::json diagnostics_ = nlohmann::json::object();
};

std::string fnv1a_hex(const std::string& bytes);
std::string tool_version();

}  // namespace iontrap::cli
