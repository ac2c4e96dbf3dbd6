#include "manifest.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/core.h>

#include "iontrap/errors.hpp"

#ifndef IONTRAP_VERSION
#define IONTRAP_VERSION "0.0.0"
#endif

namespace iontrap::cli {

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::string tool_version() { return IONTRAP_VERSION; }

Manifest::Manifest(std::string command, std::vector<std::string> args)
    : command_(std::move(command)), args_(std::move(args)) {}

void Manifest::add_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput(fmt::format("cannot open '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  inputs_.emplace_back(path.string(), fnv1a_hex(buffer.str()));
}

void Manifest::add_input_text(const std::string& label, const std::string& text) {
  inputs_.emplace_back(label, fnv1a_hex(text));
}

std::string Manifest::run_id() const {
  std::string key = tool_version() + '\n' + command_ + '\n';
  for (const auto& a : args_) key += a + '\x1f';
  for (const auto& [label, hash] : inputs_) key += label + '=' + hash + '\n';
  return fnv1a_hex(key);
}

nlohmann::json Manifest::reference(const std::filesystem::path& manifest_file) const {
  return {{"file", manifest_file.filename().string()}, {"run_id", run_id()}, {"tool", "iontrap " + tool_version()}};
}

std::string Manifest::csv_comment(const std::filesystem::path& manifest_file) const {
  return fmt::format("# manifest: {} run {} (iontrap {})", manifest_file.filename().string(), run_id(), tool_version());
}

void Manifest::write(const std::filesystem::path& manifest_file,
                     const std::vector<std::filesystem::path>& outputs) const {
  nlohmann::json j;
  j["tool"] = "iontrap";
  j["version"] = tool_version();
  j["command"] = command_;
  j["args"] = args_;
  j["run_id"] = run_id();
  j["timestamp_utc"] = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                                 std::chrono::system_clock::now())));
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& [label, hash] : inputs_) inputs.push_back({{"input", label}, {"fnv1a64", hash}});
  j["inputs"] = inputs;
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& o : outputs) outs.push_back(o.filename().string());
  j["outputs"] = outs;
  j["diagnostics"] = diagnostics_;
  std::ofstream out(manifest_file);
  if (!out) throw InvalidInput(fmt::format("cannot write '{}'", manifest_file.string()));
  out << j.dump(2) << '\n';
}

}  // namespace iontrap::cli
