// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cpvae/error.hpp"
#include "cpvae/io.hpp"
#include "json.hpp"

namespace cpvae {

inline constexpr int kManifestFormatVersion = 1;

/// Provenance record for one CLI invocation. Only `timings_seconds` depends on the
/// wall clock; everything else is a function of the inputs.
struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::uint64_t> seeds;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  int format_version = kManifestFormatVersion;
  std::map<std::string, double> timings_seconds;

  friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

inline nlohmann::json to_json(const RunManifest& m) {
  return {{"kind", "run_manifest"},
          {"format_version", m.format_version},
          {"command", m.command},
          {"config", m.config},
          {"seeds", m.seeds},
          {"inputs", m.inputs},
          {"outputs", m.outputs},
          {"timings_seconds", m.timings_seconds}};
}

inline RunManifest run_manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    detail::require(j.value("kind", "") == "run_manifest", "not a run manifest");
    m.format_version = j.at("format_version").get<int>();
    detail::require(m.format_version == kManifestFormatVersion,
                    "unsupported run manifest format_version");
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
    m.inputs = j.at("inputs").get<std::vector<std::string>>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.timings_seconds = j.at("timings_seconds").get<std::map<std::string, double>>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("malformed run manifest: " + std::string(e.what()));
  }
  return m;
}

inline RunManifest read_run_manifest(const std::filesystem::path& path) {
  try {
    return run_manifest_from_json(nlohmann::json::parse(io::read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput("run manifest is not valid JSON: " + std::string(e.what()));
  }
}

/// Writes the artifacts of one run into `out_dir`. Each artifact gets a
/// `<name>.manifest` sidecar naming the run manifest; `finish` writes the manifest.
class RunRecorder {
 public:
  RunRecorder(std::filesystem::path out_dir, std::string command)
      : out_dir_(std::move(out_dir)), start_(std::chrono::steady_clock::now()) {
    manifest_.command = std::move(command);
  }

  RunManifest& manifest() { return manifest_; }
  const std::filesystem::path& out_dir() const { return out_dir_; }
  std::string manifest_name() const { return manifest_.command + ".run.json"; }
  std::filesystem::path path(const std::string& name) const { return out_dir_ / name; }

  void input(const std::filesystem::path& p) { manifest_.inputs.push_back(p.string()); }

  void write(const std::string& name, const std::string& content, bool binary = false) {
    io::atomic_write(path(name), content, binary);
    adopt(name);
  }

  /// Registers a file that some other routine already wrote into out_dir.
  void adopt(const std::string& name) {
    manifest_.outputs.push_back(name);
    const nlohmann::json pointer = {{"run_manifest", manifest_name()},
                                    {"command", manifest_.command}};
    io::atomic_write(path(name + ".manifest"), pointer.dump() + "\n");
  }

  void lap(const std::string& label) {
    const auto now = std::chrono::steady_clock::now();
    manifest_.timings_seconds[label] = std::chrono::duration<double>(now - lap_start()).count();
    last_ = now;
  }

  std::filesystem::path finish() {
    manifest_.timings_seconds["total"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const auto p = path(manifest_name());
    io::atomic_write(p, to_json(manifest_).dump(2) + "\n");
    return p;
  }

 private:
  std::chrono::steady_clock::time_point lap_start() const {
    return last_ == std::chrono::steady_clock::time_point{} ? start_ : last_;
  }

  std::filesystem::path out_dir_;
  std::chrono::steady_clock::time_point start_;
  std::chrono::steady_clock::time_point last_{};
  RunManifest manifest_;
};

}  // namespace cpvae
