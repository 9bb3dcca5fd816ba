#pragma once

// Every CLI run writes a manifest next to its primary output: the command,
// all resolved parameters and the involved files. Re-running from a manifest
// reproduces the outputs byte for byte, so manifests carry no timestamps.

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace qaware {

inline constexpr const char* kToolkitVersion = "0.1.0";

struct RunManifest {
  std::string command;
  std::string version = kToolkitVersion;
  nlohmann::json params;  // resolved flag values, flat key/value object
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

inline nlohmann::json manifest_to_json(const RunManifest& m) {
  nlohmann::json j;
  j["tool"] = "qaware";
  j["version"] = m.version;
  j["command"] = m.command;
  j["params"] = m.params;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  return j;
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.version = j.at("version").get<std::string>();
  m.params = j.at("params");
  if (j.contains("inputs")) m.inputs = j.at("inputs").get<std::vector<std::string>>();
  if (j.contains("outputs")) m.outputs = j.at("outputs").get<std::vector<std::string>>();
  return m;
}

inline void write_manifest(const RunManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << manifest_to_json(m).dump(2) << '\n';
}

inline RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  nlohmann::json j;
  in >> j;
  return manifest_from_json(j);
}

}  // namespace qaware
