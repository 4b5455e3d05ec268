#include "defglm_cli/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

#include <json.hpp>

#include "defglm/errors.hpp"

#ifndef DEFGLM_VERSION
#define DEFGLM_VERSION "unknown"
#endif

namespace defglm::cli {

using nlohmann::json;

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string software_version() { return DEFGLM_VERSION; }

namespace {

json digests_to_json(const std::vector<FileDigest>& files) {
  json arr = json::array();
  for (const auto& f : files) arr.push_back({{"path", f.path}, {"fnv1a64", f.digest}, {"bytes", f.bytes}});
  return arr;
}

std::vector<FileDigest> digests_from_json(const json& arr) {
  std::vector<FileDigest> out;
  for (const auto& f : arr) {
    out.push_back({f.at("path").get<std::string>(), f.at("fnv1a64").get<std::string>(),
                   f.at("bytes").get<std::size_t>()});
  }
  return out;
}

}  // namespace

std::string manifest_to_json(const RunManifest& m) {
  json doc = {
      {"command", m.command},
      {"options", m.options},
      {"seed", m.seed},
      {"config_digest", m.config_digest},
      {"config", m.config_text},
      {"software_version", m.version},
      {"started_utc", m.started_utc},
      {"finished_utc", m.finished_utc},
      {"settings", m.settings},
      {"notes", m.notes},
      {"inputs", digests_to_json(m.inputs)},
      {"outputs", digests_to_json(m.outputs)},
  };
  return doc.dump(2) + "\n";
}

RunManifest manifest_from_json(std::string_view text, std::string_view source) {
  try {
    const json doc = json::parse(text);
    RunManifest m;
    m.command = doc.at("command").get<std::string>();
    m.options = doc.at("options").get<std::map<std::string, std::string>>();
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.config_digest = doc.at("config_digest").get<std::string>();
    m.config_text = doc.at("config").get<std::string>();
    m.version = doc.value("software_version", "");
    m.started_utc = doc.value("started_utc", "");
    m.finished_utc = doc.value("finished_utc", "");
    if (doc.contains("settings")) m.settings = doc["settings"].get<std::map<std::string, std::string>>();
    if (doc.contains("notes")) m.notes = doc["notes"].get<std::vector<std::string>>();
    m.inputs = digests_from_json(doc.value("inputs", json::array()));
    m.outputs = digests_from_json(doc.value("outputs", json::array()));
    if (fnv1a_hex(m.config_text) != m.config_digest) {
      throw ConfigError("embedded config does not match its digest");
    }
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string(source) + ": malformed manifest: " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(source) + ": " + e.what());
  }
}

}  // namespace defglm::cli
