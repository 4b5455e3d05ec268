#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace defglm::cli {

/// 64-bit FNV-1a of the bytes, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

struct FileDigest {
  std::string path;  ///< outputs: relative to the manifest's directory
  std::string digest;
  std::size_t bytes = 0;
};

/// Record of one command execution. Together with the embedded config text it
/// holds everything needed to run the command again.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> options;
  std::string config_text;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::string version;
  std::string started_utc;
  std::string finished_utc;
  std::map<std::string, std::string> settings;  ///< effective values worth reporting
  std::vector<std::string> notes;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
};

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(std::string_view text, std::string_view source);

std::string utc_timestamp();
std::string software_version();

}  // namespace defglm::cli
