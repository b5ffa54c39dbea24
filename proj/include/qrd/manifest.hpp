#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace qrd {

// Provenance record written next to every command's outputs so a run can be
// reproduced from the manifest alone.
struct RunManifest {
    std::string command;
    std::string config_path;
    std::string config_hash;  // empty when no config file was given
    std::string corpus_path;
    std::string corpus_hash;  // empty when the command does not read a corpus
    std::uint64_t seed = 0;
    std::string timestamp_utc;
    std::map<std::string, std::string> outputs;  // label -> path
    std::vector<std::string> flags;              // ablation / behaviour switches
};

std::string utc_timestamp_now();
std::string manifest_to_json(const RunManifest& m);
void write_manifest(const RunManifest& m, const std::string& path);
RunManifest read_manifest(const std::string& path);

}  // namespace qrd
