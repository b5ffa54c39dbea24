#include "qrd/manifest.hpp"

#include <ctime>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace qrd {

std::string utc_timestamp_now() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string manifest_to_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["command"] = m.command;
    j["config_path"] = m.config_path;
    j["config_hash"] = m.config_hash;
    j["corpus_path"] = m.corpus_path;
    j["corpus_hash"] = m.corpus_hash;
    j["seed"] = m.seed;
    j["timestamp_utc"] = m.timestamp_utc;
    j["outputs"] = m.outputs;
    j["flags"] = m.flags;
    return j.dump(2) + "\n";
}

void write_manifest(const RunManifest& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << manifest_to_json(m);
}

RunManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("manifest parse error in " + path + ": " + e.what());
    }
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config_path = j.at("config_path").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.corpus_path = j.at("corpus_path").get<std::string>();
    m.corpus_hash = j.at("corpus_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.timestamp_utc = j.at("timestamp_utc").get<std::string>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    m.flags = j.at("flags").get<std::vector<std::string>>();
    return m;
}

}  // namespace qrd
