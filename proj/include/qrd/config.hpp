#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "qrd/corpus.hpp"
#include "qrd/trainer.hpp"

namespace qrd {

// Flat key = value configuration file. Every key must be consumed by a known
// reader; unknown keys are hard errors so hyperparameter typos cannot pass
// silently.
class ConfigFile {
public:
    ConfigFile() = default;
    static ConfigFile load(const std::string& path);
    static ConfigFile from_string(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get_string(const std::string& key, const std::string& fallback);
    long get_int(const std::string& key, long fallback);
    double get_double(const std::string& key, double fallback);
    bool get_bool(const std::string& key, bool fallback);
    std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback);

    // Throws listing any key that was never read.
    void reject_unknown() const;

private:
    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

CorpusConfig corpus_config_from(ConfigFile& cfg);
TrainConfig train_config_from(ConfigFile& cfg);

}  // namespace qrd
