#include "qrd/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qrd {
namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

ConfigFile ConfigFile::from_string(const std::string& text) {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected key = value, got: " + t);
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
        if (cfg.values_.count(key))
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": duplicate key: " + key);
        cfg.values_[key] = value;
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str());
}

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) {
    consumed_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

long ConfigFile::get_int(const std::string& key, long fallback) {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t pos = 0;
        long v = std::stol(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing chars");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("config key " + key + ": not an integer: " + it->second);
    }
}

double ConfigFile::get_double(const std::string& key, double fallback) {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t pos = 0;
        double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing chars");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("config key " + key + ": not a number: " + it->second);
    }
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::runtime_error("config key " + key + ": not a boolean: " + v);
}

std::vector<double> ConfigFile::get_double_list(const std::string& key,
                                                std::vector<double> fallback) {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    std::istringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument("trailing chars");
        } catch (const std::exception&) {
            throw std::runtime_error("config key " + key + ": bad list element: " + item);
        }
    }
    return out;
}

void ConfigFile::reject_unknown() const {
    std::string bad;
    for (const auto& [key, value] : values_) {
        (void)value;
        if (!consumed_.count(key)) bad += (bad.empty() ? "" : ", ") + key;
    }
    if (!bad.empty()) throw std::runtime_error("unknown config keys: " + bad);
}

CorpusConfig corpus_config_from(ConfigFile& cfg) {
    CorpusConfig c;
    c.n_queries = static_cast<int>(cfg.get_int("corpus.n_queries", c.n_queries));
    c.paths_per_query = static_cast<int>(cfg.get_int("corpus.paths_per_query", c.paths_per_query));
    c.p_wrong = cfg.get_double("corpus.p_wrong", c.p_wrong);
    c.p_spur = cfg.get_double("corpus.p_spur", c.p_spur);
    c.graph_seed = static_cast<std::uint64_t>(cfg.get_int("corpus.graph_seed",
                                                          static_cast<long>(c.graph_seed)));
    c.pattern_len = static_cast<int>(cfg.get_int("corpus.pattern_len", c.pattern_len));
    if (c.n_queries <= 0) throw std::runtime_error("corpus.n_queries must be positive");
    if (c.paths_per_query <= 0) throw std::runtime_error("corpus.paths_per_query must be positive");
    if (c.p_wrong < 0 || c.p_wrong > 1) throw std::runtime_error("corpus.p_wrong must be in [0,1]");
    if (c.p_spur < 0 || c.p_spur > 1) throw std::runtime_error("corpus.p_spur must be in [0,1]");
    return c;
}

TrainConfig train_config_from(ConfigFile& cfg) {
    TrainConfig t;
    t.lambda1 = cfg.get_double("train.lambda1", t.lambda1);
    t.lambda2 = cfg.get_double("train.lambda2", t.lambda2);
    t.router_ridge = cfg.get_double("train.router_ridge", t.router_ridge);
    t.competence_cal = cfg.get_double("train.competence_cal", t.competence_cal);
    t.mutual_warmup_frac = cfg.get_double("train.mutual_warmup_frac", t.mutual_warmup_frac);
    t.epochs = static_cast<int>(cfg.get_int("train.epochs", t.epochs));
    t.batch_queries = static_cast<int>(cfg.get_int("train.batch_queries", t.batch_queries));
    t.lr_students = cfg.get_double("train.lr_students", t.lr_students);
    t.lr_aux = cfg.get_double("train.lr_aux", t.lr_aux);
    t.tau_start = cfg.get_double("train.tau_start", t.tau_start);
    t.tau_end = cfg.get_double("train.tau_end", t.tau_end);
    t.mutual_all_paths = cfg.get_bool("train.mutual_all_paths", t.mutual_all_paths);
    t.mutual_raw_sum = cfg.get_bool("train.mutual_raw_sum", t.mutual_raw_sum);
    t.d_embed = static_cast<int>(cfg.get_int("train.d_embed", t.d_embed));
    t.router_hidden = static_cast<int>(cfg.get_int("train.router_hidden", t.router_hidden));
    t.d_shared = static_cast<int>(cfg.get_int("train.d_shared", t.d_shared));
    t.heldout_frac = cfg.get_double("train.heldout_frac", t.heldout_frac);
    t.train_fraction = cfg.get_double("train.train_fraction", t.train_fraction);
    t.eval_every_epoch = cfg.get_bool("train.eval_every_epoch", t.eval_every_epoch);
    t.eval_max_new = static_cast<int>(cfg.get_int("train.eval_max_new", t.eval_max_new));
    if (t.router_ridge < 0) throw std::runtime_error("train.router_ridge must be nonnegative");
    if (t.competence_cal < 0)
        throw std::runtime_error("train.competence_cal must be nonnegative");
    if (t.mutual_warmup_frac < 0 || t.mutual_warmup_frac >= 1)
        throw std::runtime_error("train.mutual_warmup_frac must be in [0,1)");
    if (t.epochs <= 0) throw std::runtime_error("train.epochs must be positive");
    if (t.batch_queries <= 0) throw std::runtime_error("train.batch_queries must be positive");
    if (t.tau_start <= 0 || t.tau_end <= 0)
        throw std::runtime_error("train.tau_start/tau_end must be positive");
    if (t.heldout_frac < 0 || t.heldout_frac >= 1)
        throw std::runtime_error("train.heldout_frac must be in [0,1)");
    if (t.train_fraction <= 0 || t.train_fraction > 1)
        throw std::runtime_error("train.train_fraction must be in (0,1]");
    return t;
}

}  // namespace qrd
