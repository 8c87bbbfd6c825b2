#pragma once

#include <functional>
#include <map>

#include "swinecat/data.hpp"
#include "swinecat/model.hpp"
#include "swinecat/train.hpp"

namespace swinecat {

// ---------------------------------------------------------------------------
// Flat key = value run configuration with command-line overrides.
// Precedence: CLI > config file > defaults. Unknown keys are rejected.
// ---------------------------------------------------------------------------

struct RunConfig {
    ModelConfig model;
    TrainConfig train;

    std::string data_dir;
    std::string manifest_path;
    std::string out_dir = "run";
    std::string run_name = "exp";
    std::string checkpoint;
    std::string split = "test";
    std::string stats_scope = "all";
    size_t per_class = 10;
    size_t synth_size = 0; // 0 = model image_size

    std::string artifact_dir() const { return out_dir + "/" + run_name; }

    size_t effective_synth_size() const { return synth_size ? synth_size : model.image_size; }

    StatsScope scope() const {
        if (stats_scope == "all") return StatsScope::kAll;
        if (stats_scope == "train") return StatsScope::kTrainOnly;
        throw ConfigError("stats_scope must be 'all' or 'train', got '" + stats_scope + "'");
    }
};

namespace detail {

inline long parse_int(const std::string& key, const std::string& v) {
    char* end = nullptr;
    long r = std::strtol(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') {
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
    return r;
}

inline size_t parse_uint(const std::string& key, const std::string& v) {
    long r = parse_int(key, v);
    if (r < 0) throw ConfigError("config: key '" + key + "' must be non-negative, got '" + v + "'");
    return static_cast<size_t>(r);
}

inline double parse_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    double r = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0') {
        throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
    }
    return r;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

inline std::array<size_t, 4> parse_four(const std::string& key, const std::string& v) {
    std::array<size_t, 4> out{};
    std::istringstream ss(v);
    std::string item;
    size_t n = 0;
    while (std::getline(ss, item, ',')) {
        if (n >= 4) throw ConfigError("config: key '" + key + "' expects 4 comma-separated values");
        out[n++] = parse_uint(key, item);
    }
    if (n != 4) throw ConfigError("config: key '" + key + "' expects 4 comma-separated values");
    return out;
}

} // namespace detail

/// Applies one key/value onto the config; throws ConfigError on unknown keys
/// or malformed values.
inline void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
    using detail::parse_bool;
    using detail::parse_double;
    using detail::parse_four;
    using detail::parse_int;
    using detail::parse_uint;

    if (key == "image_size") cfg.model.image_size = parse_uint(key, value);
    else if (key == "patch_size") cfg.model.patch_size = parse_uint(key, value);
    else if (key == "embed_dim") cfg.model.embed_dim = parse_uint(key, value);
    else if (key == "depths") cfg.model.depths = parse_four(key, value);
    else if (key == "num_heads") cfg.model.num_heads = parse_four(key, value);
    else if (key == "window_size") cfg.model.window_size = parse_uint(key, value);
    else if (key == "mlp_ratio") cfg.model.mlp_ratio = parse_double(key, value);
    else if (key == "num_classes") cfg.model.num_classes = parse_uint(key, value);
    else if (key == "eca_enabled") cfg.model.eca_enabled = parse_bool(key, value);
    else if (key == "eca_gamma") cfg.model.eca.gamma = static_cast<int>(parse_int(key, value));
    else if (key == "eca_b") cfg.model.eca.b = static_cast<int>(parse_int(key, value));
    else if (key == "eca_k") cfg.model.eca.explicit_k = static_cast<int>(parse_int(key, value));
    else if (key == "use_relative_bias") cfg.model.use_relative_bias = parse_bool(key, value);
    else if (key == "seed") {
        cfg.model.seed = static_cast<uint64_t>(parse_uint(key, value));
        cfg.train.seed = cfg.model.seed;
    }
    else if (key == "learning_rate") cfg.train.learning_rate = parse_double(key, value);
    else if (key == "batch_size") cfg.train.batch_size = parse_uint(key, value);
    else if (key == "patience") cfg.train.patience = static_cast<int>(parse_int(key, value));
    else if (key == "max_epochs") cfg.train.max_epochs = static_cast<int>(parse_int(key, value));
    else if (key == "adam_beta1") cfg.train.beta1 = parse_double(key, value);
    else if (key == "adam_beta2") cfg.train.beta2 = parse_double(key, value);
    else if (key == "adam_eps") cfg.train.eps = parse_double(key, value);
    else if (key == "target_train_acc") cfg.train.target_train_acc = parse_double(key, value);
    else if (key == "loader_workers") cfg.train.loader_workers = parse_uint(key, value);
    else if (key == "prefetch_batches") cfg.train.prefetch_batches = parse_uint(key, value);
    else if (key == "data_dir") cfg.data_dir = value;
    else if (key == "manifest") cfg.manifest_path = value;
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "run_name") cfg.run_name = value;
    else if (key == "checkpoint") cfg.checkpoint = value;
    else if (key == "split") cfg.split = value;
    else if (key == "stats_scope") cfg.stats_scope = value;
    else if (key == "per_class") cfg.per_class = parse_uint(key, value);
    else if (key == "synth_size") cfg.synth_size = parse_uint(key, value);
    else throw ConfigError("config: unknown key '" + key + "'");
}

/// Parses a flat `key = value` file ('#' comments, blank lines allowed).
inline std::vector<std::pair<std::string, std::string>> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string line;
    size_t lineno = 0;
    auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r");
        size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config " + path + ": line " + std::to_string(lineno) +
                              " is not 'key = value'");
        }
        pairs.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return pairs;
}

/// Resolved-config dump, written next to run artifacts for reproducibility.
inline std::string resolved_config_text(const RunConfig& cfg) {
    std::ostringstream os;
    os.precision(17);
    auto four = [](const std::array<size_t, 4>& a) {
        std::ostringstream s;
        s << a[0] << ',' << a[1] << ',' << a[2] << ',' << a[3];
        return s.str();
    };
    os << "image_size = " << cfg.model.image_size << '\n';
    os << "patch_size = " << cfg.model.patch_size << '\n';
    os << "embed_dim = " << cfg.model.embed_dim << '\n';
    os << "depths = " << four(cfg.model.depths) << '\n';
    os << "num_heads = " << four(cfg.model.num_heads) << '\n';
    os << "window_size = " << cfg.model.window_size << '\n';
    os << "mlp_ratio = " << cfg.model.mlp_ratio << '\n';
    os << "num_classes = " << cfg.model.num_classes << '\n';
    os << "eca_enabled = " << (cfg.model.eca_enabled ? "true" : "false") << '\n';
    os << "eca_gamma = " << cfg.model.eca.gamma << '\n';
    os << "eca_b = " << cfg.model.eca.b << '\n';
    os << "eca_k = " << cfg.model.eca.explicit_k << '\n';
    os << "use_relative_bias = " << (cfg.model.use_relative_bias ? "true" : "false") << '\n';
    os << "seed = " << cfg.model.seed << '\n';
    os << "learning_rate = " << cfg.train.learning_rate << '\n';
    os << "batch_size = " << cfg.train.batch_size << '\n';
    os << "patience = " << cfg.train.patience << '\n';
    os << "max_epochs = " << cfg.train.max_epochs << '\n';
    os << "adam_beta1 = " << cfg.train.beta1 << '\n';
    os << "adam_beta2 = " << cfg.train.beta2 << '\n';
    os << "adam_eps = " << cfg.train.eps << '\n';
    os << "target_train_acc = " << cfg.train.target_train_acc << '\n';
    os << "loader_workers = " << cfg.train.loader_workers << '\n';
    os << "prefetch_batches = " << cfg.train.prefetch_batches << '\n';
    os << "data_dir = " << cfg.data_dir << '\n';
    os << "manifest = " << cfg.manifest_path << '\n';
    os << "out_dir = " << cfg.out_dir << '\n';
    os << "run_name = " << cfg.run_name << '\n';
    os << "checkpoint = " << cfg.checkpoint << '\n';
    os << "split = " << cfg.split << '\n';
    os << "stats_scope = " << cfg.stats_scope << '\n';
    os << "per_class = " << cfg.per_class << '\n';
    os << "synth_size = " << cfg.synth_size << '\n';
    return os.str();
}

} // namespace swinecat
