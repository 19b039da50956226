#include "dpcr/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <thread>

#include "dpcr/error.hpp"

namespace dpcr {

using nlohmann::json;

namespace {

class Reader {
public:
    Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(where() + " must be an object");
    }

    // Rejects any key that was not listed.
    void allow(std::initializer_list<const char*> keys) const {
        std::set<std::string> known(keys.begin(), keys.end());
        for (const auto& [key, value] : node_.items()) {
            if (!known.contains(key)) throw ConfigError("unknown config key '" + child(key) + "'");
        }
    }

    bool has(const char* key) const { return node_.contains(key); }

    Reader object(const char* key) const { return Reader(node_.at(key), child(key)); }

    std::string string(const char* key, std::string fallback) const {
        if (!has(key)) return fallback;
        const auto& v = node_.at(key);
        if (!v.is_string()) throw ConfigError("config key '" + child(key) + "' must be a string");
        return v.get<std::string>();
    }

    double number(const char* key, double fallback) const {
        if (!has(key)) return fallback;
        const auto& v = node_.at(key);
        if (!v.is_number()) throw ConfigError("config key '" + child(key) + "' must be a number");
        return v.get<double>();
    }

    std::uint64_t integer(const char* key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        return required_integer(key);
    }

    std::uint64_t required_integer(const char* key) const {
        if (!has(key)) throw ConfigError("missing required config key '" + child(key) + "'");
        const auto& v = node_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
            throw ConfigError("config key '" + child(key) + "' must be a nonnegative integer");
        }
        return v.get<std::uint64_t>();
    }

    template <typename T>
    std::vector<T> list(const char* key, std::vector<T> fallback) const {
        if (!has(key)) return fallback;
        const auto& v = node_.at(key);
        if (!v.is_array()) throw ConfigError("config key '" + child(key) + "' must be an array");
        std::vector<T> out;
        for (const auto& item : v) {
            try {
                out.push_back(item.get<T>());
            } catch (const json::exception&) {
                throw ConfigError("config key '" + child(key) + "' has an element of the wrong type");
            }
        }
        return out;
    }

    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    std::string where() const { return path_.empty() ? "config root" : "'" + path_ + "'"; }

private:
    const json& node_;
    std::string path_;
};

template <typename F>
auto as_config_error(const std::string& key, F&& f) {
    try {
        return f();
    } catch (const InvalidInput& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
    }
}

DriftScenario parse_scenario(const Reader& r) {
    r.allow({"dim", "seed", "tasks", "classes_per_task", "train_per_class", "test_per_class",
             "mean_radius", "within_class_std", "drift_kind", "drift_strength",
             "observation_noise_std"});
    DriftScenario sc;
    sc.dim = r.required_integer("dim");
    sc.seed = r.integer("seed", sc.seed);
    sc.tasks = r.integer("tasks", sc.tasks);
    sc.classes_per_task = r.integer("classes_per_task", sc.classes_per_task);
    sc.train_per_class = r.integer("train_per_class", sc.train_per_class);
    sc.test_per_class = r.integer("test_per_class", sc.test_per_class);
    sc.mean_radius = r.number("mean_radius", sc.mean_radius);
    sc.within_class_std = r.number("within_class_std", sc.within_class_std);
    sc.drift_kind = as_config_error(r.child("drift_kind"), [&] {
        return drift_kind_from_string(r.string("drift_kind", to_string(sc.drift_kind)));
    });
    sc.drift_strength = r.number("drift_strength", sc.drift_strength);
    sc.observation_noise_std = r.number("observation_noise_std", sc.observation_noise_std);
    try {
        sc.validate();
    } catch (const InvalidInput& e) {
        throw ConfigError(r.where() + ": " + e.what());
    }
    return sc;
}

MethodVariant parse_method(const Reader& r) {
    r.allow({"name", "gamma", "eps", "rank_policy"});
    MethodVariant m;
    m.name = as_config_error(r.child("name"),
                             [&] { return method_from_string(r.string("name", display_name(m.name))); });
    m.gamma = r.number("gamma", m.gamma);
    m.eps = r.number("eps", m.eps);
    if (r.has("rank_policy")) {
        const Reader rp = r.object("rank_policy");
        rp.allow({"mode", "threshold", "k"});
        m.rank_policy.mode = as_config_error(rp.child("mode"), [&] {
            return rank_mode_from_string(rp.string("mode", to_string(m.rank_policy.mode)));
        });
        m.rank_policy.threshold = rp.number("threshold", m.rank_policy.threshold);
        m.rank_policy.k = rp.integer("k", m.rank_policy.k);
    }
    as_config_error(r.child("gamma"), [&] {
        m.validate();
        return 0;
    });
    return m;
}

}  // namespace

AblationAxes AblationConfig::axes() const {
    if (preset == "ladder") return AblationAxes::ladder();
    if (preset == "gamma-sweep") return AblationAxes::gamma_sweep();
    if (preset != "custom") {
        throw ConfigError("config key 'ablation.preset': unknown preset '" + preset + "'");
    }
    AblationAxes axes;
    for (const auto& name : methods) {
        axes.methods.push_back(
            as_config_error("ablation.methods", [&] { return method_from_string(name); }));
    }
    axes.gammas = gammas;
    if (axes.methods.empty() && axes.gammas.empty()) {
        throw ConfigError("config key 'ablation': custom preset needs methods or gammas");
    }
    return axes;
}

bool OutputConfig::wants(const std::string& format) const {
    return std::find(formats.begin(), formats.end(), format) != formats.end();
}

std::size_t RunConfig::effective_threads() const {
    if (threads > 0) return threads;
    return std::max(1u, std::thread::hardware_concurrency());
}

json RunConfig::to_json() const {
    json doc;
    json src;
    src["kind"] = source.kind == SourceConfig::Kind::sim ? "sim" : "dumps";
    if (source.kind == SourceConfig::Kind::sim) {
        const auto& sc = source.scenario;
        src["scenario"] = {
            {"dim", sc.dim},
            {"seed", sc.seed},
            {"tasks", sc.tasks},
            {"classes_per_task", sc.classes_per_task},
            {"train_per_class", sc.train_per_class},
            {"test_per_class", sc.test_per_class},
            {"mean_radius", sc.mean_radius},
            {"within_class_std", sc.within_class_std},
            {"drift_kind", to_string(sc.drift_kind)},
            {"drift_strength", sc.drift_strength},
            {"observation_noise_std", sc.observation_noise_std},
        };
    } else {
        src["directory"] = source.directory.string();
    }
    doc["source"] = src;
    doc["method"] = {
        {"name", display_name(method.name)},
        {"gamma", method.gamma},
        {"eps", method.eps},
        {"rank_policy",
         {{"mode", to_string(method.rank_policy.mode)},
          {"threshold", method.rank_policy.threshold},
          {"k", method.rank_policy.k}}},
    };
    doc["ablation"] = {{"preset", ablation.preset}, {"methods", ablation.methods}, {"gammas", ablation.gammas}};
    doc["output"] = {{"directory", output.directory.string()}, {"formats", output.formats}};
    doc["threads"] = threads;
    return doc;
}

RunConfig RunConfig::from_json(const json& doc) {
    const Reader root(doc, "");
    root.allow({"source", "method", "ablation", "output", "threads"});
    RunConfig cfg;

    if (!root.has("source")) throw ConfigError("missing required config key 'source'");
    const Reader src = root.object("source");
    src.allow({"kind", "scenario", "directory"});
    const std::string kind = src.string("kind", "sim");
    if (kind == "sim") {
        cfg.source.kind = SourceConfig::Kind::sim;
        if (src.has("directory")) {
            throw ConfigError("config key 'source.directory' is only valid for kind 'dumps'");
        }
        if (!src.has("scenario")) {
            throw ConfigError("missing required config key 'source.scenario.dim'");
        }
        cfg.source.scenario = parse_scenario(src.object("scenario"));
    } else if (kind == "dumps") {
        cfg.source.kind = SourceConfig::Kind::dumps;
        if (src.has("scenario")) {
            throw ConfigError("config key 'source.scenario' is only valid for kind 'sim'");
        }
        const std::string dir = src.string("directory", "");
        if (dir.empty()) throw ConfigError("missing required config key 'source.directory'");
        cfg.source.directory = dir;
    } else {
        throw ConfigError("config key 'source.kind' must be 'sim' or 'dumps', got '" + kind + "'");
    }

    if (root.has("method")) cfg.method = parse_method(root.object("method"));

    if (root.has("ablation")) {
        const Reader ab = root.object("ablation");
        ab.allow({"preset", "methods", "gammas"});
        cfg.ablation.preset = ab.string("preset", cfg.ablation.preset);
        cfg.ablation.methods = ab.list<std::string>("methods", {});
        cfg.ablation.gammas = ab.list<double>("gammas", {});
        if (cfg.ablation.preset != "custom" &&
            (!cfg.ablation.methods.empty() || !cfg.ablation.gammas.empty())) {
            throw ConfigError("config keys 'ablation.methods'/'ablation.gammas' need preset 'custom'");
        }
        cfg.ablation.axes();
    }

    if (root.has("output")) {
        const Reader out = root.object("output");
        out.allow({"directory", "formats"});
        cfg.output.directory = out.string("directory", cfg.output.directory.string());
        cfg.output.formats = out.list<std::string>("formats", cfg.output.formats);
        for (const auto& f : cfg.output.formats) {
            if (f != "json" && f != "csv" && f != "checkpoint") {
                throw ConfigError("config key 'output.formats': unknown format '" + f + "'");
            }
        }
    }
    cfg.threads = root.integer("threads", 0);
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return from_json(doc);
}

void ConfigOverrides::apply(RunConfig& config) const {
    if (seed) {
        if (config.source.kind != SourceConfig::Kind::sim) {
            throw ConfigError("--seed only applies to simulator sources");
        }
        config.source.scenario.seed = *seed;
    }
    if (method) {
        config.method.name = as_config_error("--method", [&] { return method_from_string(*method); });
    }
    if (gamma) {
        config.method.gamma = *gamma;
        as_config_error("--gamma", [&] {
            config.method.validate();
            return 0;
        });
    }
    if (threads) config.threads = *threads;
    if (out) config.output.directory = *out;
}

}  // namespace dpcr
