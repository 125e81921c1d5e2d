#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vne_admit/agents.hpp"
#include "vne_admit/env.hpp"
#include "vne_admit/error.hpp"
#include "vne_admit/harness.hpp"
#include "vne_admit/sweep.hpp"

namespace vne_admit {

/// Flat `key = value` text: one entry per line, `#` starts a comment.
struct KeyValues {
    std::map<std::string, std::string> values;
    std::map<std::string, std::string> origin;  // key -> "file:line" or "--set"

    void set(const std::string& key, const std::string& value, const std::string& where) {
        values[key] = value;
        origin[key] = where;
    }
};

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline KeyValues parse_key_values(std::istream& in, const std::string& source) {
    KeyValues kv;
    std::string line;
    for (int n = 1; std::getline(in, line); ++n) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const auto where = source + ":" + std::to_string(n);
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(where + ": empty key");
        if (kv.values.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
        kv.set(key, trim(line.substr(eq + 1)), where);
    }
    return kv;
}

inline KeyValues read_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_key_values(in, path);
}

/// Applies `key=value` overrides on top of `kv`.
inline void apply_overrides(KeyValues& kv, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
        const auto key = trim(o.substr(0, eq));
        if (key.empty()) throw ConfigError("--set expects key=value, got '" + o + "'");
        kv.set(key, trim(o.substr(eq + 1)), "--set");
    }
}

// ---------------------------------------------------------------------------
// Experiment configuration

struct HarnessSettings {
    std::size_t runs = 100;
    std::int64_t steps = 1000;
    std::uint64_t base_seed = 1;
    std::int64_t train_steps = 200'000;
};

struct SweepSettings {
    SweepVariable variable = SweepVariable::c_d;
    std::vector<double> values;
    std::vector<int> eval_dmax{12, 16, 20, 24, 30, 35, 40, 45, 50};
    bool heatmaps = false;
    bool baseline = true;
};

struct ExperimentConfig {
    EnvConfig env;
    QLearnerConfig learner;
    HarnessSettings harness;
    std::string output_dir = "out";
    SweepSettings sweep;

    void validate() const {
        try {
            env.validate();
            learner.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        if (harness.runs < 1) throw ConfigError("harness.runs must be >= 1");
        if (harness.steps < 1) throw ConfigError("harness.steps must be >= 1");
        if (harness.train_steps < 0) throw ConfigError("harness.train_steps must be >= 0");
    }
};

inline constexpr const char* seed_env_var = "VNE_ADMIT_SEED";

namespace config_detail {

template <typename T>
T parse_int(const std::string& key, const std::string& text) {
    T v{};
    const auto s = trim(text);
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (s.empty() || res.ec != std::errc() || res.ptr != end)
        throw ConfigError(key + ": expected an integer, got '" + text + "'");
    return v;
}

inline double parse_real(const std::string& key, const std::string& text) {
    double v = 0.0;
    const auto s = trim(text);
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (s.empty() || res.ec != std::errc() || res.ptr != end)
        throw ConfigError(key + ": expected a number, got '" + text + "'");
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

inline std::vector<std::string> parse_list(const std::string& text, char sep = ',') {
    std::vector<std::string> out;
    if (trim(text).empty()) return out;
    for (const auto& item : split(text, sep)) out.push_back(trim(item));
    return out;
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F fmt, const char* sep = ", ") {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += sep;
        out += fmt(xs[i]);
    }
    return out;
}

struct Field {
    std::string key;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
    bool sweep_only = false;
};

template <typename Ref>
Field real_field(std::string key, Ref ref) {
    return {key,
            [key, ref](ExperimentConfig& c, const std::string& v) { ref(c) = parse_real(key, v); },
            [ref](const ExperimentConfig& c) { return format_number(ref(const_cast<ExperimentConfig&>(c))); }};
}

template <typename T, typename Ref>
Field int_field(std::string key, Ref ref) {
    return {key,
            [key, ref](ExperimentConfig& c, const std::string& v) { ref(c) = parse_int<T>(key, v); },
            [ref](const ExperimentConfig& c) { return std::to_string(ref(const_cast<ExperimentConfig&>(c))); }};
}

inline const std::vector<Field>& fields() {
    using C = ExperimentConfig;
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back(int_field<std::size_t>("network.nodes", [](C& c) -> std::size_t& { return c.env.network.node_count; }));
        f.push_back({"network.room",
                     [](C& c, const std::string& v) {
                         const auto parts = parse_list(v);
                         if (parts.size() != 3) throw ConfigError("network.room: expected width, depth, height");
                         c.env.network.room = {parse_real("network.room", parts[0]), parse_real("network.room", parts[1]),
                                               parse_real("network.room", parts[2])};
                     },
                     [](const C& c) {
                         const auto& r = c.env.network.room;
                         return format_number(r.width) + ", " + format_number(r.depth) + ", " + format_number(r.height);
                     }});
        f.push_back(real_field("network.bw_hz", [](C& c) -> double& { return c.env.network.bandwidth_hz; }));
        f.push_back(int_field<int>("network.slots", [](C& c) -> int& { return c.env.network.slots_per_step; }));
        f.push_back(real_field("network.carrier_hz", [](C& c) -> double& { return c.env.network.carrier_hz; }));
        f.push_back(real_field("network.min_distance_m", [](C& c) -> double& { return c.env.network.min_distance_m; }));
        f.push_back(real_field("network.tx_power_dbm", [](C& c) -> double& { return c.env.network.tx_power_dbm; }));
        f.push_back(real_field("network.noise_dbm", [](C& c) -> double& { return c.env.network.noise_dbm; }));
        f.push_back(real_field("network.capacity", [](C& c) -> double& { return c.env.network.capacity; }));
        f.push_back(int_field<std::uint64_t>("network.layout_seed", [](C& c) -> std::uint64_t& { return c.env.network.layout_seed; }));
        f.push_back({"network.positions",
                     [](C& c, const std::string& v) {
                         c.env.network.positions.clear();
                         for (const auto& pt : parse_list(v, ';')) {
                             const auto xyz = parse_list(pt);
                             if (xyz.size() != 3) throw ConfigError("network.positions: expected 'x, y, z; x, y, z; ...'");
                             c.env.network.positions.push_back({parse_real("network.positions", xyz[0]),
                                                                parse_real("network.positions", xyz[1]),
                                                                parse_real("network.positions", xyz[2])});
                         }
                     },
                     [](const C& c) {
                         return join(c.env.network.positions, [](const Vec3& p) {
                             return format_number(p.x) + ", " + format_number(p.y) + ", " + format_number(p.z);
                         }, "; ");
                     }});

        f.push_back(int_field<int>("vnr.delta_min", [](C& c) -> int& { return c.env.vnr.lifetime_min; }));
        f.push_back(int_field<int>("vnr.delta_max", [](C& c) -> int& { return c.env.vnr.lifetime_max; }));
        f.push_back(int_field<int>("vnr.lambda_min", [](C& c) -> int& { return c.env.vnr.priority_min; }));
        f.push_back(int_field<int>("vnr.lambda_max", [](C& c) -> int& { return c.env.vnr.priority_max; }));
        f.push_back({"vnr.template_weights",
                     [](C& c, const std::string& v) {
                         c.env.vnr.template_weights.clear();
                         for (const auto& w : parse_list(v)) c.env.vnr.template_weights.push_back(parse_real("vnr.template_weights", w));
                     },
                     [](const C& c) { return join(c.env.vnr.template_weights, format_number); }});

        f.push_back(real_field("reward.c_d", [](C& c) -> double& { return c.env.c_d; }));
        f.push_back(real_field("reward.c_p", [](C& c) -> double& { return c.env.c_p; }));
        f.push_back(real_field("reward.tp", [](C& c) -> double& { return c.env.rewards.accept_feasible; }));
        f.push_back(real_field("reward.fp", [](C& c) -> double& { return c.env.rewards.accept_infeasible; }));
        f.push_back(real_field("reward.fn", [](C& c) -> double& { return c.env.rewards.reject_feasible_base; }));
        f.push_back(real_field("reward.tn", [](C& c) -> double& { return c.env.rewards.reject_infeasible; }));

        f.push_back(int_field<int>("embedder.retry_budget", [](C& c) -> int& { return c.env.retry_budget; }));
        f.push_back(int_field<int>("env.episode_steps", [](C& c) -> int& { return c.env.episode_steps; }));

        f.push_back({"learner.hidden",
                     [](C& c, const std::string& v) {
                         c.learner.hidden.clear();
                         for (const auto& h : parse_list(v)) c.learner.hidden.push_back(parse_int<std::size_t>("learner.hidden", h));
                     },
                     [](const C& c) { return join(c.learner.hidden, [](std::size_t h) { return std::to_string(h); }); }});
        f.push_back(real_field("learner.lr", [](C& c) -> double& { return c.learner.learning_rate; }));
        f.push_back(real_field("learner.discount", [](C& c) -> double& { return c.learner.discount; }));
        f.push_back(int_field<std::size_t>("learner.replay_capacity", [](C& c) -> std::size_t& { return c.learner.replay_capacity; }));
        f.push_back(int_field<std::size_t>("learner.batch_size", [](C& c) -> std::size_t& { return c.learner.batch_size; }));
        f.push_back(int_field<std::size_t>("learner.target_sync", [](C& c) -> std::size_t& { return c.learner.target_sync; }));
        f.push_back(int_field<std::size_t>("learner.warmup", [](C& c) -> std::size_t& { return c.learner.warmup; }));
        f.push_back(real_field("learner.epsilon_start", [](C& c) -> double& { return c.learner.epsilon_start; }));
        f.push_back(real_field("learner.epsilon_end", [](C& c) -> double& { return c.learner.epsilon_end; }));
        f.push_back(real_field("learner.epsilon_fraction", [](C& c) -> double& { return c.learner.epsilon_fraction; }));
        f.push_back(real_field("learner.divergence_limit", [](C& c) -> double& { return c.learner.divergence_limit; }));

        f.push_back(int_field<std::size_t>("harness.runs", [](C& c) -> std::size_t& { return c.harness.runs; }));
        f.push_back(int_field<std::int64_t>("harness.steps", [](C& c) -> std::int64_t& { return c.harness.steps; }));
        f.push_back(int_field<std::uint64_t>("harness.base_seed", [](C& c) -> std::uint64_t& { return c.harness.base_seed; }));
        f.push_back(int_field<std::int64_t>("harness.train_steps", [](C& c) -> std::int64_t& { return c.harness.train_steps; }));
        f.push_back({"output.dir", [](C& c, const std::string& v) { c.output_dir = v; },
                     [](const C& c) { return c.output_dir; }});

        Field var{"sweep.variable", [](C& c, const std::string& v) { c.sweep.variable = parse_sweep_variable(v); },
                  [](const C& c) { return to_string(c.sweep.variable); }, true};
        Field vals{"sweep.values",
                   [](C& c, const std::string& v) {
                       c.sweep.values.clear();
                       for (const auto& x : parse_list(v)) c.sweep.values.push_back(parse_real("sweep.values", x));
                   },
                   [](const C& c) { return join(c.sweep.values, format_number); }, true};
        Field evals{"sweep.eval_dmax",
                    [](C& c, const std::string& v) {
                        c.sweep.eval_dmax.clear();
                        for (const auto& x : parse_list(v)) c.sweep.eval_dmax.push_back(parse_int<int>("sweep.eval_dmax", x));
                    },
                    [](const C& c) { return join(c.sweep.eval_dmax, [](int d) { return std::to_string(d); }); }, true};
        Field heat{"sweep.heatmaps", [](C& c, const std::string& v) { c.sweep.heatmaps = parse_bool("sweep.heatmaps", v); },
                   [](const C& c) { return std::string(c.sweep.heatmaps ? "true" : "false"); }, true};
        Field base{"sweep.baseline", [](C& c, const std::string& v) { c.sweep.baseline = parse_bool("sweep.baseline", v); },
                   [](const C& c) { return std::string(c.sweep.baseline ? "true" : "false"); }, true};
        for (auto* x : {&var, &vals, &evals, &heat, &base}) f.push_back(std::move(*x));
        return f;
    }();
    return table;
}

/// "0>1:2e6" -> link.
inline VirtualLink parse_link(const std::string& key, const std::string& text) {
    const auto gt = text.find('>');
    const auto colon = text.find(':');
    if (gt == std::string::npos || colon == std::string::npos || colon < gt)
        throw ConfigError(key + ": links are written 'source>target:rate', got '" + text + "'");
    return VirtualLink{parse_int<std::size_t>(key, text.substr(0, gt)),
                       parse_int<std::size_t>(key, text.substr(gt + 1, colon - gt - 1)),
                       parse_real(key, text.substr(colon + 1))};
}

inline void apply_templates(ExperimentConfig& c, const std::map<std::string, std::string>& kv) {
    std::map<std::size_t, std::map<std::string, std::string>> by_index;
    std::optional<std::size_t> count;
    for (const auto& [key, value] : kv) {
        if (key.rfind("templates.", 0) != 0) continue;
        const auto rest = key.substr(10);
        if (rest == "count") {
            count = parse_int<std::size_t>(key, value);
            continue;
        }
        const auto dot = rest.find('.');
        if (dot == std::string::npos) throw ConfigError("unknown key '" + key + "'");
        const auto field = rest.substr(dot + 1);
        if (field != "tasks" && field != "links") throw ConfigError("unknown key '" + key + "'");
        by_index[parse_int<std::size_t>(key, rest.substr(0, dot))][field] = value;
    }
    if (!count && by_index.empty()) return;
    const std::size_t n = count ? *count : by_index.rbegin()->first + 1;
    if (n == 0) throw ConfigError("templates.count must be >= 1");
    std::vector<VnrTemplate> out;
    for (std::size_t k = 0; k < n; ++k) {
        const auto prefix = "templates." + std::to_string(k);
        const auto it = by_index.find(k);
        if (it == by_index.end() || !it->second.count("tasks")) throw ConfigError(prefix + ".tasks is required");
        VnrTemplate t;
        t.id = static_cast<int>(k);
        for (const auto& x : parse_list(it->second.at("tasks"))) t.task_demands.push_back(parse_real(prefix + ".tasks", x));
        if (it->second.count("links"))
            for (const auto& x : parse_list(it->second.at("links"))) t.links.push_back(parse_link(prefix + ".links", x));
        out.push_back(std::move(t));
    }
    for (const auto& [k, _] : by_index)
        if (k >= n) throw ConfigError("templates." + std::to_string(k) + " is beyond templates.count");
    c.env.templates = std::move(out);
}

}  // namespace config_detail

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
}

/// Builds a validated configuration from defaults plus `kv`. Sweep keys are accepted only when
/// `allow_sweep` is set. Without an explicit harness.base_seed the VNE_ADMIT_SEED variable is used.
inline ExperimentConfig build_config(const KeyValues& kv, bool allow_sweep = false, const EnvLookup& env = process_env) {
    ExperimentConfig c;
    const auto& table = config_detail::fields();
    for (const auto& [key, value] : kv.values) {
        if (key.rfind("templates.", 0) == 0) continue;
        const auto it = std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.key == key; });
        const auto where = kv.origin.count(key) ? kv.origin.at(key) + ": " : std::string();
        if (it == table.end() || (it->sweep_only && !allow_sweep)) throw ConfigError(where + "unknown key '" + key + "'");
        try {
            it->set(c, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    config_detail::apply_templates(c, kv.values);
    if (!kv.values.count("harness.base_seed")) {
        if (const auto s = env(seed_env_var)) {
            try {
                c.harness.base_seed = config_detail::parse_int<std::uint64_t>(seed_env_var, *s);
            } catch (const ConfigError& e) {
                throw ConfigError(std::string("environment variable ") + e.what());
            }
        }
    }
    c.validate();
    return c;
}

/// Reads `path` (empty = defaults only), applies overrides and validates.
inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {},
                                    bool allow_sweep = false, const EnvLookup& env = process_env) {
    KeyValues kv = path.empty() ? KeyValues{} : read_key_values(path);
    apply_overrides(kv, overrides);
    return build_config(kv, allow_sweep, env);
}

/// Effective configuration with every default filled in. Parsing the output yields the same text.
inline std::string emit_config(const ExperimentConfig& c, bool include_sweep = false) {
    std::ostringstream os;
    std::string section;
    for (const auto& f : config_detail::fields()) {
        if (f.sweep_only && !include_sweep) continue;
        const auto sec = f.key.substr(0, f.key.find('.'));
        if (sec != section) {
            if (!section.empty()) os << '\n';
            if (section == "network") {
                // templates sit between the network and vnr sections
                os << "templates.count = " << c.env.templates.size() << '\n';
                for (std::size_t k = 0; k < c.env.templates.size(); ++k) {
                    const auto& t = c.env.templates[k];
                    os << "templates." << k << ".tasks = " << config_detail::join(t.task_demands, format_number) << '\n';
                    os << "templates." << k << ".links = "
                       << config_detail::join(t.links, [](const VirtualLink& l) {
                              return std::to_string(l.source) + ">" + std::to_string(l.target) + ":" + format_number(l.rate);
                          })
                       << '\n';
                }
                os << '\n';
            }
            section = sec;
        }
        const auto v = f.get(c);
        os << f.key << " =" << (v.empty() ? "" : " ") << v << '\n';
    }
    return os.str();
}

inline SweepSpec to_sweep_spec(const ExperimentConfig& c) {
    SweepSpec s;
    s.env = c.env;
    s.learner = c.learner;
    s.variable = c.sweep.variable;
    s.values = c.sweep.values;
    s.eval_dmax = c.sweep.eval_dmax;
    s.runs = c.harness.runs;
    s.steps = c.harness.steps;
    s.base_seed = c.harness.base_seed;
    s.train_steps = c.harness.train_steps;
    s.heatmaps = c.sweep.heatmaps;
    s.baseline = c.sweep.baseline;
    s.spec_text = emit_config(c, true);
    return s;
}

}  // namespace vne_admit
