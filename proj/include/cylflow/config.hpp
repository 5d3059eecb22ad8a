#pragma once

// JSON experiment configuration (schema_version 1). Parsing is strict:
// unknown keys and wrong types are rejected.
//
// {
//   "schema_version": 1,
//   "spec":    {"n": 2, "R": 1.0, "d": 2.0},
//   "grid":    {"nz": 33, "ntheta": 16},            // ntheta optional (n = 2 only)
//   "dt": 0.001, "t_end": 2.0, "scheme": "imex1",   // or "imex2"
//   "initial": {
//     "modes":    [{"l": 0, "p": 1, "m": 1, "amplitude": 0.01}],
//     "cylinder": [0.0, 0.0, 0.0],                  // optional, n+1 entries
//     "random":   {"amplitude": 1e-3, "max_l": 2, "max_m": 4}
//   },
//   "seed": 0,                                      // drives "random"
//   "renormalize_volume": false,
//   "output_stride": 10, "snapshot_stride": 0,
//   "blowup_fraction": 0.9, "max_halvings": 4,
//   "fit_window": [0.5, 2.0]
// }

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "cylflow/flow.hpp"

namespace cylflow {

using nlohmann::json;

class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

inline constexpr int kSchemaVersion = 1;

struct ExperimentConfig {
    FlowConfig flow;
    std::uint64_t seed = 0;
    std::optional<std::array<double, 2>> fit_window;

    /// Window for decay fits: configured, or the last three quarters of the run.
    std::array<double, 2> window() const {
        if (fit_window) return *fit_window;
        return {0.25 * flow.t_end, flow.t_end};
    }
};

namespace detail {

inline void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key \"" + key + "\"");
}

inline double get_number(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing \"" + key + "\"");
    if (!j.at(key).is_number()) throw ConfigError(where + "." + key + ": expected a number");
    return j.at(key).get<double>();
}

inline long long get_integer(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing \"" + key + "\"");
    if (!j.at(key).is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
    return j.at(key).get<long long>();
}

inline bool get_bool(const json& j, const std::string& key, const std::string& where) {
    if (!j.at(key).is_boolean()) throw ConfigError(where + "." + key + ": expected a boolean");
    return j.at(key).get<bool>();
}

} // namespace detail

inline CylinderSpec parse_spec(const json& j) {
    detail::require_object(j, "spec");
    detail::reject_unknown(j, {"n", "R", "d"}, "spec");
    CylinderSpec s;
    s.n = static_cast<int>(detail::get_integer(j, "n", "spec"));
    s.R = detail::get_number(j, "R", "spec");
    s.d = detail::get_number(j, "d", "spec");
    try {
        s.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    return s;
}

inline ExperimentConfig parse_config(const json& j) {
    detail::require_object(j, "config");
    detail::reject_unknown(j,
                           {"schema_version", "spec", "grid", "dt", "t_end", "scheme", "initial", "seed",
                            "renormalize_volume", "output_stride", "snapshot_stride", "blowup_fraction", "max_halvings",
                            "fit_window"},
                           "config");
    if (detail::get_integer(j, "schema_version", "config") != kSchemaVersion)
        throw ConfigError("config: unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");

    ExperimentConfig ec;
    FlowConfig& c = ec.flow;
    if (!j.contains("spec")) throw ConfigError("config: missing \"spec\"");
    c.spec = parse_spec(j.at("spec"));

    if (!j.contains("grid")) throw ConfigError("config: missing \"grid\"");
    const json& g = j.at("grid");
    detail::require_object(g, "grid");
    detail::reject_unknown(g, {"nz", "ntheta"}, "grid");
    c.nz = static_cast<int>(detail::get_integer(g, "nz", "grid"));
    if (g.contains("ntheta") && !g.at("ntheta").is_null())
        c.ntheta = static_cast<int>(detail::get_integer(g, "ntheta", "grid"));

    c.dt = detail::get_number(j, "dt", "config");
    c.t_end = detail::get_number(j, "t_end", "config");
    if (j.contains("scheme")) {
        const json& s = j.at("scheme");
        if (s == "imex1") c.scheme = Scheme::imex1;
        else if (s == "imex2") c.scheme = Scheme::imex2;
        else throw ConfigError("config.scheme: expected \"imex1\" or \"imex2\"");
    }
    if (j.contains("seed")) {
        const json& s = j.at("seed");
        if (!s.is_number_unsigned()) throw ConfigError("config.seed: expected a non-negative integer");
        ec.seed = s.get<std::uint64_t>();
    }
    if (j.contains("renormalize_volume")) c.renormalize_volume = detail::get_bool(j, "renormalize_volume", "config");
    if (j.contains("output_stride")) c.output_stride = static_cast<int>(detail::get_integer(j, "output_stride", "config"));
    if (j.contains("snapshot_stride"))
        c.snapshot_stride = static_cast<int>(detail::get_integer(j, "snapshot_stride", "config"));
    if (j.contains("blowup_fraction")) c.blowup_fraction = detail::get_number(j, "blowup_fraction", "config");
    if (j.contains("max_halvings")) c.max_halvings = static_cast<int>(detail::get_integer(j, "max_halvings", "config"));
    if (j.contains("fit_window")) {
        const json& w = j.at("fit_window");
        if (!w.is_array() || w.size() != 2 || !w[0].is_number() || !w[1].is_number())
            throw ConfigError("config.fit_window: expected [t_a, t_b]");
        ec.fit_window = std::array<double, 2>{w[0].get<double>(), w[1].get<double>()};
        if (!((*ec.fit_window)[0] < (*ec.fit_window)[1])) throw ConfigError("config.fit_window: need t_a < t_b");
    }

    if (j.contains("initial")) {
        const json& ini = j.at("initial");
        detail::require_object(ini, "initial");
        detail::reject_unknown(ini, {"modes", "cylinder", "random"}, "initial");
        if (ini.contains("modes")) {
            if (!ini.at("modes").is_array()) throw ConfigError("initial.modes: expected an array");
            for (const json& m : ini.at("modes")) {
                detail::require_object(m, "initial.modes[]");
                detail::reject_unknown(m, {"l", "p", "m", "amplitude"}, "initial.modes[]");
                ModeAmplitude ma;
                ma.index.l = static_cast<int>(detail::get_integer(m, "l", "initial.modes[]"));
                ma.index.p = m.contains("p") ? static_cast<int>(detail::get_integer(m, "p", "initial.modes[]")) : 1;
                ma.index.m = static_cast<int>(detail::get_integer(m, "m", "initial.modes[]"));
                ma.amplitude = detail::get_number(m, "amplitude", "initial.modes[]");
                c.initial.modes.push_back(ma);
            }
        }
        if (ini.contains("cylinder")) {
            const json& y = ini.at("cylinder");
            if (!y.is_array()) throw ConfigError("initial.cylinder: expected an array");
            for (const json& v : y) {
                if (!v.is_number()) throw ConfigError("initial.cylinder: expected numbers");
                c.initial.cylinder.push_back(v.get<double>());
            }
        }
        if (ini.contains("random")) {
            const json& r = ini.at("random");
            detail::require_object(r, "initial.random");
            detail::reject_unknown(r, {"amplitude", "max_l", "max_m"}, "initial.random");
            RandomPerturbation rp;
            rp.amplitude = detail::get_number(r, "amplitude", "initial.random");
            if (r.contains("max_l")) rp.max_l = static_cast<int>(detail::get_integer(r, "max_l", "initial.random"));
            if (r.contains("max_m")) rp.max_m = static_cast<int>(detail::get_integer(r, "max_m", "initial.random"));
            c.initial.random = rp;
        }
    }
    if (c.initial.random) c.initial.random->seed = ec.seed;

    // Everything that can be checked without integrating.
    try {
        c.validate();
        (void)initial_field(c);
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return ec;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    return parse_config(j);
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

inline json to_json(const CylinderSpec& s) { return {{"n", s.n}, {"R", s.R}, {"d", s.d}}; }

inline json to_json(const ExperimentConfig& ec) {
    const FlowConfig& c = ec.flow;
    json grid = {{"nz", c.nz}};
    if (c.ntheta) grid["ntheta"] = *c.ntheta;
    json modes = json::array();
    for (const auto& m : c.initial.modes)
        modes.push_back({{"l", m.index.l}, {"p", m.index.p}, {"m", m.index.m}, {"amplitude", m.amplitude}});
    json initial = {{"modes", modes}};
    if (!c.initial.cylinder.empty()) initial["cylinder"] = c.initial.cylinder;
    if (c.initial.random)
        initial["random"] = {{"amplitude", c.initial.random->amplitude},
                             {"max_l", c.initial.random->max_l},
                             {"max_m", c.initial.random->max_m}};
    json j = {{"schema_version", kSchemaVersion},
              {"spec", to_json(c.spec)},
              {"grid", grid},
              {"dt", c.dt},
              {"t_end", c.t_end},
              {"scheme", to_string(c.scheme)},
              {"initial", initial},
              {"seed", ec.seed},
              {"renormalize_volume", c.renormalize_volume},
              {"output_stride", c.output_stride},
              {"snapshot_stride", c.snapshot_stride},
              {"blowup_fraction", c.blowup_fraction},
              {"max_halvings", c.max_halvings}};
    if (ec.fit_window) j["fit_window"] = {(*ec.fit_window)[0], (*ec.fit_window)[1]};
    return j;
}

} // namespace cylflow
