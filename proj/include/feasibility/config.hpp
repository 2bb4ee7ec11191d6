#pragma once

// JSON encodings of sets, operator pipelines, schedules and run configs.
// Every decoding failure is reported as a ConfigError naming the JSON path
// of the offending field.

#include "feasibility/diagnostics.hpp"
#include "feasibility/engine.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace feasibility {

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& field, const std::string& message)
        : std::runtime_error(field + ": " + message), field_(field) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

using json = nlohmann::json;

namespace config_detail {

inline std::string child(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline std::string child(const std::string& path, std::size_t index) {
    return path + "[" + std::to_string(index) + "]";
}

inline const json& require(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(child(path, key), "missing required field");
    return *it;
}

inline double number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    return j.get<double>();
}

/// Accepts numbers, null (as `null_value`) and the strings "inf"/"-inf".
inline double extended_real(const json& j, const std::string& path, double null_value) {
    if (j.is_null()) return null_value;
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "+inf") return kInfinity;
        if (s == "-inf") return -kInfinity;
        throw ConfigError(path, "expected a number, null, \"inf\" or \"-inf\"");
    }
    return number(j, path);
}

inline std::uint64_t unsigned_integer(const json& j, const std::string& path) {
    if (!j.is_number_integer() || j.get<std::int64_t>() < 0) throw ConfigError(path, "expected a nonnegative integer");
    return j.get<std::uint64_t>();
}

inline Vector vector(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a nonempty array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(j[i], child(path, i));
    return v;
}

inline Vector extended_vector(const json& j, const std::string& path, double null_value) {
    if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a nonempty array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = extended_real(j[i], child(path, i), null_value);
    }
    return v;
}

template <class F>
auto guarded(const std::string& path, F&& build) -> decltype(build()) {
    try {
        return build();
    } catch (const InvalidArgument& e) {
        throw ConfigError(path, e.what());
    }
}

}  // namespace config_detail

// ---------------------------------------------------------------------------
// Sets

inline SetDescriptor set_from_json(const json& j, const std::string& path = "set") {
    using namespace config_detail;
    const auto& type_field = require(j, "type", path);
    if (!type_field.is_string()) throw ConfigError(child(path, "type"), "expected a string");
    const auto type = type_field.get<std::string>();
    return guarded(path, [&]() -> SetDescriptor {
        if (type == "hyperplane" || type == "halfspace") {
            Vector normal = vector(require(j, "normal", path), child(path, "normal"));
            const double offset = number(require(j, "offset", path), child(path, "offset"));
            if (type == "hyperplane") return Hyperplane{std::move(normal), offset};
            return Halfspace{std::move(normal), offset};
        }
        if (type == "box") {
            return Box{extended_vector(require(j, "lower", path), child(path, "lower"), -kInfinity),
                       extended_vector(require(j, "upper", path), child(path, "upper"), kInfinity)};
        }
        if (type == "ball") {
            return Ball{vector(require(j, "center", path), child(path, "center")),
                        number(require(j, "radius", path), child(path, "radius"))};
        }
        if (type == "affine") {
            Vector base = vector(require(j, "basepoint", path), child(path, "basepoint"));
            std::vector<Vector> basis;
            if (auto it = j.find("basis"); it != j.end()) {
                if (!it->is_array()) throw ConfigError(child(path, "basis"), "expected an array of vectors");
                for (std::size_t i = 0; i < it->size(); ++i) {
                    basis.push_back(vector((*it)[i], child(child(path, "basis"), i)));
                }
            }
            if (j.value("orthonormalize", false)) basis = orthonormalize(basis);
            return AffineSubspace{std::move(base), std::move(basis)};
        }
        if (type == "orthant_face") {
            return OrthantFace{unsigned_integer(require(j, "n", path), child(path, "n")),
                               unsigned_integer(require(j, "k", path), child(path, "k"))};
        }
        throw ConfigError(child(path, "type"), "unknown set type '" + type + "'");
    });
}

namespace config_detail {

inline json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline json extended_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::isinf(v[i])) {
            out.push_back(v[i] > 0 ? "inf" : "-inf");
        } else {
            out.push_back(v[i]);
        }
    }
    return out;
}

}  // namespace config_detail

inline json set_to_json(const SetDescriptor& s) {
    using namespace config_detail;
    return std::visit(
        [&s](const auto& set) -> json {
            using S = std::decay_t<decltype(set)>;
            json j{{"type", s.type_name()}};
            if constexpr (std::is_same_v<S, Hyperplane> || std::is_same_v<S, Halfspace>) {
                j["normal"] = vector_json(set.normal);
                j["offset"] = set.offset;
            } else if constexpr (std::is_same_v<S, Box>) {
                j["lower"] = extended_json(set.lower);
                j["upper"] = extended_json(set.upper);
            } else if constexpr (std::is_same_v<S, Ball>) {
                j["center"] = vector_json(set.center);
                j["radius"] = set.radius;
            } else if constexpr (std::is_same_v<S, AffineSubspace>) {
                j["basepoint"] = vector_json(set.basepoint);
                j["basis"] = json::array();
                for (const auto& b : set.basis) j["basis"].push_back(vector_json(b));
            } else {
                j["n"] = set.n;
                j["k"] = set.k;
            }
            return j;
        },
        s.variant());
}

inline std::vector<SetDescriptor> sets_from_json(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a nonempty array of sets");
    std::vector<SetDescriptor> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(set_from_json(j[i], config_detail::child(path, i)));
    return out;
}

// ---------------------------------------------------------------------------
// Operators

/// {"op": "dr" | "relaxed_projector" | "projector" | "reflector" | "compose" |
///  "convex_combination" | "btm" | "cadra" | "two_lines" | "thresholder", ...}
/// DR operators of intersecting affine pairs get their exact Fix oracles.
inline FixedPointMap operator_from_json(const json& j, const std::string& path = "operator") {
    using namespace config_detail;
    const auto& op_field = require(j, "op", path);
    if (!op_field.is_string()) throw ConfigError(child(path, "op"), "expected a string");
    const auto op = op_field.get<std::string>();

    auto maps_field = [&](const char* key) {
        const auto& arr = require(j, key, path);
        if (!arr.is_array() || arr.empty()) throw ConfigError(child(path, key), "expected a nonempty array of operators");
        std::vector<FixedPointMap> maps;
        for (std::size_t i = 0; i < arr.size(); ++i) maps.push_back(operator_from_json(arr[i], child(child(path, key), i)));
        return maps;
    };

    if (op == "dr") {
        auto a = set_from_json(require(j, "a", path), child(path, "a"));
        auto b = set_from_json(require(j, "b", path), child(path, "b"));
        return guarded(path, [&] {
            if (a.is_affine() && b.is_affine() && a.dimension() == b.dimension() && affine_intersection({a, b})) {
                return dr_operator_with_fix_oracle(a, b);
            }
            return dr_operator(a, b);
        });
    }
    if (op == "relaxed_projector" || op == "projector") {
        auto s = set_from_json(require(j, "set", path), child(path, "set"));
        const double relax = op == "projector" ? 1.0 : number(require(j, "relax", path), child(path, "relax"));
        try {
            return relaxed_projector(s, relax);
        } catch (const InvalidArgument& e) {
            throw ConfigError(child(path, "relax"), e.what());
        }
    }
    if (op == "reflector") return reflector(set_from_json(require(j, "set", path), child(path, "set")));
    if (op == "compose") {
        auto maps = maps_field("maps");
        return guarded(path, [&] { return compose(std::move(maps)); });
    }
    if (op == "convex_combination") {
        auto maps = maps_field("maps");
        const auto& w = require(j, "weights", path);
        if (!w.is_array()) throw ConfigError(child(path, "weights"), "expected an array of numbers");
        std::vector<double> weights;
        for (std::size_t i = 0; i < w.size(); ++i) weights.push_back(number(w[i], child(child(path, "weights"), i)));
        try {
            return convex_combination(std::move(maps), std::move(weights));
        } catch (const InvalidArgument& e) {
            throw ConfigError(child(path, "weights"), e.what());
        }
    }
    if (op == "btm") {
        auto sets = sets_from_json(require(j, "sets", path), child(path, "sets"));
        return guarded(child(path, "sets"), [&] { return btm_chain(sets); });
    }
    if (op == "cadra") {
        auto anchor = set_from_json(require(j, "anchor", path), child(path, "anchor"));
        auto walls = sets_from_json(require(j, "walls", path), child(path, "walls"));
        return guarded(child(path, "walls"), [&] { return cadra_chain(anchor, walls); });
    }
    if (op == "two_lines") {
        const double theta = number(require(j, "theta", path), child(path, "theta"));
        return guarded(child(path, "theta"), [&] { return two_lines_fixture(theta); });
    }
    if (op == "thresholder") return thresholder_fixture();
    throw ConfigError(child(path, "op"), "unknown operator '" + op + "'");
}

// ---------------------------------------------------------------------------
// Schedules

struct ScheduleSpec {
    Schedule schedule;
    IterationMode mode = IterationMode::per_step;
};

/// {"schedule": "cyclic" | "parallel" | "quasi_cyclic" | "random_map" | "bernoulli",
///  "seed", "window", "probs", "weights", "floor", "builtin", "mode": "per_step" | "composed"}
inline ScheduleSpec schedule_from_json(const json& j, std::size_t m, const std::string& path = "schedule") {
    using namespace config_detail;
    const auto& kind_field = require(j, "schedule", path);
    if (!kind_field.is_string()) throw ConfigError(child(path, "schedule"), "expected a string");
    const auto kind = kind_field.get<std::string>();
    const std::uint64_t seed = j.contains("seed") ? unsigned_integer(j["seed"], child(path, "seed")) : 0;

    IterationMode mode = IterationMode::per_step;
    if (auto it = j.find("mode"); it != j.end()) {
        const auto s = it->is_string() ? it->get<std::string>() : std::string();
        if (s == "composed") {
            mode = IterationMode::composed_pass;
        } else if (s != "per_step") {
            throw ConfigError(child(path, "mode"), "expected \"per_step\" or \"composed\"");
        }
        if (mode == IterationMode::composed_pass && kind != "cyclic") {
            throw ConfigError(child(path, "mode"), "composed mode requires the cyclic schedule");
        }
    }

    return guarded(path, [&]() -> ScheduleSpec {
        if (kind == "cyclic") return {Cyclic{m}, mode};
        if (kind == "parallel") return {uniform_parallel(m), mode};
        if (kind == "quasi_cyclic") {
            if (j.contains("builtin")) {
                const auto b = j["builtin"].is_string() ? j["builtin"].get<std::string>() : std::string();
                if (b == "round_robin_pairs") return {round_robin_pairs(m), mode};
                if (b == "cyclic") return {cyclic_weights(m), mode};
                if (b == "parallel") return {uniform_parallel(m), mode};
                throw ConfigError(child(path, "builtin"), "unknown built-in weight rule");
            }
            const auto& table = require(j, "weights", path);
            if (!table.is_array() || table.empty()) throw ConfigError(child(path, "weights"), "expected a nonempty table");
            std::vector<Weights> rows;
            double floor = 1.0;
            for (std::size_t r = 0; r < table.size(); ++r) {
                const auto row_path = child(child(path, "weights"), r);
                if (!table[r].is_array() || table[r].size() != m) {
                    throw ConfigError(row_path, "expected " + std::to_string(m) + " weights");
                }
                Weights row;
                for (std::size_t i = 0; i < m; ++i) {
                    row.push_back(number(table[r][i], child(row_path, i)));
                    if (row.back() > 0.0) floor = std::min(floor, row.back());
                }
                rows.push_back(std::move(row));
            }
            if (j.contains("floor")) floor = number(j["floor"], child(path, "floor"));
            const std::size_t window = j.contains("window") ? unsigned_integer(j["window"], child(path, "window")) : m;
            return {weight_table(std::move(rows), window, floor), mode};
        }
        if (kind == "random_map") {
            const std::size_t window = j.contains("window") ? unsigned_integer(j["window"], child(path, "window")) : m;
            if (window < m) throw ConfigError(child(path, "window"), "must be >= number of operators");
            return {RandomMap{m, seed, window}, mode};
        }
        if (kind == "bernoulli") {
            std::vector<double> probs;
            if (j.contains("probs")) {
                const auto& p = j["probs"];
                if (!p.is_array()) throw ConfigError(child(path, "probs"), "expected an array");
                for (std::size_t i = 0; i < p.size(); ++i) probs.push_back(number(p[i], child(child(path, "probs"), i)));
            } else {
                probs.assign(m, 1.0 / static_cast<double>(m));
            }
            if (probs.size() != m) throw ConfigError(child(path, "probs"), "expected one probability per operator");
            try {
                return {Bernoulli{probs, seed}, mode};
            } catch (const InvalidArgument& e) {
                throw ConfigError(child(path, "probs"), e.what());
            }
        }
        throw ConfigError(child(path, "schedule"), "unknown schedule '" + kind + "'");
    });
}

// ---------------------------------------------------------------------------
// Run configs

/// {"operators": [...], "schedule": {...}, "start": [...], "max_iter": N,
///  "stop": {"rule": "residual" | "probe" | "max_iter", "tol", "label"},
///  "probes": [{"label", "kind": "distance" | "max_distance" | "fix_distance", ...}],
///  "anchors": [[...], ...]}
inline RunConfig run_config_from_json(const json& j) {
    using namespace config_detail;
    RunConfig cfg;
    const auto& ops = require(j, "operators", "");
    if (!ops.is_array() || ops.empty()) throw ConfigError("operators", "expected a nonempty array of operators");
    for (std::size_t i = 0; i < ops.size(); ++i) cfg.maps.push_back(operator_from_json(ops[i], child("operators", i)));

    if (j.contains("schedule")) {
        auto spec = schedule_from_json(j["schedule"], cfg.maps.size());
        cfg.schedule = std::move(spec.schedule);
        cfg.mode = spec.mode;
    } else {
        cfg.schedule = Cyclic{cfg.maps.size()};
    }
    cfg.start = vector(require(j, "start", ""), "start");
    for (std::size_t i = 0; i < cfg.maps.size(); ++i) {
        if (cfg.maps[i].dimension() != static_cast<std::size_t>(cfg.start.size())) {
            throw ConfigError(child("operators", i), "dimension differs from start");
        }
    }
    if (j.contains("max_iter")) {
        cfg.max_iter = unsigned_integer(j["max_iter"], "max_iter");
        if (cfg.max_iter == 0) throw ConfigError("max_iter", "must be >= 1");
    }

    if (j.contains("probes")) {
        const auto& probes = j["probes"];
        if (!probes.is_array()) throw ConfigError("probes", "expected an array");
        for (std::size_t i = 0; i < probes.size(); ++i) {
            const auto p_path = child("probes", i);
            const auto& p = probes[i];
            const auto& label = require(p, "label", p_path);
            if (!label.is_string()) throw ConfigError(child(p_path, "label"), "expected a string");
            const auto kind = require(p, "kind", p_path).is_string() ? p["kind"].get<std::string>() : std::string();
            if (kind == "distance") {
                auto s = set_from_json(require(p, "set", p_path), child(p_path, "set"));
                cfg.probes.push_back({label.get<std::string>(), [s](const Vector& x) { return distance(s, x); }});
            } else if (kind == "max_distance") {
                auto sets = sets_from_json(require(p, "sets", p_path), child(p_path, "sets"));
                std::optional<SetDescriptor> shadow;
                if (p.contains("shadow")) shadow = set_from_json(p["shadow"], child(p_path, "shadow"));
                cfg.probes.push_back({label.get<std::string>(), [sets, shadow](const Vector& x) {
                                          const Vector z = shadow ? project(*shadow, x) : x;
                                          double worst = 0.0;
                                          for (const auto& s : sets) worst = std::max(worst, distance(s, z));
                                          return worst;
                                      }});
            } else if (kind == "fix_distance") {
                const auto idx = unsigned_integer(require(p, "operator", p_path), child(p_path, "operator"));
                if (idx >= cfg.maps.size() || !cfg.maps[idx].fix_distance()) {
                    throw ConfigError(child(p_path, "operator"), "no operator with a fix_distance oracle at this index");
                }
                cfg.probes.push_back({label.get<std::string>(), *cfg.maps[idx].fix_distance()});
            } else {
                throw ConfigError(child(p_path, "kind"), "expected \"distance\", \"max_distance\" or \"fix_distance\"");
            }
        }
    }

    if (j.contains("stop")) {
        const auto& s = j["stop"];
        const auto rule = require(s, "rule", "stop").is_string() ? s["rule"].get<std::string>() : std::string();
        if (rule == "residual") {
            const double tol = number(require(s, "tol", "stop"), "stop.tol");
            if (!(tol > 0.0)) throw ConfigError("stop.tol", "must be > 0");
            cfg.stop = ResidualBelow{tol};
        } else if (rule == "probe") {
            const double tol = number(require(s, "tol", "stop"), "stop.tol");
            if (!(tol > 0.0)) throw ConfigError("stop.tol", "must be > 0");
            const auto& label = require(s, "label", "stop");
            if (!label.is_string()) throw ConfigError("stop.label", "expected a string");
            const bool known = std::any_of(cfg.probes.begin(), cfg.probes.end(),
                                           [&](const Probe& p) { return p.label == label.get<std::string>(); });
            if (!known) throw ConfigError("stop.label", "no probe with this label");
            cfg.stop = ProbeBelow{label.get<std::string>(), tol};
        } else if (rule == "max_iter") {
            cfg.stop = MaxIterOnly{};
        } else {
            throw ConfigError("stop.rule", "expected \"residual\", \"probe\" or \"max_iter\"");
        }
    }

    if (j.contains("anchors")) {
        const auto& anchors = j["anchors"];
        if (!anchors.is_array()) throw ConfigError("anchors", "expected an array of points");
        for (std::size_t i = 0; i < anchors.size(); ++i) {
            cfg.anchors.push_back(vector(anchors[i], child("anchors", i)));
            if (cfg.anchors.back().size() != cfg.start.size()) {
                throw ConfigError(child("anchors", i), "dimension differs from start");
            }
        }
    }
    if (cfg.schedule.operator_count() != cfg.maps.size()) {
        throw ConfigError("schedule", "operator count does not match the operator list");
    }
    return cfg;
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
    }
}

}  // namespace feasibility
