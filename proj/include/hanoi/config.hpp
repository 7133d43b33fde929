#pragma once

// Run configuration: JSON (de)serialisation with strict key checking and a
// SHA-256 digest of the canonical serialisation.

#include "hanoi/analysis.hpp"
#include "hanoi/errors.hpp"
#include "hanoi/geometry.hpp"
#include "hanoi/sequences.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

namespace hanoi {

using Json = nlohmann::json;

struct SequenceConfig {
    std::string kind = "constant";  // constant | geometric_to_limit | explicit
    double r = 0.5;                 // constant
    double r_limit = 0.6;           // geometric_to_limit
    double q = 0.5;                 // geometric_to_limit
    std::vector<double> r_values;   // explicit
    std::vector<double> rho_values;  // explicit, optional override
    std::string tail = "repeat_last";  // explicit: none | repeat_last | periodic

    bool operator==(const SequenceConfig&) const = default;
};

struct SolverConfig {
    std::string backend = "inertia";
    std::size_t dense_limit = 4000;
    double eps_shift = 1e-9;
    std::size_t threads = 1;

    bool operator==(const SolverConfig&) const = default;
};

struct GridConfig {
    std::string mode = "auto";  // auto | explicit
    std::vector<double> points;
    std::size_t per_decade = 60;

    bool operator==(const GridConfig&) const = default;
};

struct FitConfig {
    std::size_t n_min = 10;
    double eta = 0.2;
    double tolerance = 0.08;

    bool operator==(const FitConfig&) const = default;
};

struct ResistanceConfig {
    std::size_t m_max = 5;
    std::size_t j_max = 0;  // 0 selects level - 1
    std::size_t fit_from = 0;
    std::string diameter = "auto";  // auto | exact | sampled | none
    std::size_t samples = 1000;
    double dimension_tolerance = 0.05;  // relative

    bool operator==(const ResistanceConfig&) const = default;
};

struct OutputConfig {
    std::string directory = "out";
    std::vector<std::string> formats{"csv", "json", "svg"};
    std::uint64_t seed = 20240101;

    bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
    SequenceConfig sequence;
    std::size_t level = 3;
    std::size_t subdivisions = 2;
    double beta = 0.25;
    std::optional<double> alpha;
    SolverConfig solver;
    GridConfig grid;
    FitConfig fit;
    std::vector<std::size_t> bracketing;  // decouple levels
    std::optional<std::size_t> lowest_k;  // spectrum: lowest-k request
    ResistanceConfig resistance;
    OutputConfig outputs;

    bool operator==(const RunConfig&) const = default;

    [[nodiscard]] bool wants(const std::string& fmt) const {
        for (const auto& f : outputs.formats)
            if (f == fmt) return true;
        return false;
    }
};

[[nodiscard]] inline MatchingSequence make_sequence(const SequenceConfig& c) {
    if (c.kind == "constant") return MatchingSequence::constant(c.r);
    if (c.kind == "geometric_to_limit") return MatchingSequence::geometric_to_limit(c.r_limit, c.q);
    if (c.kind == "explicit") {
        TailRule t = TailRule::RepeatLast;
        if (c.tail == "none")
            t = TailRule::None;
        else if (c.tail == "periodic")
            t = TailRule::Periodic;
        else if (c.tail != "repeat_last")
            throw ConfigError("sequence.tail: expected none, repeat_last or periodic, got \"" + c.tail + "\"");
        return MatchingSequence::explicit_values(c.r_values, t, c.rho_values);
    }
    throw ConfigError("sequence.kind: expected constant, geometric_to_limit or explicit, got \"" + c.kind + "\"");
}

[[nodiscard]] inline SolverOptions solver_options(const RunConfig& c) {
    SolverOptions o;
    o.dense_limit = c.solver.dense_limit;
    o.eps_shift = c.solver.eps_shift;
    o.threads = c.solver.threads;
    return o;
}

[[nodiscard]] inline Backend backend_of(const RunConfig& c) {
    return c.solver.backend == "dense" ? Backend::Dense : Backend::Inertia;
}

[[nodiscard]] inline WindowPolicy window_policy(const RunConfig& c) {
    WindowPolicy w;
    w.n_min = c.fit.n_min;
    w.eta = c.fit.eta;
    w.tolerance = c.fit.tolerance;
    return w;
}

namespace detail {

class ObjectReader {
public:
    ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
    }
    ~ObjectReader() noexcept(false) {
        if (std::uncaught_exceptions()) return;
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown key \"" + key(it.key()) + "\"");
    }
    ObjectReader(const ObjectReader&) = delete;
    ObjectReader& operator=(const ObjectReader&) = delete;

    template <class T>
    void get(const std::string& k, T& out) {
        seen_.insert(k);
        auto it = j_.find(k);
        if (it == j_.end()) return;
        if constexpr (std::is_integral_v<T>)
            if (!it->is_number_unsigned()) throw ConfigError(key(k) + ": expected a non-negative integer");
        try {
            out = it->template get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(key(k) + ": " + type_hint<T>() + " (" + e.what() + ")");
        }
    }

    template <class T>
    void get_optional(const std::string& k, std::optional<T>& out) {
        seen_.insert(k);
        auto it = j_.find(k);
        if (it == j_.end() || it->is_null()) {
            out.reset();
            return;
        }
        T v{};
        get(k, v);
        out = v;
    }

    [[nodiscard]] const Json* child(const std::string& k) {
        seen_.insert(k);
        auto it = j_.find(k);
        return it == j_.end() ? nullptr : &*it;
    }

    [[nodiscard]] std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

private:
    template <class T>
    static std::string type_hint() {
        if constexpr (std::is_same_v<T, std::string>)
            return "expected a string";
        else if constexpr (std::is_floating_point_v<T>)
            return "expected a number";
        else if constexpr (std::is_integral_v<T>)
            return "expected a non-negative integer";
        else
            return "expected an array";
    }
    [[nodiscard]] std::string where() const { return path_.empty() ? "config" : path_; }

    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

}  // namespace detail

/// Range checks mirroring the library preconditions.
inline void validate_config(const RunConfig& c) {
    using detail::require;
    require(c.level <= kMaxLevel, "level: must be at most " + std::to_string(kMaxLevel));
    require(c.subdivisions >= 1, "subdivisions: must be >= 1");
    require(c.beta > 0.0 && c.beta < kOneThird, "beta: must lie in (0, 1/3) for a finite line measure");
    require(!c.alpha || (*c.alpha > 0.0 && *c.alpha < 1.0), "alpha: must lie in (0, 1)");
    require(c.solver.backend == "dense" || c.solver.backend == "inertia",
            "solver.backend: expected dense or inertia");
    require(c.solver.dense_limit >= 1, "solver.dense_limit: must be >= 1");
    require(c.solver.eps_shift > 0.0 && c.solver.eps_shift < 1e-3, "solver.eps_shift: must lie in (0, 1e-3)");
    require(c.grid.mode == "auto" || c.grid.mode == "explicit", "grid.mode: expected auto or explicit");
    require(c.grid.per_decade >= 1, "grid.per_decade: must be >= 1");
    if (c.grid.mode == "explicit") {
        require(!c.grid.points.empty(), "grid.points: explicit grid needs points");
        for (std::size_t i = 0; i < c.grid.points.size(); ++i) {
            require(c.grid.points[i] > 0.0, "grid.points: values must be positive");
            require(i == 0 || c.grid.points[i] > c.grid.points[i - 1], "grid.points: must be strictly increasing");
        }
    }
    require(c.fit.n_min >= 1, "fit.n_min: must be >= 1");
    require(c.fit.eta > 0.0 && c.fit.eta <= 1.0, "fit.eta: must lie in (0, 1]");
    require(c.fit.tolerance > 0.0, "fit.tolerance: must be positive");
    for (auto j : c.bracketing)
        require(j == 0 || j < c.level, "bracketing: decouple level " + std::to_string(j) + " must be below level");
    require(!c.lowest_k || *c.lowest_k >= 1, "lowest_k: must be >= 1");
    const auto& r = c.resistance;
    require(r.diameter == "auto" || r.diameter == "exact" || r.diameter == "sampled" || r.diameter == "none",
            "resistance.diameter: expected auto, exact, sampled or none");
    require(r.dimension_tolerance > 0.0, "resistance.dimension_tolerance: must be positive");
    require(r.m_max <= kMaxLevel, "resistance.m_max: must be at most " + std::to_string(kMaxLevel));
    for (const auto& f : c.outputs.formats)
        require(f == "csv" || f == "json" || f == "svg", "outputs.formats: unknown format \"" + f + "\"");
    require(!c.outputs.directory.empty(), "outputs.directory: must not be empty");
    try {
        (void)make_sequence(c.sequence);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError("sequence: " + std::string(e.what()));
    }
}

[[nodiscard]] inline RunConfig config_from_json(const Json& j) {
    RunConfig c;
    {
        detail::ObjectReader top(j, "");
        if (const Json* s = top.child("sequence")) {
            detail::ObjectReader rd(*s, "sequence");
            rd.get("kind", c.sequence.kind);
            rd.get("r", c.sequence.r);
            rd.get("r_limit", c.sequence.r_limit);
            rd.get("q", c.sequence.q);
            rd.get("r_values", c.sequence.r_values);
            rd.get("rho_values", c.sequence.rho_values);
            rd.get("tail", c.sequence.tail);
        }
        top.get("level", c.level);
        top.get("subdivisions", c.subdivisions);
        top.get("beta", c.beta);
        top.get_optional("alpha", c.alpha);
        if (const Json* s = top.child("solver")) {
            detail::ObjectReader rd(*s, "solver");
            rd.get("backend", c.solver.backend);
            rd.get("dense_limit", c.solver.dense_limit);
            rd.get("eps_shift", c.solver.eps_shift);
            rd.get("threads", c.solver.threads);
        }
        if (const Json* s = top.child("grid")) {
            detail::ObjectReader rd(*s, "grid");
            rd.get("mode", c.grid.mode);
            rd.get("points", c.grid.points);
            rd.get("per_decade", c.grid.per_decade);
        }
        if (const Json* s = top.child("fit")) {
            detail::ObjectReader rd(*s, "fit");
            rd.get("n_min", c.fit.n_min);
            rd.get("eta", c.fit.eta);
            rd.get("tolerance", c.fit.tolerance);
        }
        top.get("bracketing", c.bracketing);
        top.get_optional("lowest_k", c.lowest_k);
        if (const Json* s = top.child("resistance")) {
            detail::ObjectReader rd(*s, "resistance");
            rd.get("m_max", c.resistance.m_max);
            rd.get("j_max", c.resistance.j_max);
            rd.get("fit_from", c.resistance.fit_from);
            rd.get("diameter", c.resistance.diameter);
            rd.get("samples", c.resistance.samples);
            rd.get("dimension_tolerance", c.resistance.dimension_tolerance);
        }
        if (const Json* s = top.child("outputs")) {
            detail::ObjectReader rd(*s, "outputs");
            rd.get("directory", c.outputs.directory);
            rd.get("formats", c.outputs.formats);
            rd.get("seed", c.outputs.seed);
        }
    }
    validate_config(c);
    return c;
}

[[nodiscard]] inline Json config_to_json(const RunConfig& c) {
    Json j;
    j["sequence"] = {{"kind", c.sequence.kind},
                     {"r", c.sequence.r},
                     {"r_limit", c.sequence.r_limit},
                     {"q", c.sequence.q},
                     {"r_values", c.sequence.r_values},
                     {"rho_values", c.sequence.rho_values},
                     {"tail", c.sequence.tail}};
    j["level"] = c.level;
    j["subdivisions"] = c.subdivisions;
    j["beta"] = c.beta;
    j["alpha"] = c.alpha ? Json(*c.alpha) : Json(nullptr);
    j["solver"] = {{"backend", c.solver.backend},
                   {"dense_limit", c.solver.dense_limit},
                   {"eps_shift", c.solver.eps_shift},
                   {"threads", c.solver.threads}};
    j["grid"] = {{"mode", c.grid.mode}, {"points", c.grid.points}, {"per_decade", c.grid.per_decade}};
    j["fit"] = {{"n_min", c.fit.n_min}, {"eta", c.fit.eta}, {"tolerance", c.fit.tolerance}};
    j["bracketing"] = c.bracketing;
    j["lowest_k"] = c.lowest_k ? Json(*c.lowest_k) : Json(nullptr);
    j["resistance"] = {{"m_max", c.resistance.m_max},
                       {"j_max", c.resistance.j_max},
                       {"fit_from", c.resistance.fit_from},
                       {"diameter", c.resistance.diameter},
                       {"samples", c.resistance.samples},
                       {"dimension_tolerance", c.resistance.dimension_tolerance}};
    j["outputs"] = {{"directory", c.outputs.directory}, {"formats", c.outputs.formats}, {"seed", c.outputs.seed}};
    return j;
}

[[nodiscard]] inline RunConfig parse_config(const std::string& text, const std::string& origin = "config") {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return config_from_json(j);
}

[[nodiscard]] inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

[[nodiscard]] inline std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("internal", "SHA-256 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

/// Digest of the canonical (sorted-key, compact) serialisation. The output
/// directory is excluded so identical experiments hash identically.
[[nodiscard]] inline std::string config_hash(const RunConfig& c) {
    Json j = config_to_json(c);
    j["outputs"].erase("directory");
    return sha256_hex(j.dump());
}

}  // namespace hanoi
