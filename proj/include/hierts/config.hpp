#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hierts/env.hpp"
#include "hierts/errors.hpp"
#include "hierts/gaussian.hpp"

namespace hierts {

enum class ScheduleKind { SequentialRoundRobin, SequentialRandom, Meta, Concurrent };
enum class AgentKind { HierTs, OracleTs, MarginalTs };
enum class OutputFormat { Csv, Plot, Both };
enum class ForcedExplorationMode { Auto, On, Off };
enum class ActionSetKind { UniformRandom, StandardBasis, Explicit };

inline std::string to_string(AgentKind kind) {
    switch (kind) {
        case AgentKind::HierTs: return "HierTS";
        case AgentKind::OracleTs: return "OracleTS";
        case AgentKind::MarginalTs: return "MarginalTS";
    }
    return "unknown";
}

/// How to materialize the action set. Uniform draws happen once per
/// replication; the other kinds are fixed up front.
struct ActionSetSpec {
    ActionSetKind kind = ActionSetKind::UniformRandom;
    int num_actions = 10;
    double halfwidth = 0.5;
    std::vector<RealVector> explicit_actions;
};

/// Everything a deterministic experiment needs: the model, the schedule, the
/// agent roster, and run control. Keys in the config file match the field
/// names; sigma_q / sigma_0 take isotropic standard deviations while Sigma_q /
/// Sigma_0 take full row-major covariances.
struct ExperimentConfig {
    // [model]
    int d = 0;
    int m = 0;
    int n = 0;  // interactions per task
    int L = 1;  // max concurrent tasks
    double sigma = 0.0;
    RealVector mu_q;
    Matrix Sigma_q;
    Matrix Sigma_0;
    RewardKind reward_kind = RewardKind::Gaussian;
    ActionSetSpec actions;

    // [schedule]
    ScheduleKind schedule = ScheduleKind::SequentialRoundRobin;

    // [agents]
    std::vector<AgentKind> agents = {AgentKind::HierTs, AgentKind::OracleTs,
                                     AgentKind::MarginalTs};

    // [run]
    int replications = 100;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    OutputFormat format = OutputFormat::Csv;
    bool bounds_enabled = true;
    ForcedExplorationMode forced_exploration = ForcedExplorationMode::Auto;
    int threads = 1;

    bool forced_exploration_active() const {
        switch (forced_exploration) {
            case ForcedExplorationMode::On: return true;
            case ForcedExplorationMode::Off: return false;
            case ForcedExplorationMode::Auto:
                return schedule == ScheduleKind::Concurrent && L > 1;
        }
        return false;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

struct RawConfig {
    std::map<std::string, std::string> values;  // "section.key" -> value

    bool has(const std::string& path) const { return values.count(path) > 0; }
    std::string get(const std::string& path) const {
        auto it = values.find(path);
        if (it == values.end()) throw MissingKey(path);
        return it->second;
    }
    std::string get_or(const std::string& path, const std::string& fallback) const {
        auto it = values.find(path);
        return it == values.end() ? fallback : it->second;
    }
};

inline RawConfig parse_raw(const std::string& text) {
    RawConfig raw;
    std::istringstream stream(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        const auto comment = line.find('#');
        if (comment != std::string::npos) line.erase(comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw BadValue("line " + std::to_string(line_no), "malformed section header");
            }
            section = lower(trim(line.substr(1, line.size() - 2)));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw BadValue("line " + std::to_string(line_no), "expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));  // keys are case-sensitive
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty() || key.empty()) {
            throw BadValue("line " + std::to_string(line_no), "key outside a section");
        }
        raw.values[section + "." + key] = value;
    }
    return raw;
}

inline double parse_double(const std::string& path, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw BadValue(path, "trailing characters in number");
        return v;
    } catch (const BadValue&) {
        throw;
    } catch (const std::exception&) {
        throw BadValue(path, "not a number: '" + value + "'");
    }
}

inline long parse_long(const std::string& path, const std::string& value) {
    try {
        std::size_t used = 0;
        const long v = std::stol(value, &used);
        if (used != value.size()) throw BadValue(path, "trailing characters in integer");
        return v;
    } catch (const BadValue&) {
        throw;
    } catch (const std::exception&) {
        throw BadValue(path, "not an integer: '" + value + "'");
    }
}

inline std::vector<double> parse_double_list(const std::string& path, const std::string& value) {
    std::vector<double> out;
    std::string token;
    std::istringstream stream(value);
    while (stream >> token) {
        if (!token.empty() && token.back() == ',') token.pop_back();
        if (token.empty()) continue;
        out.push_back(parse_double(path, token));
    }
    if (out.empty()) throw BadValue(path, "empty list");
    return out;
}

/// A covariance comes either from an isotropic standard deviation (scalar_key)
/// or a full row-major matrix (matrix_key); the matrix form wins when both
/// are present.
inline Matrix parse_covariance(const RawConfig& raw, int dim, const std::string& scalar_key,
                               const std::string& matrix_key) {
    if (raw.has(matrix_key)) {
        const std::vector<double> entries = parse_double_list(matrix_key, raw.get(matrix_key));
        if (static_cast<int>(entries.size()) != dim * dim) {
            throw BadValue(matrix_key,
                           "expected " + std::to_string(dim * dim) + " row-major entries");
        }
        Matrix out(dim, dim);
        for (int i = 0; i < dim; ++i) {
            for (int j = 0; j < dim; ++j) {
                out(i, j) = entries[static_cast<std::size_t>(i * dim + j)];
            }
        }
        return out;
    }
    const double std_dev = parse_double(scalar_key, raw.get(scalar_key));
    if (!(std_dev > 0.0)) throw BadValue(scalar_key, "must be > 0");
    return std_dev * std_dev * Matrix::Identity(dim, dim);
}

inline void apply_preset(const std::string& name, ExperimentConfig& cfg) {
    if (name == "paper-synthetic-small") {
        cfg.d = 2;
        cfg.m = 10;
        cfg.n = 200;
        cfg.L = 5;
        cfg.sigma = 0.5;
        cfg.mu_q = RealVector::Zero(2);
        cfg.Sigma_q = 0.25 * Matrix::Identity(2, 2);  // sigma_q = 0.5
        cfg.Sigma_0 = 0.01 * Matrix::Identity(2, 2);  // sigma_0 = 0.1
        cfg.reward_kind = RewardKind::Gaussian;
        cfg.actions = ActionSetSpec{ActionSetKind::UniformRandom, 10, 0.5, {}};
        cfg.schedule = ScheduleKind::Concurrent;
    } else {
        throw BadValue("model.preset", "unknown preset '" + name + "'");
    }
}

}  // namespace detail

/// Parses the sectioned key/value experiment format. A preset fills model and
/// schedule fields first; explicit keys override it. Errors carry the key path.
inline ExperimentConfig parse_config(const std::string& text) {
    using detail::parse_double;
    using detail::parse_long;
    const detail::RawConfig raw = detail::parse_raw(text);
    ExperimentConfig cfg;

    bool preset_applied = false;
    if (raw.has("model.preset")) {
        detail::apply_preset(detail::lower(raw.get("model.preset")), cfg);
        preset_applied = true;
    }

    if (raw.has("model.d")) cfg.d = static_cast<int>(parse_long("model.d", raw.get("model.d")));
    else if (!preset_applied) throw MissingKey("model.d");
    if (cfg.d < 1) throw BadValue("model.d", "must be >= 1");

    if (raw.has("model.m")) cfg.m = static_cast<int>(parse_long("model.m", raw.get("model.m")));
    else if (!preset_applied) throw MissingKey("model.m");
    if (raw.has("model.n")) cfg.n = static_cast<int>(parse_long("model.n", raw.get("model.n")));
    else if (!preset_applied) throw MissingKey("model.n");
    if (raw.has("model.L")) cfg.L = static_cast<int>(parse_long("model.L", raw.get("model.L")));
    if (raw.has("model.sigma")) cfg.sigma = parse_double("model.sigma", raw.get("model.sigma"));
    else if (!preset_applied) throw MissingKey("model.sigma");

    if (cfg.m < 1) throw BadValue("model.m", "must be >= 1");
    if (cfg.n < 1) throw BadValue("model.n", "must be >= 1");
    if (!(cfg.sigma > 0.0)) throw BadValue("model.sigma", "must be > 0");

    if (!preset_applied || raw.has("model.sigma_q") || raw.has("model.Sigma_q")) {
        cfg.Sigma_q = detail::parse_covariance(raw, cfg.d, "model.sigma_q", "model.Sigma_q");
    }
    if (!preset_applied || raw.has("model.sigma_0") || raw.has("model.Sigma_0")) {
        cfg.Sigma_0 = detail::parse_covariance(raw, cfg.d, "model.sigma_0", "model.Sigma_0");
    }

    if (raw.has("model.mu_q")) {
        const auto entries = detail::parse_double_list("model.mu_q", raw.get("model.mu_q"));
        if (static_cast<int>(entries.size()) == 1) {
            cfg.mu_q = entries[0] * RealVector::Ones(cfg.d);
        } else if (static_cast<int>(entries.size()) == cfg.d) {
            cfg.mu_q = Eigen::Map<const RealVector>(entries.data(),
                                                    static_cast<Eigen::Index>(entries.size()));
        } else {
            throw BadValue("model.mu_q", "expected 1 or d entries");
        }
    } else if (cfg.mu_q.size() != cfg.d) {
        cfg.mu_q = RealVector::Zero(cfg.d);
    }

    if (raw.has("model.reward_kind")) {
        const std::string kind = detail::lower(raw.get("model.reward_kind"));
        if (kind == "gaussian") cfg.reward_kind = RewardKind::Gaussian;
        else if (kind == "bernoulli") cfg.reward_kind = RewardKind::BernoulliMisspecified;
        else throw BadValue("model.reward_kind", "expected gaussian or bernoulli");
    }

    if (raw.has("model.actions")) {
        const std::string kind = detail::lower(raw.get("model.actions"));
        if (kind == "uniform") cfg.actions.kind = ActionSetKind::UniformRandom;
        else if (kind == "standard-basis") cfg.actions.kind = ActionSetKind::StandardBasis;
        else if (kind == "explicit") cfg.actions.kind = ActionSetKind::Explicit;
        else throw BadValue("model.actions", "expected uniform, standard-basis, or explicit");
    }
    if (raw.has("model.num_actions")) {
        cfg.actions.num_actions =
            static_cast<int>(parse_long("model.num_actions", raw.get("model.num_actions")));
        if (cfg.actions.num_actions < 1) throw BadValue("model.num_actions", "must be >= 1");
    }
    if (raw.has("model.action_halfwidth")) {
        cfg.actions.halfwidth =
            parse_double("model.action_halfwidth", raw.get("model.action_halfwidth"));
        if (!(cfg.actions.halfwidth > 0.0)) {
            throw BadValue("model.action_halfwidth", "must be > 0");
        }
    }
    if (cfg.actions.kind == ActionSetKind::UniformRandom &&
        cfg.d * cfg.actions.halfwidth * cfg.actions.halfwidth > 1.0 + 1e-12) {
        throw UnitBallViolation(
            "uniform actions on [-h, h]^d can leave the unit ball: d h^2 = " +
            std::to_string(cfg.d * cfg.actions.halfwidth * cfg.actions.halfwidth));
    }
    if (raw.has("model.action_list")) {
        const auto entries =
            detail::parse_double_list("model.action_list", raw.get("model.action_list"));
        if (entries.size() % static_cast<std::size_t>(cfg.d) != 0) {
            throw BadValue("model.action_list", "length must be a multiple of d");
        }
        cfg.actions.explicit_actions.clear();
        for (std::size_t start = 0; start < entries.size();
             start += static_cast<std::size_t>(cfg.d)) {
            RealVector a(cfg.d);
            for (int j = 0; j < cfg.d; ++j) a(j) = entries[start + static_cast<std::size_t>(j)];
            cfg.actions.explicit_actions.push_back(std::move(a));
        }
        cfg.actions.kind = ActionSetKind::Explicit;
        cfg.actions.num_actions = static_cast<int>(cfg.actions.explicit_actions.size());
    }
    if (cfg.actions.kind == ActionSetKind::Explicit && cfg.actions.explicit_actions.empty()) {
        throw MissingKey("model.action_list");
    }
    if (cfg.actions.kind == ActionSetKind::StandardBasis) cfg.actions.num_actions = cfg.d;

    if (raw.has("schedule.kind")) {
        const std::string kind = detail::lower(raw.get("schedule.kind"));
        if (kind == "round-robin") cfg.schedule = ScheduleKind::SequentialRoundRobin;
        else if (kind == "random-permutation") cfg.schedule = ScheduleKind::SequentialRandom;
        else if (kind == "meta") cfg.schedule = ScheduleKind::Meta;
        else if (kind == "concurrent") cfg.schedule = ScheduleKind::Concurrent;
        else {
            throw BadValue("schedule.kind",
                           "expected round-robin, random-permutation, meta, or concurrent");
        }
    }
    if (cfg.schedule != ScheduleKind::Concurrent && cfg.L != 1) {
        throw BadValue("model.L", "only concurrent schedules take L > 1");
    }
    if (cfg.L < 1 || cfg.L > cfg.m) throw BadValue("model.L", "must satisfy 1 <= L <= m");
    if (cfg.schedule == ScheduleKind::Concurrent &&
        (static_cast<long>(cfg.m) * cfg.n) % cfg.L != 0) {
        throw BadValue("model.L", "m * n must be divisible by L");
    }

    if (raw.has("agents.agents")) {
        cfg.agents.clear();
        std::istringstream stream(raw.get("agents.agents"));
        std::string token;
        while (std::getline(stream, token, ',')) {
            const std::string name = detail::lower(detail::trim(token));
            if (name.empty()) continue;
            if (name == "hierts") cfg.agents.push_back(AgentKind::HierTs);
            else if (name == "oraclets") cfg.agents.push_back(AgentKind::OracleTs);
            else if (name == "marginalts" || name == "ts") {
                cfg.agents.push_back(AgentKind::MarginalTs);
            } else {
                throw BadValue("agents.agents", "unknown agent '" + name + "'");
            }
        }
        if (cfg.agents.empty()) throw BadValue("agents.agents", "need at least one agent");
    }

    if (raw.has("run.replications")) {
        cfg.replications =
            static_cast<int>(parse_long("run.replications", raw.get("run.replications")));
        if (cfg.replications < 1) throw BadValue("run.replications", "must be >= 1");
    }
    if (raw.has("run.seed")) {
        cfg.seed = static_cast<std::uint64_t>(parse_long("run.seed", raw.get("run.seed")));
    }
    if (raw.has("run.out_dir")) cfg.out_dir = raw.get("run.out_dir");
    if (raw.has("run.format")) {
        const std::string fmt = detail::lower(raw.get("run.format"));
        if (fmt == "csv") cfg.format = OutputFormat::Csv;
        else if (fmt == "plot") cfg.format = OutputFormat::Plot;
        else if (fmt == "both") cfg.format = OutputFormat::Both;
        else throw BadValue("run.format", "expected csv, plot, or both");
    }
    if (raw.has("run.bounds")) {
        const std::string flag = detail::lower(raw.get("run.bounds"));
        if (flag == "on" || flag == "true") cfg.bounds_enabled = true;
        else if (flag == "off" || flag == "false") cfg.bounds_enabled = false;
        else throw BadValue("run.bounds", "expected on or off");
    }
    if (raw.has("run.forced_exploration")) {
        const std::string mode = detail::lower(raw.get("run.forced_exploration"));
        if (mode == "auto") cfg.forced_exploration = ForcedExplorationMode::Auto;
        else if (mode == "on") cfg.forced_exploration = ForcedExplorationMode::On;
        else if (mode == "off") cfg.forced_exploration = ForcedExplorationMode::Off;
        else throw BadValue("run.forced_exploration", "expected auto, on, or off");
    }
    if (raw.has("run.threads")) {
        cfg.threads = static_cast<int>(parse_long("run.threads", raw.get("run.threads")));
        if (cfg.threads < 1) throw BadValue("run.threads", "must be >= 1");
    }

    // Structural checks; CovMatrix construction validates definiteness.
    if (cfg.Sigma_q.rows() != cfg.d || cfg.Sigma_0.rows() != cfg.d) {
        throw BadValue("model.Sigma_q", "covariances must match model.d");
    }
    (void)CovMatrix(cfg.Sigma_q);
    (void)CovMatrix(cfg.Sigma_0);
    return cfg;
}

}  // namespace hierts
