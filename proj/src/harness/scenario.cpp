#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>

#include <nlohmann/json.hpp>

#include "vaetpp/errors.hpp"
#include "vaetpp/harness.hpp"

namespace vaetpp {

using nlohmann::json;

ScenarioConfig regime_switch_scenario(int num_sequences, double horizon, std::uint64_t seed) {
    const int U = 4;
    ScenarioConfig s;
    s.horizon = horizon;
    s.num_sequences = num_sequences;
    s.seed = seed;
    for (int k = 0; k < 2; ++k) {
        hawkes::RegimeParams r;
        r.mu = Eigen::VectorXd::Constant(U, 0.02);
        r.alpha = Eigen::MatrixXd::Zero(U, U);
        r.eta = Eigen::MatrixXd::Ones(U, U);
        for (int pair = 0; pair < 2; ++pair) {
            const int parent = 2 * pair + k, child = 2 * pair + 1 - k;
            r.mu(parent) = 0.2;
            r.alpha(parent, parent) = 0.6;
            r.alpha(child, parent) = 0.4;
            r.eta(child, parent) = 2.0;
        }
        s.regimes.push_back(r);
    }
    return s;
}

namespace {

Eigen::VectorXd vector_from(const json& j, const std::string& key) {
    if (!j.is_array()) {
        throw ValidationError("scenario '" + key + "' must be an array of numbers");
    }
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) {
            throw ValidationError("scenario '" + key + "' must be an array of numbers");
        }
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

Eigen::MatrixXd matrix_from(const json& j, int U, const std::string& key) {
    if (j.is_number()) {
        return Eigen::MatrixXd::Constant(U, U, j.get<double>());
    }
    if (!j.is_array() || static_cast<int>(j.size()) != U) {
        throw ValidationError("scenario '" + key + "' must be a number or a U x U array");
    }
    Eigen::MatrixXd m(U, U);
    for (int v = 0; v < U; ++v) {
        const Eigen::VectorXd row = vector_from(j[v], key);
        if (row.size() != U) {
            throw ValidationError("scenario '" + key + "' must be a number or a U x U array");
        }
        m.row(v) = row.transpose();
    }
    return m;
}

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index v = 0; v < m.rows(); ++v) {
        json row = json::array();
        for (Eigen::Index u = 0; u < m.cols(); ++u) {
            row.push_back(m(v, u));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

ScenarioConfig scenario_from_json(const json& j) {
    if (!j.is_object()) {
        throw ValidationError("scenario config must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        static const std::vector<std::string> known = {"preset", "regimes",  "T",   "num_sequences", "seed",
                                                       "max_events", "enforce_stationarity"};
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ValidationError("unknown scenario key '" + key + "'");
        }
    }
    auto number = [&](const char* key, double fallback) {
        if (!j.contains(key)) {
            return fallback;
        }
        if (!j[key].is_number()) {
            throw ValidationError(std::string("scenario '") + key + "' must be a number");
        }
        return j[key].get<double>();
    };
    auto integer = [&](const char* key, long long fallback) {
        if (!j.contains(key)) {
            return fallback;
        }
        if (!j[key].is_number_integer() || j[key].get<long long>() < 0) {
            throw ValidationError(std::string("scenario '") + key + "' must be a non-negative integer");
        }
        return j[key].get<long long>();
    };

    ScenarioConfig s;
    const int n = static_cast<int>(integer("num_sequences", 1));
    const double T = number("T", 20.0);
    const auto seed = static_cast<std::uint64_t>(integer("seed", 0));
    if (j.contains("preset")) {
        if (j.contains("regimes")) {
            throw ValidationError("scenario takes either 'preset' or 'regimes', not both");
        }
        if (!j["preset"].is_string() || j["preset"].get<std::string>() != "regime-switch") {
            throw ValidationError("unknown scenario preset (expected \"regime-switch\")");
        }
        s = regime_switch_scenario(n, T, seed);
    } else {
        if (!j.contains("regimes") || !j["regimes"].is_array() || j["regimes"].empty()) {
            throw ValidationError("scenario needs a non-empty 'regimes' array or a 'preset'");
        }
        for (const auto& r : j["regimes"]) {
            if (!r.is_object() || !r.contains("mu") || !r.contains("alpha")) {
                throw ValidationError("each regime needs 'mu' and 'alpha'");
            }
            hawkes::RegimeParams p;
            p.mu = vector_from(r["mu"], "mu");
            const int U = static_cast<int>(p.mu.size());
            p.alpha = matrix_from(r["alpha"], U, "alpha");
            p.eta = r.contains("eta") ? matrix_from(r["eta"], U, "eta") : Eigen::MatrixXd::Ones(U, U);
            s.regimes.push_back(p);
        }
        s.horizon = T;
        s.num_sequences = n;
        s.seed = seed;
    }
    s.options.max_events = static_cast<std::size_t>(integer("max_events", 1'000'000));
    if (j.contains("enforce_stationarity")) {
        if (!j["enforce_stationarity"].is_boolean()) {
            throw ValidationError("scenario 'enforce_stationarity' must be a boolean");
        }
        s.options.enforce_stationarity = j["enforce_stationarity"].get<bool>();
    }
    if (s.num_sequences < 1 || !(s.horizon > 0.0)) {
        throw ValidationError("scenario needs num_sequences >= 1 and T > 0");
    }
    // surfaces parameter errors before any sampling
    const hawkes::PiecewiseHawkes check(s.regimes, s.horizon);
    (void)check;
    return s;
}

std::vector<EventSequence> simulate_scenario(const ScenarioConfig& s) {
    const hawkes::PiecewiseHawkes process(s.regimes, s.horizon);
    std::mt19937_64 rng(s.seed);
    std::vector<EventSequence> out;
    out.reserve(static_cast<std::size_t>(s.num_sequences));
    for (int i = 0; i < s.num_sequences; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "seq-%04d", i);
        out.push_back(hawkes::simulate(process, rng(), s.options, id));
    }
    return out;
}

json scenario_truth(const ScenarioConfig& s) {
    const hawkes::PiecewiseHawkes process(s.regimes, s.horizon);
    const auto graphs = process.planted_graph();
    json regimes = json::array();
    for (int k = 0; k < process.num_regimes(); ++k) {
        const auto& r = process.regime(k);
        regimes.push_back({{"mu", std::vector<double>(r.mu.data(), r.mu.data() + r.mu.size())},
                           {"alpha", matrix_json(r.alpha)},
                           {"eta", matrix_json(r.eta)},
                           {"adjacency", matrix_json(graphs[k].cast<double>())}});
    }
    return {{"U", process.num_types()},
            {"K", process.num_regimes()},
            {"T", s.horizon},
            {"num_sequences", s.num_sequences},
            {"seed", s.seed},
            {"edge_convention", "adjacency[v][u] = 1 iff events of type u excite type v"},
            {"regimes", regimes}};
}

std::string resolve_data_path(const std::string& path) {
    namespace fs = std::filesystem;
    const fs::path p(path);
    if (p.is_absolute() || fs::exists(p)) {
        return path;
    }
    if (const char* dir = std::getenv("VAETPP_DATA_DIR"); dir != nullptr && *dir != '\0') {
        const fs::path candidate = fs::path(dir) / p;
        if (fs::exists(candidate)) {
            return candidate.string();
        }
    }
    return path;
}

} // namespace vaetpp
