#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>

#include <nlohmann/json.hpp>

#include "vaetpp/errors.hpp"
#include "vaetpp/harness.hpp"
#include "vaetpp/model/baselines.hpp"
#include "vaetpp/model/vaetpp.hpp"

namespace vaetpp {

using nlohmann::json;

namespace {

template <typename T>
T read_as(const json& v, const std::string& key) {
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) {
                throw ValidationError("expected a boolean");
            }
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) {
                throw ValidationError("expected an integer");
            }
            if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
                    throw ValidationError("expected a non-negative integer");
                }
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) {
                throw ValidationError("expected a number");
            }
        } else {
            if (!v.is_string()) {
                throw ValidationError("expected a string");
            }
        }
        return v.get<T>();
    } catch (const ValidationError& e) {
        throw ValidationError("config key '" + key + "': " + e.what());
    }
}

const std::vector<std::string> kModels = {"vaetpp", "vaetpp-static", "exponential", "lognormmix"};

} // namespace

void ExperimentConfig::validate() const {
    if (std::find(kModels.begin(), kModels.end(), model) == kModels.end()) {
        throw ValidationError("unknown model '" + model + "' (expected vaetpp, vaetpp-static, exponential or lognormmix)");
    }
    if (num_intervals < 1) {
        throw ValidationError("num_intervals must be >= 1");
    }
    if (embed_dim < 1 || hidden < 1 || decoder_hidden < 1 || components < 1) {
        throw ValidationError("embed_dim, hidden, decoder_hidden and components must be positive");
    }
    if (edge_types < 2) {
        throw ValidationError("edge_types must be >= 2");
    }
    if (num_marks < 0) {
        throw ValidationError("num_marks must be >= 0");
    }
    if (!(initial_edge_probability > 0.0 && initial_edge_probability < 1.0)) {
        throw ValidationError("initial_edge_probability must lie in (0, 1)");
    }
    if (!(temperature > 0.0) || !(temperature_start > 0.0)) {
        throw ValidationError("temperatures must be positive");
    }
    if (anneal_epochs < 0) {
        throw ValidationError("anneal_epochs must be >= 0");
    }
    const auto mode = model::latent_mode_from_string(eval_latents);
    if (mode == model::LatentMode::fixed) {
        throw ValidationError("eval_latents cannot be 'fixed'");
    }
    if (!(learning_rate > 0.0) || clip_norm < 0.0) {
        throw ValidationError("learning_rate must be positive and clip_norm non-negative");
    }
    if (batch_size < 1 || max_epochs < 1 || patience < 0) {
        throw ValidationError("batch_size and max_epochs must be positive, patience non-negative");
    }
    if (split.train < 0 || split.val < 0 || split.test < 0 ||
        std::abs(split.train + split.val + split.test - 1.0) > 1e-9) {
        throw ValidationError("split fractions must be non-negative and sum to 1");
    }
    const auto& w = loss_weights;
    if (w.elbo < 0 || w.time < 0 || w.type < 0 || w.elbo + w.time + w.type == 0.0) {
        throw ValidationError("loss weights must be non-negative and not all zero");
    }
}

double ExperimentConfig::temperature_at(int epoch) const {
    if (anneal_epochs <= 0) {
        return temperature;
    }
    const double f = std::min(1.0, static_cast<double>(epoch) / anneal_epochs);
    return temperature_start * std::pow(temperature / temperature_start, f);
}

ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) {
        throw ValidationError("config must be a JSON object");
    }
    ExperimentConfig c;
    const std::map<std::string, std::function<void(const json&)>> fields = {
        {"model", [&](const json& v) { c.model = read_as<std::string>(v, "model"); }},
        {"num_intervals", [&](const json& v) { c.num_intervals = read_as<int>(v, "num_intervals"); }},
        {"K", [&](const json& v) { c.num_intervals = read_as<int>(v, "K"); }},
        {"embed_dim", [&](const json& v) { c.embed_dim = read_as<int>(v, "embed_dim"); }},
        {"hidden", [&](const json& v) { c.hidden = read_as<int>(v, "hidden"); }},
        {"decoder_hidden", [&](const json& v) { c.decoder_hidden = read_as<int>(v, "decoder_hidden"); }},
        {"components", [&](const json& v) { c.components = read_as<int>(v, "components"); }},
        {"edge_types", [&](const json& v) { c.edge_types = read_as<int>(v, "edge_types"); }},
        {"num_marks", [&](const json& v) { c.num_marks = read_as<int>(v, "num_marks"); }},
        {"initial_edge_probability",
         [&](const json& v) { c.initial_edge_probability = read_as<double>(v, "initial_edge_probability"); }},
        {"temperature", [&](const json& v) { c.temperature = read_as<double>(v, "temperature"); }},
        {"temperature_start", [&](const json& v) { c.temperature_start = read_as<double>(v, "temperature_start"); }},
        {"anneal_epochs", [&](const json& v) { c.anneal_epochs = read_as<int>(v, "anneal_epochs"); }},
        {"hard_samples", [&](const json& v) { c.hard_samples = read_as<bool>(v, "hard_samples"); }},
        {"eval_latents", [&](const json& v) { c.eval_latents = read_as<std::string>(v, "eval_latents"); }},
        {"learning_rate", [&](const json& v) { c.learning_rate = read_as<double>(v, "learning_rate"); }},
        {"clip_norm", [&](const json& v) { c.clip_norm = read_as<double>(v, "clip_norm"); }},
        {"batch_size", [&](const json& v) { c.batch_size = read_as<int>(v, "batch_size"); }},
        {"max_epochs", [&](const json& v) { c.max_epochs = read_as<int>(v, "max_epochs"); }},
        {"patience", [&](const json& v) { c.patience = read_as<int>(v, "patience"); }},
        {"seed", [&](const json& v) { c.seed = read_as<std::uint64_t>(v, "seed"); }},
        {"log_train_nll", [&](const json& v) { c.log_train_nll = read_as<bool>(v, "log_train_nll"); }},
        {"split",
         [&](const json& v) {
             if (!v.is_array() || v.size() != 3) {
                 throw ValidationError("config key 'split': expected [train, val, test]");
             }
             c.split = {read_as<double>(v[0], "split"), read_as<double>(v[1], "split"), read_as<double>(v[2], "split")};
         }},
        {"loss_weights",
         [&](const json& v) {
             if (!v.is_object()) {
                 throw ValidationError("config key 'loss_weights': expected an object");
             }
             for (const auto& [k, w] : v.items()) {
                 if (k == "elbo") {
                     c.loss_weights.elbo = read_as<double>(w, "loss_weights.elbo");
                 } else if (k == "time") {
                     c.loss_weights.time = read_as<double>(w, "loss_weights.time");
                 } else if (k == "type") {
                     c.loss_weights.type = read_as<double>(w, "loss_weights.type");
                 } else {
                     throw ValidationError("unknown loss weight '" + k + "'");
                 }
             }
         }},
    };
    for (const auto& [key, value] : j.items()) {
        auto it = fields.find(key);
        if (it == fields.end()) {
            throw ValidationError("unknown config key '" + key + "'");
        }
        it->second(value);
    }
    c.validate();
    return c;
}

json to_json(const ExperimentConfig& c) {
    return {
        {"model", c.model},
        {"num_intervals", c.num_intervals},
        {"embed_dim", c.embed_dim},
        {"hidden", c.hidden},
        {"decoder_hidden", c.decoder_hidden},
        {"components", c.components},
        {"edge_types", c.edge_types},
        {"num_marks", c.num_marks},
        {"initial_edge_probability", c.initial_edge_probability},
        {"temperature", c.temperature},
        {"temperature_start", c.temperature_start},
        {"anneal_epochs", c.anneal_epochs},
        {"hard_samples", c.hard_samples},
        {"eval_latents", c.eval_latents},
        {"learning_rate", c.learning_rate},
        {"clip_norm", c.clip_norm},
        {"batch_size", c.batch_size},
        {"max_epochs", c.max_epochs},
        {"patience", c.patience},
        {"seed", c.seed},
        {"log_train_nll", c.log_train_nll},
        {"split", {c.split.train, c.split.val, c.split.test}},
        {"loss_weights", {{"elbo", c.loss_weights.elbo}, {"time", c.loss_weights.time}, {"type", c.loss_weights.type}}},
    };
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open config file '" + path + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ValidationError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

std::unique_ptr<model::EventModel> make_model(const ExperimentConfig& config, int num_types) {
    config.validate();
    if (config.model == "vaetpp" || config.model == "vaetpp-static") {
        model::VaeTppConfig m;
        m.num_types = num_types;
        m.num_intervals = config.num_intervals;
        m.embed_dim = config.embed_dim;
        m.hidden = config.hidden;
        m.decoder_hidden = config.decoder_hidden;
        m.components = config.components;
        m.edge_types = config.edge_types;
        m.num_marks = config.num_marks;
        m.initial_edge_probability = config.initial_edge_probability;
        return std::make_unique<model::VaeTpp>(m, config.seed, config.model == "vaetpp-static");
    }
    model::BaselineConfig b;
    b.num_types = num_types;
    b.hidden = config.hidden;
    b.components = config.components;
    const auto kind = config.model == "exponential" ? model::BaselineKind::exponential : model::BaselineKind::lognormmix;
    return std::make_unique<model::RecurrentBaseline>(kind, b, config.seed);
}

} // namespace vaetpp
