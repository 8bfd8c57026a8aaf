#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "vaetpp/errors.hpp"
#include "vaetpp/harness.hpp"
#include "vaetpp/nn/adam.hpp"
#include "vaetpp/nn/archive.hpp"

namespace vaetpp {

namespace fs = std::filesystem;
using nlohmann::json;
using nn::Matrix;
using nn::Tape;

json to_json(const MetricsReport& r, bool with_sequences) {
    json j = {
        {"split", r.split},
        {"sequences", r.sequences},
        {"events", r.events},
        {"nll", r.nll},
        {"elbo", r.elbo},
        {"kl", r.kl},
        {"rmse", r.rmse},
        {"accuracy", r.accuracy},
        {"type_predictions", r.type_predictions},
        {"nll_unit", "nats per event"},
    };
    if (with_sequences) {
        json seqs = json::array();
        for (const auto& s : r.per_sequence) {
            seqs.push_back({{"seq_id", s.seq_id}, {"events", s.events}, {"nll", s.nll}});
        }
        j["per_sequence"] = std::move(seqs);
    }
    return j;
}

MetricsReport evaluate(const model::EventModel& m, const std::vector<const EventSequence*>& seqs,
                       const EvaluationOptions& options, const std::string& split_name) {
    if (seqs.empty()) {
        throw ValidationError("cannot evaluate an empty split");
    }
    model::ForwardOptions eval;
    eval.latents = model::latent_mode_from_string(options.latents);
    eval.hard = true;
    eval.noise_seed = options.noise_seed;

    MetricsReport r;
    r.split = split_name;
    double log_lik = 0.0, elbo = 0.0, kl = 0.0, sq = 0.0;
    std::size_t correct = 0;
    for (std::size_t s = 0; s < seqs.size(); ++s) {
        const EventSequence& seq = *seqs[s];
        Tape tape(false);
        const model::ForwardResult f = m.forward(tape, seq, eval);
        const double ll = f.log_likelihood.value().sum();
        const auto n = static_cast<std::size_t>(f.log_likelihood.cols());
        log_lik += ll;
        kl += f.kl.scalar();
        r.events += n;
        r.per_sequence.push_back({seq.id(), n, n > 0 ? -ll / static_cast<double>(n) : 0.0});
        if (n > 0) {
            sq += (f.time_prediction.value() - f.gaps).squaredNorm();
        }
        const Matrix& logits = f.type_logits.value();
        for (Eigen::Index j = 0; j < logits.cols(); ++j) {
            Eigen::Index arg;
            logits.col(j).maxCoeff(&arg);
            correct += static_cast<int>(arg) == f.types[j + 1] ? 1 : 0;
        }
        r.type_predictions += static_cast<std::size_t>(logits.cols());

        if (options.with_elbo && m.has_latent_graph()) {
            model::ForwardOptions sample = eval;
            sample.latents = model::LatentMode::sample;
            sample.noise_seed = options.noise_seed + s;
            Tape t2(false);
            const model::ForwardResult g = m.forward(t2, seq, sample);
            elbo += g.log_likelihood.value().sum() - g.kl.scalar();
        } else {
            elbo += ll - f.kl.scalar();
        }
    }
    r.sequences = seqs.size();
    const double n = std::max<double>(1.0, static_cast<double>(r.events));
    r.nll = -log_lik / n;
    r.elbo = elbo / n;
    r.kl = kl / n;
    r.rmse = std::sqrt(sq / n);
    r.accuracy = r.type_predictions > 0 ? static_cast<double>(correct) / static_cast<double>(r.type_predictions) : 0.0;
    return r;
}

namespace {

json epoch_json(const EpochRecord& e) {
    json j = {{"epoch", e.epoch},
              {"temperature", e.temperature},
              {"train_loss", e.train_loss},
              {"val_nll", e.val_nll},
              {"improved", e.improved}};
    if (e.train_nll) {
        j["train_nll"] = *e.train_nll;
    }
    return j;
}

} // namespace

TrainResult train(const ExperimentConfig& config, const std::vector<const EventSequence*>& train_set,
                  const std::vector<const EventSequence*>& val_set, std::ostream* log) {
    config.validate();
    if (train_set.empty()) {
        throw ValidationError("training split is empty");
    }
    const int U = train_set.front()->num_types();
    TrainResult result;
    result.model = make_model(config, U);
    model::EventModel& m = *result.model;
    m.fit_normalization(train_set);

    nn::AdamOptions adam_options;
    adam_options.learning_rate = config.learning_rate;
    adam_options.clip_norm = config.clip_norm;
    nn::Adam adam(m.parameters(), adam_options);

    EvaluationOptions eval;
    eval.latents = config.eval_latents;
    eval.with_elbo = false;
    eval.noise_seed = config.seed;
    const auto& selection_set = val_set.empty() ? train_set : val_set;

    std::mt19937_64 rng(config.seed ^ 0x5eed5eedULL);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    auto best_state = m.state();
    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        rec.temperature = config.temperature_at(epoch);
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        std::size_t event_sum = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::size_t batch_events = 0;
            for (std::size_t b = start; b < end; ++b) {
                batch_events += train_set[order[b]]->size();
            }
            const double norm = 1.0 / static_cast<double>(std::max<std::size_t>(1, batch_events));
            m.parameters().zero_grad();
            for (std::size_t b = start; b < end; ++b) {
                const EventSequence& seq = *train_set[order[b]];
                model::ForwardOptions o;
                o.latents = model::LatentMode::sample;
                o.temperature = rec.temperature;
                o.hard = config.hard_samples;
                o.noise_seed = rng();
                Tape tape;
                const nn::Var loss = model::composite_loss(m.forward(tape, seq, o), config.loss_weights);
                const double value = loss.scalar();
                if (!std::isfinite(value)) {
                    throw RuntimeFailure("non-finite training loss at epoch " + std::to_string(epoch) +
                                         " on sequence '" + seq.id() + "'");
                }
                loss_sum += value;
                tape.backward(nn::scale(loss, norm));
            }
            event_sum += batch_events;
            const double grad_norm = adam.step();
            if (!std::isfinite(grad_norm)) {
                throw RuntimeFailure("non-finite gradient at epoch " + std::to_string(epoch));
            }
        }
        rec.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(1, event_sum));
        if (config.log_train_nll) {
            rec.train_nll = evaluate(m, train_set, eval).nll;
        }
        rec.val_nll = val_set.empty() && rec.train_nll ? *rec.train_nll : evaluate(m, selection_set, eval).nll;
        if (!std::isfinite(rec.val_nll)) {
            throw RuntimeFailure("non-finite validation NLL at epoch " + std::to_string(epoch));
        }
        rec.improved = rec.val_nll < best;
        if (rec.improved) {
            best = rec.val_nll;
            best_state = m.state();
            result.best_epoch = epoch;
            since_best = 0;
        } else {
            ++since_best;
        }
        result.history.push_back(rec);
        if (log) {
            *log << epoch_json(rec).dump() << '\n';
        }
        if (since_best > config.patience) {
            result.stopped_early = true;
            break;
        }
    }

    m.load_state(best_state);
    result.best_val_nll = best;
    result.final_train_nll = evaluate(m, train_set, eval).nll;
    if (log) {
        *log << json{{"final", true},
                     {"epochs", result.history.size()},
                     {"best_epoch", result.best_epoch},
                     {"best_val_nll", result.best_val_nll},
                     {"train_nll", result.final_train_nll},
                     {"stopped_early", result.stopped_early}}
                    .dump()
             << '\n';
        log->flush();
    }
    return result;
}

void save_checkpoint(const std::string& dir, const ExperimentConfig& config, const model::EventModel& m) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw RuntimeFailure("cannot create checkpoint directory '" + dir + "': " + ec.message());
    }
    nn::save_archive((fs::path(dir) / "model.bin").string(), m.state());
    json j = to_json(config);
    j["num_types"] = m.num_types();
    std::ofstream out(fs::path(dir) / "config.json");
    if (!out) {
        throw RuntimeFailure("cannot write checkpoint config in '" + dir + "'");
    }
    out << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& dir) {
    const fs::path cfg = fs::path(dir) / "config.json";
    const fs::path bin = fs::path(dir) / "model.bin";
    if (!fs::exists(cfg) || !fs::exists(bin)) {
        throw ValidationError("'" + dir + "' is not a checkpoint (needs config.json and model.bin)");
    }
    std::ifstream in(cfg);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ValidationError("checkpoint config is not valid JSON: " + std::string(e.what()));
    }
    if (!j.contains("num_types") || !j["num_types"].is_number_integer()) {
        throw ValidationError("checkpoint config lacks num_types");
    }
    const int U = j["num_types"].get<int>();
    j.erase("num_types");
    Checkpoint c;
    c.config = config_from_json(j);
    c.model = make_model(c.config, U);
    std::map<std::string, Matrix> tensors;
    try {
        tensors = nn::load_archive(bin.string());
    } catch (const std::exception& e) {
        throw RuntimeFailure("cannot read '" + bin.string() + "': " + e.what());
    }
    try {
        c.model->load_state(tensors);
    } catch (const std::invalid_argument& e) {
        throw ValidationError("checkpoint does not match its config: " + std::string(e.what()));
    }
    return c;
}

} // namespace vaetpp
