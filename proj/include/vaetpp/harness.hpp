#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vaetpp/events.hpp"
#include "vaetpp/hawkes.hpp"
#include "vaetpp/model/model.hpp"

namespace vaetpp {

/// Training or evaluation failed for a reason other than bad input
/// (non-finite loss, unreadable checkpoint file, ...).
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::string model = "vaetpp";  // vaetpp | vaetpp-static | exponential | lognormmix
    int num_intervals = 4;         // K
    int embed_dim = 64;            // D
    int hidden = 64;
    int decoder_hidden = 64;
    int components = 16;           // C
    int edge_types = 2;            // E
    int num_marks = 0;
    double initial_edge_probability = 0.5;

    double temperature = 0.5;        // final concrete temperature
    double temperature_start = 0.5;  // annealed geometrically to `temperature`
    int anneal_epochs = 0;
    bool hard_samples = false;
    std::string eval_latents = "mode";

    double learning_rate = 1e-3;
    double clip_norm = 0.0;
    int batch_size = 32;
    int max_epochs = 200;
    int patience = 20;
    std::uint64_t seed = 0;
    SplitFractions split;
    model::LossWeights loss_weights;
    /// Also report the training-split NLL after every epoch.
    bool log_train_nll = true;

    void validate() const;
    /// Temperature used during epoch `epoch` (0-based).
    double temperature_at(int epoch) const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::string& path);

std::unique_ptr<model::EventModel> make_model(const ExperimentConfig& config, int num_types);

struct SequenceMetrics {
    std::string seq_id;
    std::size_t events = 0;
    double nll = 0.0;  // per event
};

struct MetricsReport {
    std::string split;
    std::size_t sequences = 0;
    std::size_t events = 0;
    double nll = 0.0;   // mean negative log-likelihood per event
    double elbo = 0.0;  // per event; equals -nll for models without latents
    double kl = 0.0;    // per event
    double rmse = 0.0;  // next-event time, over all events
    double accuracy = 0.0;  // next-event type, over events after the first
    std::size_t type_predictions = 0;
    std::vector<SequenceMetrics> per_sequence;
};

nlohmann::json to_json(const MetricsReport& r, bool with_sequences = false);

struct EvaluationOptions {
    std::string latents = "mode";
    bool with_elbo = true;
    std::uint64_t noise_seed = 0;
};

MetricsReport evaluate(const model::EventModel& model, const std::vector<const EventSequence*>& seqs,
                       const EvaluationOptions& options, const std::string& split_name = "");

struct EpochRecord {
    int epoch = 0;
    double temperature = 0.0;
    double train_loss = 0.0;  // composite loss per event, averaged over the epoch
    std::optional<double> train_nll;
    double val_nll = 0.0;
    bool improved = false;
};

struct TrainResult {
    std::unique_ptr<model::EventModel> model;  // parameters of the best epoch
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    double best_val_nll = 0.0;
    double final_train_nll = 0.0;  // best model, evaluation mode
    bool stopped_early = false;
};

/// Adam on the composite loss, best-by-validation-NLL model selection and
/// early stopping. When `val` is empty the training NLL selects the model.
/// Writes one JSON object per epoch plus a final record to `log` if given.
TrainResult train(const ExperimentConfig& config, const std::vector<const EventSequence*>& train,
                  const std::vector<const EventSequence*>& val, std::ostream* log = nullptr);

/// Checkpoint directory: model.bin (named tensors) + config.json.
void save_checkpoint(const std::string& dir, const ExperimentConfig& config, const model::EventModel& model);

struct Checkpoint {
    ExperimentConfig config;
    std::unique_ptr<model::EventModel> model;
};

Checkpoint load_checkpoint(const std::string& dir);

struct EdgeProbability {
    std::string seq_id;
    int k = 0;
    int v = 0;
    int u = 0;
    double p = 0.0;
};

/// Posterior P[z_(v,u)^k != 0] for every sequence; a static model is
/// repeated over `num_intervals`. Throws ValidationError for models without
/// latent graphs.
std::vector<EdgeProbability> edge_posteriors(const model::EventModel& model,
                                             const std::vector<const EventSequence*>& seqs, int num_intervals);

/// Writes edges.csv (seq_id,k,v,u,p), aggregate.csv (k,v,u,p mean over
/// sequences) and interval_<k>.svg into `dir`.
void export_graphs(const std::vector<EdgeProbability>& edges, int num_types, int num_intervals,
                   const std::string& dir);

/// Area under the ROC curve, ties counted as one half.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

struct PairedSummary {
    double mean = 0.0;
    double standard_error = 0.0;
};

/// Mean and standard error of a - b over paired runs.
PairedSummary paired_difference(const std::vector<double>& a, const std::vector<double>& b);

struct ScenarioConfig {
    std::vector<hawkes::RegimeParams> regimes;
    double horizon = 1.0;
    int num_sequences = 1;
    std::uint64_t seed = 0;
    hawkes::SimulationOptions options;
};

/// U = 4 types in two pairs, two regimes. Regime 0 plants 0 -> 1 and 2 -> 3,
/// regime 1 reverses both. Parents have base rate 0.2 and excite themselves
/// (alpha 0.6, eta 1), children have base rate 0.02 and follow their parent
/// (alpha 0.4, eta 2). Self-loops are not part of the planted graph.
ScenarioConfig regime_switch_scenario(int num_sequences, double horizon, std::uint64_t seed);

/// {"preset": "regime-switch", ...} or explicit {"regimes": [{"mu", "alpha", "eta"}], "T", ...}.
ScenarioConfig scenario_from_json(const nlohmann::json& j);

std::vector<EventSequence> simulate_scenario(const ScenarioConfig& scenario);

/// Per-regime parameters and planted adjacency.
nlohmann::json scenario_truth(const ScenarioConfig& scenario);

/// Relative paths that do not exist are looked up under $VAETPP_DATA_DIR.
std::string resolve_data_path(const std::string& path);

} // namespace vaetpp
