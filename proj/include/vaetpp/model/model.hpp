#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "vaetpp/events.hpp"
#include "vaetpp/nn/autodiff.hpp"
#include "vaetpp/nn/layers.hpp"

namespace vaetpp::model {

using nn::Matrix;
using nn::Var;

/// How edge latents are chosen when a forward pass needs them.
enum class LatentMode {
    sample,      // concrete sample from the posterior (hard = straight-through)
    mode,        // one-hot argmax of the posterior, no noise
    mean,        // posterior probabilities
    prior_mode,  // one-hot argmax of the prior
    fixed,       // ForwardOptions::fixed_latents
};

LatentMode latent_mode_from_string(const std::string& s);
std::string to_string(LatentMode m);

struct ForwardOptions {
    LatentMode latents = LatentMode::sample;
    double temperature = 0.5;
    bool hard = false;
    std::uint64_t noise_seed = 0;
    /// E x (K * P) matrix of edge weights, used with LatentMode::fixed.
    std::optional<Matrix> fixed_latents;
};

/// Per-sequence outputs, aligned with seq.events().
struct ForwardResult {
    Var log_likelihood;   // 1 x N, log p(tau_i) of each event's same-type gap
    Var kl;               // 1 x 1, zero for models without latents
    Var time_prediction;  // 1 x N, predicted gap for each event
    Var type_logits;      // U x (N - 1), column j scores the type of event j + 1
    Matrix gaps;          // 1 x N observed gaps
    std::vector<int> types;
};

struct LossWeights {
    double elbo = 1.0;
    double time = 1.0;
    double type = 1.0;
};

/// w_elbo * (-(sum log p - KL)) + w_time * sum (tau - tau_hat)^2 + w_type * cross entropy.
Var composite_loss(const ForwardResult& r, const LossWeights& w);

/// Common surface for VAETPP and the baselines.
class EventModel {
public:
    virtual ~EventModel() = default;

    virtual std::string name() const = 0;
    virtual int num_types() const = 0;
    virtual bool has_latent_graph() const { return false; }

    virtual nn::ParameterStore& parameters() = 0;
    virtual const nn::ParameterStore& parameters() const = 0;

    /// Sets data-dependent scales (log-gap statistics) and the output biases
    /// that depend on them. Call once on the training split before training.
    virtual void fit_normalization(const std::vector<const EventSequence*>& train) = 0;

    virtual ForwardResult forward(nn::Tape& tape, const EventSequence& seq, const ForwardOptions& opts) const = 0;

    /// Parameters plus normalization tensors ("norm.*").
    virtual std::map<std::string, Matrix> state() const = 0;
    virtual void load_state(const std::map<std::string, Matrix>& tensors) = 0;
};

/// Log-gap statistics shared by featurization and output initialization.
struct Normalizer {
    double log_tau_mean = 0.0;
    double log_tau_std = 1.0;
    double mean_tau = 1.0;

    static Normalizer fit(const std::vector<const EventSequence*>& seqs);
    double standardize(double tau) const { return (std::log(tau) - log_tau_mean) / log_tau_std; }

    void write(std::map<std::string, Matrix>& out) const;
    static Normalizer read(const std::map<std::string, Matrix>& in);
};

} // namespace vaetpp::model
