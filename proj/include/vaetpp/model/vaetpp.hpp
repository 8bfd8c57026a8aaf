#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "vaetpp/model/model.hpp"

namespace vaetpp::model {

struct VaeTppConfig {
    int num_types = 0;       // U
    int num_intervals = 1;   // K
    int embed_dim = 64;      // D
    int hidden = 64;         // encoder MLP and RNN width
    int decoder_hidden = 64; // GRNN state width
    int components = 16;     // C
    int edge_types = 2;      // E, type 0 = no dependency
    int num_marks = 0;       // optional categorical marks, 0 = unused
    /// Output biases of the prior and posterior heads start at this P[edge != 0].
    double initial_edge_probability = 0.5;

    void validate() const;
};

/// Encoder node features at every event timestamp, F x (L * U); column
/// i * U + v describes type v just after event i:
///   [standardized log gap of v's latest event, log1p(time since it / mean gap),
///    v has fired, v fired at event i, one-hot(v), one-hot(mark of v's latest event)]
Matrix encoder_features(const EventSequence& seq, const Normalizer& norm, int num_marks);
int encoder_feature_width(int num_types, int num_marks);

/// Decoder GRU inputs besides messages, (2 + 2U) x U, for an event of type
/// `fired` with standardized gap `std_gap`:
///   [v == fired, std_gap, one-hot(fired), one-hot(v)]
Matrix decoder_event_inputs(int num_types, int fired, double std_gap);

struct EncoderOutput {
    Var embeddings;        // D x (L * U), empty for L = 0
    Var relations;         // H x (L * P), per-timestamp pair embeddings
    Var interval_states;   // H x (K * P), f_emb2 of the pooled relations
    Var forward_states;    // H x (K * P)
    Var backward_states;   // H x (K * P)
    Var prior_logits;      // E x (K * P)
    Var posterior_logits;  // E x (K * P)
};

struct DecoderOutput {
    Var log_likelihood;   // 1 x N
    Var time_prediction;  // 1 x N
    Var type_logits;      // U x (N - 1)
    Var final_state;      // Hd x U, after the last event
    Var type_states;      // Hd x U, each type just after its own latest event (zeros if none)
    Var mixture_logits;   // C x N
    Var mixture_mu;       // C x N
    Var mixture_log_sigma;
};

struct ElboReport {
    double elbo = 0.0;
    double reconstruction = 0.0;
    double kl = 0.0;
    std::vector<double> kl_per_interval;
};

struct NextEventPrediction {
    Eigen::VectorXd density_time;  // t_last^u + E[tau], per type
    Eigen::VectorXd point_time;    // t_last^u + linear predictor, per type
    Eigen::VectorXd type_probs;    // next event type distribution
    int predicted_type = 0;        // argmax, ties to the smaller id
};

/// Variational auto-encoder point process with per-interval latent graphs.
/// Latent columns are ordered k * P + p, where pair p = (v, u) with v != u
/// enumerates receivers v, then senders u; z_(v,u) gates u's influence on v.
class VaeTpp : public EventModel {
public:
    /// static_graph forces a single interval (the static ablation).
    VaeTpp(VaeTppConfig config, std::uint64_t seed, bool static_graph = false);

    std::string name() const override { return static_ ? "vaetpp-static" : "vaetpp"; }
    int num_types() const override { return config_.num_types; }
    bool has_latent_graph() const override { return true; }
    const VaeTppConfig& config() const { return config_; }
    int num_intervals() const { return config_.num_intervals; }
    int num_pairs() const { return static_cast<int>(pairs_.size()); }
    const std::vector<std::pair<int, int>>& pairs() const { return pairs_; }
    int pair_index(int v, int u) const;

    nn::ParameterStore& parameters() override { return store_; }
    const nn::ParameterStore& parameters() const override { return store_; }
    const Normalizer& normalizer() const { return norm_; }
    void set_normalizer(const Normalizer& n) { norm_ = n; }
    void fit_normalization(const std::vector<const EventSequence*>& train) override;

    EncoderOutput encode(nn::Tape& tape, const EventSequence& seq) const;
    /// z: E x (K * P) edge weights (rows on the simplex).
    DecoderOutput decode(nn::Tape& tape, const EventSequence& seq, const Var& z) const;
    /// Latents for the requested mode, from an encoder output.
    Var latents(nn::Tape& tape, const EncoderOutput& enc, const ForwardOptions& opts) const;

    ForwardResult forward(nn::Tape& tape, const EventSequence& seq, const ForwardOptions& opts) const override;

    /// Monte Carlo ELBO with `num_samples` latent draws (seeds opts.noise_seed + s).
    ElboReport elbo(const EventSequence& seq, const ForwardOptions& opts, int num_samples = 1) const;

    /// Prediction after observing `prefix`; latents follow opts (posterior
    /// modes use the prefix only).
    NextEventPrediction predict_next(const EventSequence& prefix, const ForwardOptions& opts) const;

    /// K x P posterior probabilities that the edge is present (type != 0).
    Matrix edge_probabilities(const EventSequence& seq) const;
    Matrix prior_edge_probabilities(const EventSequence& seq) const;

    /// Relabels types: new id of old type t is perm[t]. Parameters tied to
    /// type identities are permuted so the relabelled model computes the
    /// same function on relabelled data.
    void permute_types(const std::vector<int>& perm);

    std::map<std::string, Matrix> state() const override;
    void load_state(const std::map<std::string, Matrix>& tensors) override;

private:
    VaeTppConfig config_;
    bool static_;
    std::vector<std::pair<int, int>> pairs_;
    Normalizer norm_;
    nn::ParameterStore store_;

    nn::Mlp embed_, f_emb1_, f_e1_, f_v1_, f_e2_, f_emb2_;
    nn::GruCell rnn_fwd_, rnn_bwd_;
    nn::Mlp prior_head_, enc_head_;
    std::vector<nn::Mlp> edge_mlps_;  // one per edge type >= 1
    nn::GruCell gru_;
    nn::MixtureHeads heads_;
    nn::Dense time_head_, type_head_;
};

} // namespace vaetpp::model
