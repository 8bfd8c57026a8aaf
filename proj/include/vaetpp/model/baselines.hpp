#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "vaetpp/model/model.hpp"

namespace vaetpp::model {

/// gamma * exp(-gamma * tau)
double exponential_logpdf(double tau, double gamma);

enum class BaselineKind { exponential, lognormmix };

struct BaselineConfig {
    int num_types = 0;
    int hidden = 64;
    int components = 16;  // lognormmix only
};

/// Graph-free recurrent baseline. A GRU runs over the pooled event stream with
/// inputs [standardized log same-type gap, one-hot(type)]. The gap of event i
/// (type u) is scored from [h; one-hot(u)], h being the state right after the
/// previous type-u event (zero before it), by either a constant-intensity
/// exponential head, gamma = exp(v^T h + b), or a log-normal mixture head.
class RecurrentBaseline : public EventModel {
public:
    RecurrentBaseline(BaselineKind kind, BaselineConfig config, std::uint64_t seed);

    std::string name() const override { return kind_ == BaselineKind::exponential ? "exponential" : "lognormmix"; }
    int num_types() const override { return config_.num_types; }
    BaselineKind kind() const { return kind_; }
    const BaselineConfig& config() const { return config_; }

    nn::ParameterStore& parameters() override { return store_; }
    const nn::ParameterStore& parameters() const override { return store_; }
    const Normalizer& normalizer() const { return norm_; }
    void fit_normalization(const std::vector<const EventSequence*>& train) override;

    /// Hidden states h_{-1} = 0, h_0, ..., h_{N-1}: H x (N + 1).
    Var history(nn::Tape& tape, const EventSequence& seq) const;

    ForwardResult forward(nn::Tape& tape, const EventSequence& seq, const ForwardOptions& opts) const override;

    std::map<std::string, Matrix> state() const override;
    void load_state(const std::map<std::string, Matrix>& tensors) override;

private:
    BaselineKind kind_;
    BaselineConfig config_;
    Normalizer norm_;
    nn::ParameterStore store_;
    nn::GruCell rnn_;
    nn::Dense rate_;             // exponential
    nn::MixtureHeads heads_;     // lognormmix
    nn::Dense time_head_, type_head_;
};

} // namespace vaetpp::model
