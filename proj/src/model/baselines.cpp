#include "vaetpp/model/baselines.hpp"

#include <cmath>

#include "vaetpp/errors.hpp"

namespace vaetpp::model {

using nn::Activation;
using nn::RowVector;
using nn::Tape;

double exponential_logpdf(double tau, double gamma) {
    if (!(gamma > 0.0)) {
        throw std::invalid_argument("exponential rate must be positive");
    }
    if (tau < 0.0) {
        throw std::domain_error("exponential density is defined for tau >= 0");
    }
    return std::log(gamma) - gamma * tau;
}

RecurrentBaseline::RecurrentBaseline(BaselineKind kind, BaselineConfig config, std::uint64_t seed)
    : kind_(kind), config_(config) {
    const int U = config_.num_types, H = config_.hidden;
    if (U < 1) {
        throw ValidationError("baseline needs at least one event type");
    }
    if (H < 1 || config_.components < 1) {
        throw ValidationError("hidden width and mixture components must be positive");
    }
    std::mt19937_64 rng(seed);
    rnn_ = nn::GruCell::create(store_, "rnn", 1 + U, H, rng);
    if (kind_ == BaselineKind::exponential) {
        rate_ = nn::Dense::create(store_, "rate", H + U, 1, Activation::identity, rng);
    } else {
        heads_ = nn::MixtureHeads::create(store_, "mixture", H + U, config_.components, rng);
    }
    time_head_ = nn::Dense::create(store_, "time", H + U, 1, Activation::identity, rng);
    type_head_ = nn::Dense::create(store_, "type", H, U, Activation::identity, rng);
}

void RecurrentBaseline::fit_normalization(const std::vector<const EventSequence*>& train) {
    norm_ = Normalizer::fit(train);
    if (kind_ == BaselineKind::exponential) {
        store_.at("rate.bias").value.setConstant(-std::log(norm_.mean_tau));
    } else {
        const int C = config_.components;
        auto& mu_bias = store_.at("mixture.mu.bias").value;
        for (int c = 0; c < C; ++c) {
            const double spread = C > 1 ? -2.0 + 4.0 * c / (C - 1) : 0.0;
            mu_bias(c, 0) = norm_.log_tau_mean + norm_.log_tau_std * spread;
        }
        store_.at("mixture.sigma.bias").value.setConstant(std::log(norm_.log_tau_std));
    }
    store_.at("time.bias").value.setConstant(norm_.mean_tau);
    Eigen::VectorXd counts = Eigen::VectorXd::Ones(config_.num_types);
    for (const auto* s : train) {
        for (const auto& e : s->events()) {
            counts(e.type) += 1.0;
        }
    }
    store_.at("type.bias").value = (counts / counts.sum()).array().log().matrix();
}

Var RecurrentBaseline::history(Tape& tape, const EventSequence& seq) const {
    const int U = config_.num_types;
    if (seq.num_types() != U) {
        throw ValidationError("sequence has " + std::to_string(seq.num_types()) + " types, model expects " +
                              std::to_string(U));
    }
    const auto gaps = per_event_gaps(seq);
    const auto& events = seq.events();
    std::vector<Var> states;
    states.reserve(events.size() + 1);
    Var h = tape.constant(Matrix::Zero(config_.hidden, 1));
    states.push_back(h);
    for (std::size_t i = 0; i < events.size(); ++i) {
        Matrix x = Matrix::Zero(1 + U, 1);
        x(0, 0) = norm_.standardize(gaps[i]);
        x(1 + events[i].type, 0) = 1.0;
        h = rnn_.step(tape, h, tape.constant(std::move(x)));
        states.push_back(h);
    }
    return nn::concat_cols(states);
}

ForwardResult RecurrentBaseline::forward(Tape& tape, const EventSequence& seq, const ForwardOptions&) const {
    const int U = config_.num_types;
    const auto N = static_cast<Eigen::Index>(seq.size());
    const auto gaps = per_event_gaps(seq);
    ForwardResult r;
    r.kl = tape.constant(Matrix::Zero(1, 1));
    r.gaps = Eigen::Map<const RowVector>(gaps.data(), N);
    for (const auto& e : seq.events()) {
        r.types.push_back(e.type);
    }
    const Var states = history(tape, seq);
    if (N == 0) {
        r.log_likelihood = tape.constant(Matrix::Zero(1, 0));
        r.time_prediction = tape.constant(Matrix::Zero(1, 0));
        r.type_logits = tape.constant(Matrix::Zero(U, 0));
        return r;
    }
    Matrix onehot = Matrix::Zero(U, N);
    std::vector<int> latest(U, 0), start(N);
    for (Eigen::Index i = 0; i < N; ++i) {
        onehot(r.types[i], i) = 1.0;
        start[i] = latest[r.types[i]];
        latest[r.types[i]] = static_cast<int>(i) + 1;
    }
    const Var before = nn::gather_cols(states, start);
    const Var input = nn::concat_rows({before, tape.constant(std::move(onehot))});
    if (kind_ == BaselineKind::exponential) {
        const Var log_rate = rate_.apply(tape, input);
        r.log_likelihood = nn::sub(log_rate, nn::mul(nn::exp(log_rate), tape.constant(r.gaps)));
    } else {
        const auto mix = heads_.apply(tape, input);
        r.log_likelihood = nn::lognormal_mixture_logpdf(mix.logits, mix.mu, mix.log_sigma, r.gaps.array().log());
    }
    r.time_prediction = time_head_.apply(tape, input);
    r.type_logits = N > 1 ? type_head_.apply(tape, nn::slice_cols(states, 1, N - 1))
                          : tape.constant(Matrix::Zero(U, 0));
    return r;
}

std::map<std::string, Matrix> RecurrentBaseline::state() const {
    auto out = store_.snapshot();
    norm_.write(out);
    return out;
}

void RecurrentBaseline::load_state(const std::map<std::string, Matrix>& tensors) {
    store_.restore(tensors);
    norm_ = Normalizer::read(tensors);
}

} // namespace vaetpp::model
