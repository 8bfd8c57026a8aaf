#include "vaetpp/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

#include "vaetpp/nn/distributions.hpp"

namespace vaetpp::nn {

namespace {

void glorot_uniform(Parameter& p, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
    std::uniform_real_distribution<double> unif(-limit, limit);
    for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
        for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
            p.value(i, j) = unif(rng);
        }
    }
}

} // namespace

Activation activation_from_string(const std::string& name) {
    if (name == "identity" || name == "linear") return Activation::identity;
    if (name == "relu") return Activation::relu;
    if (name == "elu") return Activation::elu;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "tanh") return Activation::tanh;
    if (name == "softmax") return Activation::softmax;
    if (name == "exp") return Activation::exp;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
    switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::elu: return "elu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::softmax: return "softmax";
    case Activation::exp: return "exp";
    }
    return "identity";
}

Var activate(Activation a, const Var& x) {
    switch (a) {
    case Activation::identity: return x;
    case Activation::relu: return relu(x);
    case Activation::elu: return elu(x);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::tanh: return tanh(x);
    case Activation::softmax: return softmax_cols(x);
    case Activation::exp: return exp(x);
    }
    return x;
}

Parameter& ParameterStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    auto [it, inserted] = params_.try_emplace(name);
    if (!inserted) {
        throw std::invalid_argument("duplicate parameter name '" + name + "'");
    }
    it->second.value = Matrix::Zero(rows, cols);
    it->second.zero_grad();
    return it->second;
}

Parameter& ParameterStore::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) {
        throw std::out_of_range("no parameter named '" + name + "'");
    }
    return it->second;
}

const Parameter& ParameterStore::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) {
        throw std::out_of_range("no parameter named '" + name + "'");
    }
    return it->second;
}

void ParameterStore::zero_grad() {
    for (auto& [_, p] : params_) {
        p.zero_grad();
    }
}

std::size_t ParameterStore::num_scalars() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) {
        n += static_cast<std::size_t>(p.value.size());
    }
    return n;
}

std::map<std::string, Matrix> ParameterStore::snapshot() const {
    std::map<std::string, Matrix> out;
    for (const auto& [name, p] : params_) {
        out.emplace(name, p.value);
    }
    return out;
}

void ParameterStore::restore(const std::map<std::string, Matrix>& values) {
    for (auto& [name, p] : params_) {
        auto it = values.find(name);
        if (it == values.end()) {
            throw std::invalid_argument("missing parameter '" + name + "'");
        }
        if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols()) {
            throw std::invalid_argument("shape mismatch for parameter '" + name + "'");
        }
        p.value = it->second;
    }
}

Dense Dense::create(ParameterStore& store, const std::string& name, int in, int out, Activation act,
                    std::mt19937_64& rng) {
    Dense d;
    d.weight = &store.create(name + ".weight", out, in);
    d.bias = &store.create(name + ".bias", out, 1);
    d.activation = act;
    glorot_uniform(*d.weight, rng);
    return d;
}

Var Dense::apply(Tape& tape, const Var& x) const {
    if (x.rows() != in()) {
        throw std::invalid_argument("dense layer expects " + std::to_string(in()) + " inputs, got " +
                                    std::to_string(x.rows()));
    }
    return activate(activation, add_bias(matmul(tape.param(*weight), x), tape.param(*bias)));
}

Mlp::Mlp(std::vector<Dense> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) {
        throw std::invalid_argument("an MLP needs at least one layer");
    }
    for (std::size_t i = 1; i < layers_.size(); ++i) {
        if (layers_[i].in() != layers_[i - 1].out()) {
            throw std::invalid_argument("MLP layer widths are inconsistent");
        }
    }
}

Mlp Mlp::create(ParameterStore& store, const std::string& name, int in, const std::vector<int>& widths,
                const std::vector<Activation>& activations, std::mt19937_64& rng) {
    if (widths.size() != activations.size() || widths.empty()) {
        throw std::invalid_argument("MLP needs one activation per layer");
    }
    std::vector<Dense> layers;
    int width = in;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        layers.push_back(Dense::create(store, name + "." + std::to_string(i), width, widths[i], activations[i], rng));
        width = widths[i];
    }
    return Mlp(std::move(layers));
}

Var Mlp::apply(Tape& tape, const Var& x) const {
    Var h = x;
    for (const auto& layer : layers_) {
        h = layer.apply(tape, h);
    }
    return h;
}

Matrix Mlp::apply(const Matrix& x) const {
    Tape tape(false);
    return apply(tape, tape.constant(x)).value();
}

GruCell GruCell::create(ParameterStore& store, const std::string& name, int input, int hidden,
                        std::mt19937_64& rng) {
    GruCell cell;
    cell.w_input_ = &store.create(name + ".input_weight", 3 * hidden, input);
    cell.w_gates_ = &store.create(name + ".gate_weight", 2 * hidden, hidden);
    cell.w_candidate_ = &store.create(name + ".candidate_weight", hidden, hidden);
    cell.bias_ = &store.create(name + ".bias", 3 * hidden, 1);
    glorot_uniform(*cell.w_input_, rng);
    glorot_uniform(*cell.w_gates_, rng);
    glorot_uniform(*cell.w_candidate_, rng);
    return cell;
}

Var GruCell::step(Tape& tape, const Var& state, const Var& input) const {
    const Eigen::Index h = hidden();
    if (state.rows() != h || input.rows() != this->input() || state.cols() != input.cols()) {
        throw std::invalid_argument("GRU step: state must be " + std::to_string(h) + " x c and input " +
                                    std::to_string(this->input()) + " x c");
    }
    const Var projected = add_bias(matmul(tape.param(*w_input_), input), tape.param(*bias_));
    const Var gates = sigmoid(add(slice_rows(projected, 0, 2 * h), matmul(tape.param(*w_gates_), state)));
    const Var update = slice_rows(gates, 0, h);
    const Var reset = slice_rows(gates, h, h);
    const Var candidate =
        tanh(add(slice_rows(projected, 2 * h, h), matmul(tape.param(*w_candidate_), mul(reset, state))));
    // z * h + (1 - z) * n == n + z * (h - n)
    return add(candidate, mul(update, sub(state, candidate)));
}

Matrix GruCell::step(const Matrix& state, const Matrix& input) const {
    Tape tape(false);
    return step(tape, tape.constant(state), tape.constant(input)).value();
}

MixtureHeads MixtureHeads::create(ParameterStore& store, const std::string& name, int hidden, int components,
                                  std::mt19937_64& rng) {
    MixtureHeads heads;
    heads.w_logits_ = &store.create(name + ".omega.weight", components, hidden);
    heads.b_logits_ = &store.create(name + ".omega.bias", components, 1);
    heads.w_log_sigma_ = &store.create(name + ".sigma.weight", components, hidden);
    heads.b_log_sigma_ = &store.create(name + ".sigma.bias", components, 1);
    heads.w_mu_ = &store.create(name + ".mu.weight", components, hidden);
    heads.b_mu_ = &store.create(name + ".mu.bias", components, 1);
    glorot_uniform(*heads.w_logits_, rng);
    glorot_uniform(*heads.w_log_sigma_, rng);
    glorot_uniform(*heads.w_mu_, rng);
    // Spread the initial component means so the mixture starts multi-modal.
    for (int c = 0; c < components; ++c) {
        heads.b_mu_->value(c, 0) = components > 1 ? -2.0 + 4.0 * c / (components - 1) : 0.0;
    }
    return heads;
}

MixtureHeads::Output MixtureHeads::apply(Tape& tape, const Var& h) const {
    if (h.rows() != hidden()) {
        throw std::invalid_argument("mixture heads expect " + std::to_string(hidden()) + " inputs, got " +
                                    std::to_string(h.rows()));
    }
    Output out;
    out.logits = add_bias(matmul(tape.param(*w_logits_), h), tape.param(*b_logits_));
    out.log_sigma = clamp(add_bias(matmul(tape.param(*w_log_sigma_), h), tape.param(*b_log_sigma_)), kMinLogSigma,
                          kMaxLogSigma);
    out.mu = add_bias(matmul(tape.param(*w_mu_), h), tape.param(*b_mu_));
    return out;
}

MixtureParams MixtureHeads::params(const Vector& h) const {
    Tape tape(false);
    const Output out = apply(tape, tape.constant(h));
    MixtureParams p;
    p.omega = softmax(out.logits.value().col(0));
    p.mu = out.mu.value().col(0);
    p.sigma = out.log_sigma.value().col(0).array().exp();
    return p;
}

} // namespace vaetpp::nn
