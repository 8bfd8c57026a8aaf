#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "vaetpp/nn/autodiff.hpp"

namespace vaetpp::nn {

enum class Activation { identity, relu, elu, sigmoid, tanh, softmax, exp };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);
Var activate(Activation a, const Var& x);

/// Owns named parameters. Addresses are stable for the lifetime of the store
/// (including across moves), so layers keep raw pointers into it.
class ParameterStore {
public:
    ParameterStore() = default;
    ParameterStore(const ParameterStore&) = delete;
    ParameterStore& operator=(const ParameterStore&) = delete;
    ParameterStore(ParameterStore&&) = default;
    ParameterStore& operator=(ParameterStore&&) = default;

    Parameter& create(const std::string& name, Eigen::Index rows, Eigen::Index cols);
    Parameter& at(const std::string& name);
    const Parameter& at(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    std::map<std::string, Parameter>& items() { return params_; }
    const std::map<std::string, Parameter>& items() const { return params_; }

    void zero_grad();
    std::size_t num_scalars() const;

    std::map<std::string, Matrix> snapshot() const;
    /// Every stored parameter must be present in `values` with a matching shape.
    void restore(const std::map<std::string, Matrix>& values);

private:
    std::map<std::string, Parameter> params_;
};

/// y = act(W x + b), applied column-wise.
struct Dense {
    Parameter* weight = nullptr;
    Parameter* bias = nullptr;
    Activation activation = Activation::identity;

    static Dense create(ParameterStore& store, const std::string& name, int in, int out, Activation act,
                        std::mt19937_64& rng);

    Eigen::Index in() const { return weight->value.cols(); }
    Eigen::Index out() const { return weight->value.rows(); }
    Var apply(Tape& tape, const Var& x) const;
};

/// Stack of Dense layers; widths[i] is the output width of layer i.
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(std::vector<Dense> layers);

    static Mlp create(ParameterStore& store, const std::string& name, int in, const std::vector<int>& widths,
                      const std::vector<Activation>& activations, std::mt19937_64& rng);

    Eigen::Index in() const { return layers_.front().in(); }
    Eigen::Index out() const { return layers_.back().out(); }
    const std::vector<Dense>& layers() const { return layers_; }

    Var apply(Tape& tape, const Var& x) const;
    Matrix apply(const Matrix& x) const;

private:
    std::vector<Dense> layers_;
};

/// Gated recurrent cell:
///   z = sigmoid(Wz x + Uz h + bz), r = sigmoid(Wr x + Ur h + br)
///   n = tanh(Wn x + Un (r * h) + bn),  h' = z * h + (1 - z) * n
/// Input weights and bias stack the blocks as [z; r; n].
class GruCell {
public:
    static GruCell create(ParameterStore& store, const std::string& name, int input, int hidden,
                          std::mt19937_64& rng);

    Eigen::Index hidden() const { return w_candidate_->value.rows(); }
    Eigen::Index input() const { return w_input_->value.cols(); }

    Parameter& input_weights() { return *w_input_; }
    Parameter& gate_weights() { return *w_gates_; }
    Parameter& candidate_weights() { return *w_candidate_; }
    Parameter& bias() { return *bias_; }

    /// state: H x c, input: I x c.
    Var step(Tape& tape, const Var& state, const Var& input) const;
    Matrix step(const Matrix& state, const Matrix& input) const;

private:
    Parameter* w_input_ = nullptr;      // 3H x I
    Parameter* w_gates_ = nullptr;      // 2H x H
    Parameter* w_candidate_ = nullptr;  // H x H
    Parameter* bias_ = nullptr;         // 3H x 1
};

struct MixtureParams;

/// Log-normal mixture parameter heads:
///   omega = softmax(V_w h + b_w), sigma = exp(V_s h + b_s), mu = V_m h + b_m
/// log sigma is clamped to [log 1e-3, log 1e3].
class MixtureHeads {
public:
    static constexpr double kMinLogSigma = -6.907755278982137;  // log(1e-3)
    static constexpr double kMaxLogSigma = 6.907755278982137;   // log(1e3)

    struct Output {
        Var logits;
        Var mu;
        Var log_sigma;
    };

    static MixtureHeads create(ParameterStore& store, const std::string& name, int hidden, int components,
                               std::mt19937_64& rng);

    Eigen::Index components() const { return w_logits_->value.rows(); }
    Eigen::Index hidden() const { return w_logits_->value.cols(); }

    Output apply(Tape& tape, const Var& h) const;
    MixtureParams params(const Vector& h) const;

private:
    Parameter *w_logits_ = nullptr, *b_logits_ = nullptr;
    Parameter *w_log_sigma_ = nullptr, *b_log_sigma_ = nullptr;
    Parameter *w_mu_ = nullptr, *b_mu_ = nullptr;
};

} // namespace vaetpp::nn
