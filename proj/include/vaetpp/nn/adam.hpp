#pragma once

#include <map>
#include <string>

#include "vaetpp/nn/layers.hpp"

namespace vaetpp::nn {

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    /// Global L2 norm cap on the gradient; <= 0 disables clipping.
    double clip_norm = 0.0;
};

/// Adaptive-moment optimizer over every parameter in a store.
class Adam {
public:
    explicit Adam(ParameterStore& store, AdamOptions options = {});

    /// Applies one update from the accumulated Parameter::grad values, then
    /// returns the (pre-clipping) global gradient norm.
    double step();
    long steps() const { return t_; }

private:
    ParameterStore& store_;
    AdamOptions options_;
    std::map<std::string, Matrix> m_;
    std::map<std::string, Matrix> v_;
    long t_ = 0;
};

} // namespace vaetpp::nn
