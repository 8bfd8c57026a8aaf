#include "vaetpp/nn/adam.hpp"

#include <cmath>

namespace vaetpp::nn {

Adam::Adam(ParameterStore& store, AdamOptions options) : store_(store), options_(options) {
    for (const auto& [name, p] : store_.items()) {
        m_.emplace(name, Matrix::Zero(p.value.rows(), p.value.cols()));
        v_.emplace(name, Matrix::Zero(p.value.rows(), p.value.cols()));
    }
}

double Adam::step() {
    double sq = 0.0;
    for (const auto& [_, p] : store_.items()) {
        if (p.grad.size() != 0) {
            sq += p.grad.squaredNorm();
        }
    }
    const double norm = std::sqrt(sq);
    const double factor =
        (options_.clip_norm > 0.0 && norm > options_.clip_norm) ? options_.clip_norm / norm : 1.0;

    ++t_;
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
    for (auto& [name, p] : store_.items()) {
        if (p.grad.size() == 0) {
            continue;
        }
        Matrix& m = m_.at(name);
        Matrix& v = v_.at(name);
        const Matrix g = p.grad * factor;
        m = options_.beta1 * m + (1.0 - options_.beta1) * g;
        v = options_.beta2 * v + (1.0 - options_.beta2) * g.cwiseAbs2();
        p.value.array() -= options_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + options_.epsilon);
    }
    return norm;
}

} // namespace vaetpp::nn
