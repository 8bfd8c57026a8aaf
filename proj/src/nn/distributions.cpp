#include "vaetpp/nn/distributions.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vaetpp::nn {

void MixtureParams::validate() const {
    if (omega.size() == 0 || mu.size() != omega.size() || sigma.size() != omega.size()) {
        throw std::invalid_argument("mixture parameters must share one non-zero component count");
    }
    if ((omega.array() < 0.0).any() || std::abs(omega.sum() - 1.0) > 1e-6) {
        throw std::invalid_argument("mixture weights must lie on the simplex");
    }
    if (!(sigma.array() > 0.0).all()) {
        throw std::invalid_argument("mixture scales must be positive");
    }
}

double lognormal_mixture_logpdf(double tau, const MixtureParams& params) {
    if (!(tau > 0.0)) {
        throw std::domain_error("log-normal density needs tau > 0");
    }
    const double y = std::log(tau);
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    const Eigen::ArrayXd d = (y - params.mu.array()) / params.sigma.array();
    const Eigen::ArrayXd comp =
        params.omega.array().log() - params.sigma.array().log() - half_log_2pi - y - 0.5 * d.square();
    const double m = comp.maxCoeff();
    return m + std::log((comp - m).exp().sum());
}

double lognormal_mixture_mean(const MixtureParams& params) {
    return (params.omega.array() * (params.mu.array() + 0.5 * params.sigma.array().square()).exp()).sum();
}

double sample_lognormal_mixture(const MixtureParams& params, std::mt19937_64& rng) {
    std::discrete_distribution<int> pick(params.omega.data(), params.omega.data() + params.omega.size());
    const int c = pick(rng);
    std::lognormal_distribution<double> draw(params.mu(c), params.sigma(c));
    return draw(rng);
}

Vector softmax(const Vector& logits) {
    const double m = logits.maxCoeff();
    Vector p = (logits.array() - m).exp();
    return p / p.sum();
}

double categorical_kl(const Vector& q_logits, const Vector& p_logits) {
    if (q_logits.size() != p_logits.size()) {
        throw std::invalid_argument("categorical_kl: logit vectors differ in length");
    }
    const auto log_normalize = [](const Vector& x) {
        const double m = x.maxCoeff();
        return Vector(x.array() - (m + std::log((x.array() - m).exp().sum())));
    };
    const Vector lq = log_normalize(q_logits);
    const Vector lp = log_normalize(p_logits);
    return std::max(0.0, (lq.array().exp() * (lq - lp).array()).sum());
}

Matrix gumbel_noise(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Matrix g(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            double u = unif(rng);
            while (u <= 0.0) {
                u = unif(rng);
            }
            g(i, j) = -std::log(-std::log(u));
        }
    }
    return g;
}

ConcreteSample gumbel_softmax_sample(const Vector& logits, double temperature, std::mt19937_64& rng) {
    if (!(temperature > 0.0)) {
        throw std::invalid_argument("Gumbel-softmax temperature must be positive");
    }
    const Matrix g = gumbel_noise(logits.size(), 1, rng);
    return ConcreteSample{softmax((logits + g.col(0)) / temperature), temperature};
}

ConcreteSample gumbel_softmax_sample(const Vector& logits, double temperature, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return gumbel_softmax_sample(logits, temperature, rng);
}

Var gumbel_softmax(const Var& logits, const Matrix& noise, double temperature, bool hard) {
    if (!(temperature > 0.0)) {
        throw std::invalid_argument("Gumbel-softmax temperature must be positive");
    }
    if (noise.rows() != logits.rows() || noise.cols() != logits.cols()) {
        throw std::invalid_argument("Gumbel noise must match the logits shape");
    }
    Tape& tape = *logits.tape();
    const Var soft = softmax_cols(scale(add(logits, tape.constant(noise)), 1.0 / temperature));
    return hard ? straight_through_hard(soft) : soft;
}

} // namespace vaetpp::nn
