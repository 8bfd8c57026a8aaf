#pragma once

#include <cstdint>
#include <random>

#include "vaetpp/nn/autodiff.hpp"

namespace vaetpp::nn {

/// Parameters of sum_c omega_c LogNormal(mu_c, sigma_c).
struct MixtureParams {
    Vector omega;
    Vector mu;
    Vector sigma;

    Eigen::Index size() const { return omega.size(); }
    /// Throws std::invalid_argument unless omega is on the simplex (1e-6) and sigma > 0.
    void validate() const;
};

/// log p(tau); throws std::domain_error for tau <= 0.
double lognormal_mixture_logpdf(double tau, const MixtureParams& params);
/// sum_c omega_c exp(mu_c + sigma_c^2 / 2)
double lognormal_mixture_mean(const MixtureParams& params);
double sample_lognormal_mixture(const MixtureParams& params, std::mt19937_64& rng);

/// KL(softmax(q) || softmax(p)), log-sum-exp stabilized.
double categorical_kl(const Vector& q_logits, const Vector& p_logits);

Vector softmax(const Vector& logits);

struct ConcreteSample {
    Vector value;
    double temperature;
};

/// Standard Gumbel draws, -log(-log U).
Matrix gumbel_noise(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

/// softmax((logits + g) / temperature); throws std::invalid_argument if temperature <= 0.
ConcreteSample gumbel_softmax_sample(const Vector& logits, double temperature, std::mt19937_64& rng);
ConcreteSample gumbel_softmax_sample(const Vector& logits, double temperature, std::uint64_t seed);

/// Reparameterized relaxed sample on a tape, column-wise. With `hard` the
/// forward value is the one-hot argmax and gradients pass straight through.
Var gumbel_softmax(const Var& logits, const Matrix& noise, double temperature, bool hard);

} // namespace vaetpp::nn
