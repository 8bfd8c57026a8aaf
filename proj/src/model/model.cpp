#include "vaetpp/model/model.hpp"

#include <cmath>
#include <stdexcept>

#include "vaetpp/errors.hpp"

namespace vaetpp::model {

LatentMode latent_mode_from_string(const std::string& s) {
    if (s == "sample") return LatentMode::sample;
    if (s == "mode") return LatentMode::mode;
    if (s == "mean") return LatentMode::mean;
    if (s == "prior_mode" || s == "prior-mode") return LatentMode::prior_mode;
    if (s == "fixed") return LatentMode::fixed;
    throw ValidationError("unknown latent mode '" + s + "'");
}

std::string to_string(LatentMode m) {
    switch (m) {
    case LatentMode::sample: return "sample";
    case LatentMode::mode: return "mode";
    case LatentMode::mean: return "mean";
    case LatentMode::prior_mode: return "prior_mode";
    case LatentMode::fixed: return "fixed";
    }
    return "sample";
}

Var composite_loss(const ForwardResult& r, const LossWeights& w) {
    nn::Tape& tape = *r.log_likelihood.tape();
    Var loss = tape.constant(Matrix::Zero(1, 1));
    const auto n = r.log_likelihood.cols();
    if (w.elbo != 0.0) {
        loss = add(loss, scale(sub(r.kl, nn::sum(r.log_likelihood)), w.elbo));
    }
    if (w.time != 0.0 && n > 0) {
        loss = add(loss, scale(nn::sum(nn::square(sub(r.time_prediction, tape.constant(r.gaps)))), w.time));
    }
    if (w.type != 0.0 && n > 1) {
        Matrix target = Matrix::Zero(r.type_logits.rows(), n - 1);
        for (Eigen::Index j = 1; j < n; ++j) {
            target(r.types[j], j - 1) = 1.0;
        }
        const Var ce = nn::sum(mul(nn::log_softmax_cols(r.type_logits), tape.constant(std::move(target))));
        loss = sub(loss, scale(ce, w.type));
    }
    return loss;
}

Normalizer Normalizer::fit(const std::vector<const EventSequence*>& seqs) {
    double sum = 0.0, sum_sq = 0.0, sum_tau = 0.0;
    std::size_t n = 0;
    for (const auto* s : seqs) {
        for (double tau : per_event_gaps(*s)) {
            const double y = std::log(tau);
            sum += y;
            sum_sq += y * y;
            sum_tau += tau;
            ++n;
        }
    }
    Normalizer out;
    if (n == 0) {
        return out;
    }
    out.log_tau_mean = sum / n;
    out.log_tau_std = std::max(1e-3, std::sqrt(std::max(0.0, sum_sq / n - out.log_tau_mean * out.log_tau_mean)));
    out.mean_tau = sum_tau / n;
    return out;
}

void Normalizer::write(std::map<std::string, Matrix>& out) const {
    out["norm.log_tau_mean"] = Matrix::Constant(1, 1, log_tau_mean);
    out["norm.log_tau_std"] = Matrix::Constant(1, 1, log_tau_std);
    out["norm.mean_tau"] = Matrix::Constant(1, 1, mean_tau);
}

Normalizer Normalizer::read(const std::map<std::string, Matrix>& in) {
    auto get = [&](const char* key) {
        auto it = in.find(key);
        if (it == in.end() || it->second.size() != 1) {
            throw ValidationError(std::string("checkpoint lacks '") + key + "'");
        }
        return it->second(0, 0);
    };
    Normalizer n;
    n.log_tau_mean = get("norm.log_tau_mean");
    n.log_tau_std = get("norm.log_tau_std");
    n.mean_tau = get("norm.mean_tau");
    return n;
}

} // namespace vaetpp::model
