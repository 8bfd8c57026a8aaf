#include "vaetpp/hawkes.hpp"

#include <cmath>
#include <random>

#include "vaetpp/errors.hpp"

namespace vaetpp::hawkes {

void RegimeParams::validate() const {
    const auto u = mu.size();
    if (u == 0) {
        throw ValidationError("Hawkes regime needs at least one type");
    }
    if (alpha.rows() != u || alpha.cols() != u || eta.rows() != u || eta.cols() != u) {
        throw ValidationError("alpha and eta must be U x U with U = size of mu");
    }
    if (!mu.allFinite() || (mu.array() < 0.0).any()) {
        throw ValidationError("base rates mu must be finite and non-negative");
    }
    if (!alpha.allFinite() || (alpha.array() < 0.0).any()) {
        throw ValidationError("excitations alpha must be finite and non-negative");
    }
    if (!eta.allFinite() || (eta.array() <= 0.0).any()) {
        throw ValidationError("decay constants eta must be finite and positive");
    }
}

StationarityReport check_stationarity(const RegimeParams& params) {
    return check_stationarity(std::vector<RegimeParams>{params});
}

StationarityReport check_stationarity(const std::vector<RegimeParams>& regimes) {
    StationarityReport report;
    for (int k = 0; k < static_cast<int>(regimes.size()); ++k) {
        const auto& r = regimes[k];
        for (int v = 0; v < r.alpha.rows(); ++v) {
            for (int u = 0; u < r.alpha.cols(); ++u) {
                const double prod = r.alpha(v, u) * r.eta(v, u);
                if (!(prod < 1.0)) {
                    report.stationary = false;
                    report.offending.push_back({k, v, u, prod});
                }
            }
        }
    }
    return report;
}

PiecewiseHawkes::PiecewiseHawkes(std::vector<RegimeParams> regimes, double horizon)
    : regimes_(std::move(regimes)), partition_(horizon, std::max<int>(1, static_cast<int>(regimes_.size()))) {
    if (regimes_.empty()) {
        throw ValidationError("at least one Hawkes regime is required");
    }
    for (const auto& r : regimes_) {
        r.validate();
        if (r.num_types() != regimes_.front().num_types()) {
            throw ValidationError("all regimes must share the same number of types");
        }
    }
}

double PiecewiseHawkes::intensity(const EventSequence& history, double t, int v) const {
    if (v < 0 || v >= num_types()) {
        throw ValidationError("type id out of range");
    }
    const RegimeParams& now = regimes_[partition_.interval_of(t)];
    double lambda = now.mu(v);
    for (const auto& e : history.events()) {
        if (e.t > t) {
            throw ValidationError("history contains an event after the evaluation time");
        }
        if (e.t == t) {
            continue;
        }
        const RegimeParams& origin = regimes_[partition_.interval_of(e.t)];
        lambda += origin.alpha(v, e.type) * std::exp(-(t - e.t) / origin.eta(v, e.type));
    }
    return lambda;
}

namespace {

// Excitation accumulators, one U x U block per regime of origin:
// state[k](v,u) = sum over events of type u in regime k of alpha_k(v,u) exp(-(t - t_j)/eta_k(v,u)).
class ExcitationState {
public:
    explicit ExcitationState(const std::vector<RegimeParams>& regimes) : regimes_(regimes) {
        for (const auto& r : regimes_) {
            state_.push_back(Eigen::MatrixXd::Zero(r.num_types(), r.num_types()));
        }
    }

    // Integral of the excitation part over the next dt, summed over all v, u.
    double integrate(double dt) const {
        double total = 0.0;
        for (std::size_t k = 0; k < state_.size(); ++k) {
            const auto& eta = regimes_[k].eta;
            total += (state_[k].array() * eta.array() * (1.0 - (-dt / eta.array()).exp())).sum();
        }
        return total;
    }

    void decay(double dt) {
        if (dt <= 0.0) {
            return;
        }
        for (std::size_t k = 0; k < state_.size(); ++k) {
            state_[k].array() *= (-dt / regimes_[k].eta.array()).exp();
        }
    }

    void excite(int regime, int type) { state_[regime].col(type) += regimes_[regime].alpha.col(type); }

    Eigen::VectorXd excitation() const {
        Eigen::VectorXd total = Eigen::VectorXd::Zero(state_.front().rows());
        for (const auto& s : state_) {
            total += s.rowwise().sum();
        }
        return total;
    }

private:
    const std::vector<RegimeParams>& regimes_;
    std::vector<Eigen::MatrixXd> state_;
};

} // namespace

std::vector<double> PiecewiseHawkes::compensator_increments(const EventSequence& seq) const {
    ExcitationState state(regimes_);
    std::vector<double> out;
    out.reserve(seq.size());
    double t = 0.0;
    int k = 0;
    for (const auto& e : seq.events()) {
        double increment = 0.0;
        while (k < num_regimes() - 1 && e.t >= partition_.upper(k)) {
            const double dt = partition_.upper(k) - t;
            increment += regimes_[k].mu.sum() * dt + state.integrate(dt);
            state.decay(dt);
            t = partition_.upper(k);
            ++k;
        }
        const double dt = e.t - t;
        increment += regimes_[k].mu.sum() * dt + state.integrate(dt);
        state.decay(dt);
        t = e.t;
        state.excite(k, e.type);
        out.push_back(increment);
    }
    return out;
}

std::vector<Eigen::MatrixXi> PiecewiseHawkes::planted_graph() const {
    std::vector<Eigen::MatrixXi> out;
    for (const auto& r : regimes_) {
        out.push_back((r.alpha.array() > 0.0).cast<int>());
    }
    return out;
}

EventSequence simulate(const PiecewiseHawkes& process, std::uint64_t seed, const SimulationOptions& options,
                       std::string seq_id) {
    if (options.enforce_stationarity) {
        const auto report = check_stationarity(process.regimes());
        if (!report.stationary) {
            const auto& p = report.offending.front();
            throw ValidationError("non-stationary parameters: regime " + std::to_string(p.regime) + " pair (" +
                                  std::to_string(p.v) + "," + std::to_string(p.u) +
                                  ") has alpha*eta = " + std::to_string(p.alpha_eta));
        }
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto& partition = process.partition();
    const int num_regimes = process.num_regimes();

    ExcitationState state(process.regimes());
    std::vector<Event> events;
    double t = 0.0;
    int k = 0;
    while (k < num_regimes) {
        const double boundary = partition.upper(k);
        // Kernels only decay between events, so the current total intensity
        // bounds the intensity until the next event or regime boundary.
        const double bound = process.regime(k).mu.sum() + state.excitation().sum();
        const double candidate =
            bound > 0.0 ? t - std::log1p(-unif(rng)) / bound : std::numeric_limits<double>::infinity();
        if (candidate >= boundary) {
            state.decay(boundary - t);
            t = boundary;
            ++k;
            continue;
        }
        state.decay(candidate - t);
        t = candidate;
        const Eigen::VectorXd lambda = process.regime(k).mu + state.excitation();
        const double total = lambda.sum();
        if (unif(rng) * bound > total) {
            continue;
        }
        const double pick = unif(rng) * total;
        int type = 0;
        double cumulative = lambda(0);
        while (type + 1 < lambda.size() && pick > cumulative) {
            ++type;
            cumulative += lambda(type);
        }
        events.push_back(Event{t, type, std::nullopt});
        state.excite(k, type);
        if (events.size() > options.max_events) {
            throw EventCapExceeded("simulation exceeded " + std::to_string(options.max_events) +
                                   " events before t = " + std::to_string(t) + " (near-critical parameters?)");
        }
    }
    return EventSequence(std::move(seq_id), process.num_types(), process.horizon(), std::move(events));
}

} // namespace vaetpp::hawkes
