#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vaetpp/events.hpp"

namespace vaetpp::hawkes {

/// Exponential-kernel multivariate Hawkes parameters for one regime:
///   lambda_v(t) = mu_v + sum_u sum_{t_j^u < t} alpha(v,u) exp(-(t - t_j^u) / eta(v,u))
/// alpha(v,u) is the jump in type v's intensity caused by an event of type u.
struct RegimeParams {
    Eigen::VectorXd mu;
    Eigen::MatrixXd alpha;
    Eigen::MatrixXd eta;

    int num_types() const { return static_cast<int>(mu.size()); }
    void validate() const;
};

struct OffendingPair {
    int regime;
    int v;
    int u;
    double alpha_eta;
};

struct StationarityReport {
    bool stationary = true;
    std::vector<OffendingPair> offending;
};

StationarityReport check_stationarity(const RegimeParams& params);
StationarityReport check_stationarity(const std::vector<RegimeParams>& regimes);

/// Piecewise-constant Hawkes process: regime k governs [t_k^L, t_k^R).
/// An event keeps the alpha/eta of the regime in which it occurred; the base
/// rate always follows the regime of the evaluation time.
class PiecewiseHawkes {
public:
    PiecewiseHawkes(std::vector<RegimeParams> regimes, double horizon);

    int num_types() const { return regimes_.front().num_types(); }
    int num_regimes() const { return static_cast<int>(regimes_.size()); }
    double horizon() const { return partition_.boundaries().back(); }
    const SubIntervalPartition& partition() const { return partition_; }
    const std::vector<RegimeParams>& regimes() const { return regimes_; }
    const RegimeParams& regime(int k) const { return regimes_.at(k); }

    /// Left-continuous conditional intensity of type v at t (events at exactly
    /// t are not counted). Throws if the history contains an event after t.
    double intensity(const EventSequence& history, double t, int v) const;

    /// Pooled compensator increments Lambda(t_{i-1}, t_i] between consecutive
    /// events (the first from t = 0), by closed-form kernel integration.
    std::vector<double> compensator_increments(const EventSequence& seq) const;

    /// Per regime: U x U 0/1 matrix with a(v,u) = 1 iff alpha(v,u) > 0.
    std::vector<Eigen::MatrixXi> planted_graph() const;

private:
    std::vector<RegimeParams> regimes_;
    SubIntervalPartition partition_;
};

struct SimulationOptions {
    bool enforce_stationarity = true;
    std::size_t max_events = 1'000'000;
};

class EventCapExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Ogata thinning. Deterministic in `seed`.
EventSequence simulate(const PiecewiseHawkes& process, std::uint64_t seed, const SimulationOptions& options = {},
                       std::string seq_id = "sim-0");

} // namespace vaetpp::hawkes
