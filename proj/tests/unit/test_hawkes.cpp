#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "vaetpp/errors.hpp"
#include "vaetpp/hawkes.hpp"

using namespace vaetpp;
using namespace vaetpp::hawkes;

namespace {

RegimeParams make_regime(const Eigen::VectorXd& mu, const Eigen::MatrixXd& alpha, double eta) {
    RegimeParams p;
    p.mu = mu;
    p.alpha = alpha;
    p.eta = Eigen::MatrixXd::Constant(alpha.rows(), alpha.cols(), eta);
    return p;
}

RegimeParams scalar_regime(double mu, double alpha, double eta) {
    return make_regime(Eigen::VectorXd::Constant(1, mu), Eigen::MatrixXd::Constant(1, 1, alpha), eta);
}

// straight transcription of the intensity sum, no shared code with the library
double naive_intensity(const std::vector<RegimeParams>& regimes, double horizon, const EventSequence& seq, double t,
                       int v) {
    const int K = static_cast<int>(regimes.size());
    auto regime_of = [&](double s) { return std::min(K - 1, static_cast<int>(std::floor(s / (horizon / K)))); };
    double lambda = regimes[regime_of(t)].mu(v);
    for (const auto& e : seq.events()) {
        if (e.t < t) {
            const auto& r = regimes[regime_of(e.t)];
            lambda += r.alpha(v, e.type) * std::exp(-(t - e.t) / r.eta(v, e.type));
        }
    }
    return lambda;
}

std::vector<RegimeParams> three_type_regime() {
    Eigen::MatrixXd alpha(3, 3);
    alpha << 0.3, 0.0, 0.4,
             0.5, 0.2, 0.0,
             0.0, 0.6, 0.1;
    RegimeParams p = make_regime(Eigen::Vector3d(0.4, 0.3, 0.5), alpha, 1.0);
    p.eta(1, 0) = 0.5;
    p.eta(2, 1) = 1.2;
    return {p};
}

} // namespace

TEST_CASE("intensity with empty history is the base rate") {
    const PiecewiseHawkes proc({scalar_regime(0.5, 0.8, 1.0)}, 10.0);
    CHECK(proc.intensity(EventSequence("h", 1, 10.0, {}), 3.0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("intensity after one event") {
    const PiecewiseHawkes proc({scalar_regime(0.5, 0.8, 1.0)}, 10.0);
    const EventSequence h("h", 1, 10.0, {{1.0, 0, {}}});
    CHECK(std::abs(proc.intensity(h, 2.0, 0) - (0.5 + 0.8 * std::exp(-1.0))) < 1e-12);
    CHECK(std::abs(proc.intensity(h, 2.0, 0) - 0.79430) < 1e-5);
}

TEST_CASE("without excitation the intensity is constant") {
    const PiecewiseHawkes proc({scalar_regime(0.7, 0.0, 1.0)}, 10.0);
    const EventSequence h("h", 1, 10.0, {{1.0, 0, {}}, {2.0, 0, {}}, {2.5, 0, {}}});
    for (double t : {2.5, 3.0, 7.1, 10.0}) {
        CHECK(proc.intensity(h, t, 0) == 0.7);
    }
}

TEST_CASE("intensity refuses histories beyond t") {
    const PiecewiseHawkes proc({scalar_regime(0.5, 0.8, 1.0)}, 10.0);
    const EventSequence h("h", 1, 10.0, {{4.0, 0, {}}});
    CHECK_THROWS_AS(proc.intensity(h, 3.0, 0), ValidationError);
}

TEST_CASE("intensity jumps by alpha at each event and is continuous elsewhere") {
    Eigen::MatrixXd alpha(2, 2);
    alpha << 0.2, 0.7, 0.0, 0.4;
    const auto regimes = std::vector<RegimeParams>{make_regime(Eigen::Vector2d(0.3, 0.1), alpha, 0.8)};
    const PiecewiseHawkes proc(regimes, 10.0);
    const EventSequence h("h", 2, 10.0, {{1.0, 1, {}}, {2.0, 0, {}}, {3.5, 1, {}}});
    const double eps = 1e-12;
    for (const auto& e : h.events()) {
        for (int v = 0; v < 2; ++v) {
            const auto past = h.prefix_before(e.t + eps);
            const double left = proc.intensity(past, e.t, v);
            const double right = proc.intensity(past, e.t + eps, v);
            CHECK(std::abs(right - left - alpha(v, e.type)) < 1e-9);
        }
    }
    for (double t : {1.5, 2.7, 5.0}) {
        const auto past = h.prefix_before(t);
        CHECK(std::abs(proc.intensity(past, t + eps, 0) - proc.intensity(past, t, 0)) < 1e-9);
    }
}

TEST_CASE("intensity matches the direct sum across regimes") {
    Eigen::MatrixXd a1(2, 2), a2(2, 2);
    a1 << 0.0, 0.5, 0.0, 0.0;
    a2 << 0.0, 0.0, 0.6, 0.0;
    std::vector<RegimeParams> regimes{make_regime(Eigen::Vector2d(0.2, 0.3), a1, 1.0),
                                      make_regime(Eigen::Vector2d(0.4, 0.1), a2, 0.5)};
    const PiecewiseHawkes proc(regimes, 8.0);
    const EventSequence seq = simulate(proc, 5);
    for (double t = 0.0; t <= 8.0; t += 0.25) {
        const auto prefix = seq.prefix_before(t);
        for (int v = 0; v < 2; ++v) {
            CHECK(std::abs(proc.intensity(prefix, t, v) - naive_intensity(regimes, 8.0, seq, t, v)) < 1e-12);
        }
    }
}

TEST_CASE("stationarity checks") {
    CHECK(check_stationarity(scalar_regime(0.1, 0.8, 1.0)).stationary);
    const auto bad = check_stationarity(scalar_regime(0.1, 2.0, 1.0));
    CHECK_FALSE(bad.stationary);
    REQUIRE(bad.offending.size() == 1);
    CHECK(bad.offending[0].v == 0);
    CHECK(bad.offending[0].u == 0);
    CHECK(bad.offending[0].alpha_eta == doctest::Approx(2.0));
    CHECK(check_stationarity(scalar_regime(0.1, 0.0, 1e6)).stationary);
}

TEST_CASE("non-stationary parameters are rejected when enforced") {
    const PiecewiseHawkes proc({scalar_regime(0.1, 2.0, 1.0)}, 5.0);
    CHECK_THROWS_AS(simulate(proc, 1), ValidationError);
    SimulationOptions loose;
    loose.enforce_stationarity = false;
    loose.max_events = 100000;
    CHECK_NOTHROW(simulate(proc, 1, loose));
}

TEST_CASE("runaway simulations hit the event cap") {
    const PiecewiseHawkes proc({scalar_regime(50.0, 0.0, 1.0)}, 10.0);
    SimulationOptions opts;
    opts.max_events = 20;
    CHECK_THROWS_AS(simulate(proc, 1, opts), EventCapExceeded);
}

TEST_CASE("simulation is deterministic in the seed") {
    const PiecewiseHawkes proc(three_type_regime(), 50.0);
    const auto a = simulate(proc, 77);
    const auto b = simulate(proc, 77);
    const auto c = simulate(proc, 78);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.events()[i].t == b.events()[i].t);
        CHECK(a.events()[i].type == b.events()[i].type);
    }
    CHECK((a.size() != c.size() || a.events().front().t != c.events().front().t));
}

TEST_CASE("planted graph follows the nonzero excitations") {
    const PiecewiseHawkes proc(three_type_regime(), 10.0);
    const auto g = proc.planted_graph();
    REQUIRE(g.size() == 1);
    CHECK(g[0](0, 1) == 0);
    CHECK(g[0](0, 2) == 1);
    CHECK(g[0](1, 0) == 1);
    CHECK(g[0].sum() == 6);
}

TEST_CASE("poisson reduction: counts") {
    const double lambda = 2.0, T = 10.0;
    const int R = 1000;
    const PiecewiseHawkes proc({make_regime(Eigen::Vector2d(lambda, lambda), Eigen::MatrixXd::Zero(2, 2), 1.0)}, T);
    Eigen::Vector2d total = Eigen::Vector2d::Zero();
    for (int r = 0; r < R; ++r) {
        const auto seq = simulate(proc, 1000 + r);
        for (const auto& e : seq.events()) {
            total(e.type) += 1.0;
        }
    }
    const double sd_of_mean = std::sqrt(lambda * T / R);
    for (int v = 0; v < 2; ++v) {
        CHECK(std::abs(total(v) / R - lambda * T) < 3.0 * sd_of_mean);
    }
}

TEST_CASE("poisson reduction: exponential inter-event times") {
    const double lambda = 1.5;
    const PiecewiseHawkes proc({scalar_regime(lambda, 0.0, 1.0)}, 2000.0);
    const auto seq = simulate(proc, 4);
    std::vector<double> gaps = type_view(seq).gaps[0];
    REQUIRE(gaps.size() > 2000);
    const double d = oracles::ks_statistic(gaps, [&](double x) { return 1.0 - std::exp(-lambda * x); });
    CHECK(oracles::ks_pvalue(d, gaps.size()) > 0.01);

    // the test does reject a wrong rate
    const double wrong = oracles::ks_statistic(gaps, [&](double x) { return 1.0 - std::exp(-1.2 * lambda * x); });
    CHECK(oracles::ks_pvalue(wrong, gaps.size()) < 0.01);
}

TEST_CASE("compensator increments agree with quadrature") {
    Eigen::MatrixXd a1(2, 2), a2(2, 2);
    a1 << 0.2, 0.5, 0.0, 0.3;
    a2 << 0.1, 0.0, 0.6, 0.0;
    std::vector<RegimeParams> regimes{make_regime(Eigen::Vector2d(0.5, 0.4), a1, 1.0),
                                      make_regime(Eigen::Vector2d(0.3, 0.6), a2, 0.7)};
    const double T = 12.0;
    const PiecewiseHawkes proc(regimes, T);
    const auto seq = simulate(proc, 19);
    REQUIRE(seq.size() > 5);
    const auto inc = proc.compensator_increments(seq);
    REQUIRE(inc.size() == seq.size());
    double prev = 0.0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const double t = seq.events()[i].t;
        // integrate piecewise between breakpoints so the kernel stays smooth
        std::vector<double> knots{prev, t};
        if (prev < T / 2 && t > T / 2) {
            knots.insert(knots.begin() + 1, T / 2);
        }
        double expected = 0.0;
        for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
            const double a = knots[j], b = knots[j + 1];
            if (b > a) {
                expected += oracles::simpson(
                    [&](double s) {
                        const double m = std::min(std::max(s, a + 1e-13), b - 1e-13);
                        return naive_intensity(regimes, T, seq, m, 0) + naive_intensity(regimes, T, seq, m, 1);
                    },
                    a, b, 200);
            }
        }
        CHECK(std::abs(inc[i] - expected) < 1e-6 * std::max(1.0, expected));
        prev = t;
    }
}

TEST_CASE("time rescaling of a stationary three-type process") {
    const PiecewiseHawkes proc(three_type_regime(), 1000.0);
    std::vector<double> residuals;
    for (std::uint64_t seed = 0; residuals.size() < 10000; ++seed) {
        const auto seq = simulate(proc, 500 + seed);
        const auto inc = proc.compensator_increments(seq);
        residuals.insert(residuals.end(), inc.begin(), inc.end());
    }
    const double d = oracles::ks_statistic(residuals, [](double x) { return 1.0 - std::exp(-x); });
    MESSAGE("time-rescaling KS d=" << d << " n=" << residuals.size());
    CHECK(oracles::ks_pvalue(d, residuals.size()) > 0.01);
}

TEST_CASE("time rescaling across a regime switch") {
    Eigen::MatrixXd a1(2, 2), a2(2, 2);
    a1 << 0.0, 0.7, 0.0, 0.0;
    a2 << 0.0, 0.0, 0.7, 0.0;
    const PiecewiseHawkes proc({make_regime(Eigen::Vector2d(0.3, 0.3), a1, 1.0),
                                make_regime(Eigen::Vector2d(0.3, 0.3), a2, 1.0)},
                               400.0);
    std::vector<double> residuals;
    for (std::uint64_t seed = 0; residuals.size() < 10000; ++seed) {
        const auto inc = proc.compensator_increments(simulate(proc, 2000 + seed));
        residuals.insert(residuals.end(), inc.begin(), inc.end());
    }
    const double d = oracles::ks_statistic(residuals, [](double x) { return 1.0 - std::exp(-x); });
    CHECK(oracles::ks_pvalue(d, residuals.size()) > 0.01);
}

TEST_CASE("more excitation means more events in expectation") {
    Eigen::MatrixXd lo(2, 2), hi(2, 2);
    lo << 0.1, 0.2, 0.0, 0.1;
    hi = lo;
    hi(0, 1) = 0.6;
    const PiecewiseHawkes p_lo({make_regime(Eigen::Vector2d(0.5, 0.5), lo, 1.0)}, 20.0);
    const PiecewiseHawkes p_hi({make_regime(Eigen::Vector2d(0.5, 0.5), hi, 1.0)}, 20.0);
    const int R = 500;
    double n_lo = 0.0, n_hi = 0.0;
    for (int r = 0; r < R; ++r) {
        const auto lo_seq = simulate(p_lo, r);
        const auto hi_seq = simulate(p_hi, 100000 + r);
        for (const auto& e : lo_seq.events()) {
            n_lo += e.type == 0;
        }
        for (const auto& e : hi_seq.events()) {
            n_hi += e.type == 0;
        }
    }
    MESSAGE("mean type-0 count lo=" << n_lo / R << " hi=" << n_hi / R);
    CHECK(n_hi > n_lo);
}
