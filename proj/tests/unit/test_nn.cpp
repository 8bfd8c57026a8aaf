#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "vaetpp/nn/adam.hpp"
#include "vaetpp/nn/archive.hpp"
#include "vaetpp/nn/autodiff.hpp"
#include "vaetpp/nn/distributions.hpp"
#include "vaetpp/nn/layers.hpp"

using namespace vaetpp::nn;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m(i) = n(rng);
    }
    return m;
}

// keeps values away from kinks so central differences stay meaningful
Matrix away_from_zero(Matrix m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        if (std::abs(m(i)) < 0.1) {
            m(i) = m(i) < 0 ? -0.3 : 0.3;
        }
    }
    return m;
}

// fixed random projection turning any matrix into a scalar loss
Var project(Tape& tape, const Var& x, std::uint64_t seed = 99) {
    std::mt19937_64 rng(seed);
    return sum(mul(x, tape.constant(random_matrix(x.rows(), x.cols(), rng))));
}

double reference_logpdf(double tau, const Vector& w, const Vector& mu, const Vector& sigma) {
    double p = 0.0;
    for (Eigen::Index c = 0; c < w.size(); ++c) {
        const double d = (std::log(tau) - mu(c)) / sigma(c);
        p += w(c) / (tau * sigma(c) * std::sqrt(2.0 * std::numbers::pi)) * std::exp(-0.5 * d * d);
    }
    return std::log(p);
}

MixtureParams random_mixture(std::mt19937_64& rng, int C, double max_sigma) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    MixtureParams p;
    p.omega = Vector(C);
    p.mu = Vector(C);
    p.sigma = Vector(C);
    for (int c = 0; c < C; ++c) {
        p.omega(c) = 0.1 + u(rng);
        p.mu(c) = -2.0 + 4.0 * u(rng);
        p.sigma(c) = 0.2 + (max_sigma - 0.2) * u(rng);
    }
    p.omega /= p.omega.sum();
    return p;
}

} // namespace

TEST_CASE("mlp identity and relu examples") {
    ParameterStore store;
    std::mt19937_64 rng(1);
    Mlp id = Mlp::create(store, "id", 2, {2}, {Activation::identity}, rng);
    store.at("id.0.weight").value = Matrix::Identity(2, 2);
    store.at("id.0.bias").value.setZero();
    Matrix x(2, 1);
    x << -1.0, 2.0;
    CHECK(id.apply(x) == x);

    Mlp r = Mlp::create(store, "r", 2, {2}, {Activation::relu}, rng);
    store.at("r.0.weight").value = Matrix::Identity(2, 2);
    store.at("r.0.bias").value.setZero();
    const Matrix y = r.apply(x);
    CHECK(y(0, 0) == 0.0);
    CHECK(y(1, 0) == 2.0);

    CHECK_THROWS_AS(r.apply(Matrix::Zero(3, 1)), std::invalid_argument);
    CHECK_THROWS_AS(Mlp::create(store, "bad", 2, {2, 3}, {Activation::relu}, rng), std::invalid_argument);
    CHECK(activation_from_string("elu") == Activation::elu);
    CHECK_THROWS_AS(activation_from_string("gelu"), std::invalid_argument);
}

TEST_CASE("mlp parameter gradients match finite differences") {
    ParameterStore store;
    std::mt19937_64 rng(2);
    Mlp mlp = Mlp::create(store, "m", 3, {5, 4, 2},
                          {Activation::elu, Activation::tanh, Activation::identity}, rng);
    const Matrix x = random_matrix(3, 4, rng);
    const auto res = oracles::check_parameter_gradients(store, [&](Tape& t) {
        return project(t, mlp.apply(t, t.constant(x)));
    });
    CHECK(res.worst < 1e-4);
}

TEST_CASE("elementwise and structural ops pass gradient checks") {
    std::mt19937_64 rng(3);
    const Matrix a = away_from_zero(random_matrix(3, 4, rng));
    const Matrix b = random_matrix(3, 4, rng);
    const Matrix w = random_matrix(2, 3, rng);
    const Matrix col = random_matrix(3, 1, rng);
    const Matrix row = random_matrix(1, 4, rng);
    const Matrix pos = (random_matrix(3, 4, rng).array().abs() + 0.5).matrix();

    using F = std::function<Var(Tape&, const std::vector<Var>&)>;
    const std::vector<std::pair<std::string, std::pair<F, std::vector<Matrix>>>> cases{
        {"add", {[](Tape& t, const auto& v) { return project(t, add(v[0], v[1])); }, {a, b}}},
        {"sub", {[](Tape& t, const auto& v) { return project(t, sub(v[0], v[1])); }, {a, b}}},
        {"mul", {[](Tape& t, const auto& v) { return project(t, mul(v[0], v[1])); }, {a, b}}},
        {"scale", {[](Tape& t, const auto& v) { return project(t, add_scalar(scale(v[0], -1.7), 0.3)); }, {a}}},
        {"matmul", {[](Tape& t, const auto& v) { return project(t, matmul(v[0], v[1])); }, {w, a}}},
        {"add_bias", {[](Tape& t, const auto& v) { return project(t, add_bias(v[0], v[1])); }, {a, col}}},
        {"scale_columns", {[](Tape& t, const auto& v) { return project(t, scale_columns(v[0], v[1])); }, {a, row}}},
        {"scale_rows", {[](Tape& t, const auto& v) { return project(t, scale_rows(v[0], v[1])); }, {a, col}}},
        {"relu", {[](Tape& t, const auto& v) { return project(t, relu(v[0])); }, {a}}},
        {"elu", {[](Tape& t, const auto& v) { return project(t, elu(v[0])); }, {a}}},
        {"sigmoid", {[](Tape& t, const auto& v) { return project(t, sigmoid(v[0])); }, {a}}},
        {"tanh", {[](Tape& t, const auto& v) { return project(t, tanh(v[0])); }, {a}}},
        {"exp", {[](Tape& t, const auto& v) { return project(t, exp(v[0])); }, {a}}},
        {"log", {[](Tape& t, const auto& v) { return project(t, log(v[0])); }, {pos}}},
        {"square", {[](Tape& t, const auto& v) { return project(t, square(v[0])); }, {a}}},
        {"clamp", {[](Tape& t, const auto& v) { return project(t, clamp(v[0], -0.5, 0.5)); }, {a}}},
        {"concat_rows", {[](Tape& t, const auto& v) { return project(t, concat_rows({v[0], v[1], v[0]})); }, {a, b}}},
        {"concat_cols", {[](Tape& t, const auto& v) { return project(t, concat_cols({v[0], v[1]})); }, {a, b}}},
        {"slice_rows", {[](Tape& t, const auto& v) { return project(t, slice_rows(v[0], 1, 2)); }, {a}}},
        {"slice_cols", {[](Tape& t, const auto& v) { return project(t, slice_cols(v[0], 1, 3)); }, {a}}},
        {"gather_cols", {[](Tape& t, const auto& v) { return project(t, gather_cols(v[0], {3, 0, 0, 2, 1})); }, {a}}},
        {"scatter_add_cols",
         {[](Tape& t, const auto& v) { return project(t, scatter_add_cols(v[0], {1, 1, 0, 1}, 3)); }, {a}}},
        {"mean_cols", {[](Tape& t, const auto& v) { return project(t, mean_cols(v[0], {{0, 2}, {}, {1, 2, 3}})); },
                       {a}}},
        {"sum", {[](Tape&, const auto& v) { return sum(square(v[0])); }, {a}}},
        {"col_sums", {[](Tape& t, const auto& v) { return project(t, col_sums(v[0])); }, {a}}},
        {"log_softmax", {[](Tape& t, const auto& v) { return project(t, log_softmax_cols(v[0])); }, {a}}},
        {"softmax", {[](Tape& t, const auto& v) { return project(t, softmax_cols(v[0])); }, {a}}},
        {"logsumexp", {[](Tape& t, const auto& v) { return project(t, logsumexp_cols(v[0])); }, {a}}},
        {"categorical_kl", {[](Tape& t, const auto& v) { return project(t, categorical_kl(v[0], v[1])); }, {a, b}}},
    };
    for (const auto& [name, c] : cases) {
        const auto res = oracles::check_input_gradients(c.first, c.second);
        INFO(name << " worst relative error " << res.worst);
        CHECK(res.worst < 1e-4);
    }
}

TEST_CASE("fused mixture log density matches the reference and its gradients") {
    std::mt19937_64 rng(4);
    const int C = 3, n = 5;
    const Matrix logits = random_matrix(C, n, rng);
    const Matrix mu = random_matrix(C, n, rng);
    const Matrix log_sigma = random_matrix(C, n, rng, 0.4);
    RowVector log_tau(n);
    for (int j = 0; j < n; ++j) {
        log_tau(j) = random_matrix(1, 1, rng)(0);
    }
    Tape tape(false);
    const Var lp = lognormal_mixture_logpdf(tape.constant(logits), tape.constant(mu), tape.constant(log_sigma), log_tau);
    for (int j = 0; j < n; ++j) {
        const Vector w = softmax(logits.col(j));
        const double ref = reference_logpdf(std::exp(log_tau(j)), w, mu.col(j), log_sigma.col(j).array().exp());
        CHECK(std::abs(lp.value()(0, j) - ref) < 1e-10);
    }

    const auto res = oracles::check_input_gradients(
        [&](Tape& t, const std::vector<Var>& v) { return project(t, lognormal_mixture_logpdf(v[0], v[1], v[2], log_tau)); },
        {logits, mu, log_sigma});
    CHECK(res.worst < 1e-4);
}

TEST_CASE("mixture heads feed the log density with correct gradients") {
    ParameterStore store;
    std::mt19937_64 rng(5);
    const MixtureHeads heads = MixtureHeads::create(store, "heads", 4, 3, rng);
    const Matrix h = random_matrix(4, 6, rng);
    RowVector log_tau = random_matrix(1, 6, rng);
    const auto res = oracles::check_parameter_gradients(store, [&](Tape& t) {
        const auto out = heads.apply(t, t.constant(h));
        return sum(lognormal_mixture_logpdf(out.logits, out.mu, out.log_sigma, log_tau));
    });
    CHECK(res.worst < 1e-4);
}

TEST_CASE("gru gradients match finite differences") {
    ParameterStore store;
    std::mt19937_64 rng(6);
    const GruCell cell = GruCell::create(store, "gru", 3, 4, rng);
    store.at("gru.bias").value = random_matrix(12, 1, rng, 0.3);
    const Matrix x0 = random_matrix(3, 2, rng), x1 = random_matrix(3, 2, rng);
    const Matrix h0 = random_matrix(4, 2, rng, 0.5);
    auto f = [&](Tape& t) {
        Var h = t.constant(h0);
        h = cell.step(t, h, t.constant(x0));
        h = cell.step(t, h, t.constant(x1));
        return project(t, h);
    };
    CHECK(oracles::check_parameter_gradients(store, f).worst < 1e-4);

    const auto inputs = oracles::check_input_gradients(
        [&](Tape& t, const std::vector<Var>& v) { return project(t, cell.step(t, v[0], v[1])); }, {h0, x0});
    CHECK(inputs.worst < 1e-4);
}

TEST_CASE("gru gate limits") {
    ParameterStore store;
    std::mt19937_64 rng(7);
    GruCell cell = GruCell::create(store, "g", 2, 3, rng);
    const Matrix h = random_matrix(3, 1, rng);
    const Matrix x = random_matrix(2, 1, rng);

    // candidate computed directly, with the reset gate taken from the parameters
    auto candidate = [&]() {
        const Matrix& wi = cell.input_weights().value;
        const Matrix& b = cell.bias().value;
        const Matrix r_pre = wi.middleRows(3, 3) * x + b.middleRows(3, 3) + cell.gate_weights().value.bottomRows(3) * h;
        const Matrix r = (1.0 / (1.0 + (-r_pre.array()).exp())).matrix();
        return Matrix((wi.bottomRows(3) * x + b.bottomRows(3) +
                       cell.candidate_weights().value * r.cwiseProduct(h)).array().tanh());
    };

    cell.input_weights().value.topRows(3).setZero();
    cell.gate_weights().value.topRows(3).setZero();
    cell.bias().value.topRows(3).setConstant(-60.0);
    CHECK((cell.step(h, x) - candidate()).cwiseAbs().maxCoeff() < 1e-12);

    cell.bias().value.topRows(3).setConstant(60.0);
    CHECK((cell.step(h, x) - h).cwiseAbs().maxCoeff() < 1e-12);

    CHECK_THROWS_AS(cell.step(Matrix::Zero(2, 1), x), std::invalid_argument);
}

TEST_CASE("gumbel softmax at low temperature is nearly one-hot") {
    std::mt19937_64 rng(8);
    Vector logits(2);
    logits << 10.0, 0.0;
    int close = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const auto s = gumbel_softmax_sample(logits, 0.01, rng);
        close += std::abs(s.value(0) - 1.0) < 1e-3 && std::abs(s.value(1)) < 1e-3;
    }
    CHECK(close >= 0.99 * n);
}

TEST_CASE("gumbel softmax with uniform logits has uniform argmax") {
    std::mt19937_64 rng(9);
    const int E = 4, n = 10000;
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(E);
    for (int i = 0; i < n; ++i) {
        const auto s = gumbel_softmax_sample(Vector::Zero(E), 0.5, rng);
        Eigen::Index arg;
        s.value.maxCoeff(&arg);
        ++counts(arg);
        CHECK(std::abs(s.value.sum() - 1.0) < 1e-6);
        CHECK(s.value.minCoeff() >= 0.0);
    }
    const double p = 1.0 / E, sd = std::sqrt(n * p * (1 - p));
    for (int e = 0; e < E; ++e) {
        CHECK(std::abs(counts(e) - n * p) < 3 * sd);
    }
}

TEST_CASE("gumbel softmax determinism and argument checks") {
    Vector logits(3);
    logits << 0.2, -1.0, 0.7;
    CHECK(gumbel_softmax_sample(logits, 0.5, std::uint64_t{42}).value ==
          gumbel_softmax_sample(logits, 0.5, std::uint64_t{42}).value);
    CHECK_THROWS_AS(gumbel_softmax_sample(logits, 0.0, std::uint64_t{1}), std::invalid_argument);
    CHECK_THROWS_AS(gumbel_softmax_sample(logits, -1.0, std::uint64_t{1}), std::invalid_argument);
}

TEST_CASE("gumbel softmax approaches one-hot as temperature falls") {
    std::mt19937_64 rng(10);
    Vector logits(3);
    logits << 0.3, -0.2, 0.1;
    double prev = 1.0;
    for (double temp : {2.0, 0.5, 0.1, 0.02, 0.005}) {
        double dist = 0.0;
        for (int i = 0; i < 2000; ++i) {
            dist += 1.0 - gumbel_softmax_sample(logits, temp, rng).value.maxCoeff();
        }
        dist /= 2000;
        CHECK(dist < prev);
        prev = dist;
    }
    CHECK(prev < 0.01);
}

TEST_CASE("relaxed sample on the tape: gradients and hard forward value") {
    std::mt19937_64 rng(11);
    const Matrix logits = random_matrix(3, 4, rng);
    const Matrix noise = gumbel_noise(3, 4, rng);
    const auto res = oracles::check_input_gradients(
        [&](Tape& t, const std::vector<Var>& v) { return project(t, gumbel_softmax(v[0], noise, 0.7, false)); },
        {logits});
    CHECK(res.worst < 1e-4);

    Tape tape;
    const Var x = tape.input(logits);
    const Var hard = gumbel_softmax(x, noise, 0.7, true);
    const Var soft = gumbel_softmax(x, noise, 0.7, false);
    for (Eigen::Index j = 0; j < 4; ++j) {
        Eigen::Index arg;
        soft.value().col(j).maxCoeff(&arg);
        CHECK(hard.value().col(j).sum() == 1.0);
        CHECK(hard.value()(arg, j) == 1.0);
    }
    // straight-through: gradients equal those of the soft sample
    tape.backward(project(tape, hard));
    const Matrix g_hard = x.grad();
    Tape tape2;
    const Var x2 = tape2.input(logits);
    tape2.backward(project(tape2, gumbel_softmax(x2, noise, 0.7, false)));
    CHECK(oracles::relative_error(g_hard, x2.grad()) < 1e-12);
}

TEST_CASE("categorical kl examples") {
    Vector q(3), p(3);
    q << 0.3, -0.4, 1.1;
    CHECK(categorical_kl(q, q) == doctest::Approx(0.0).epsilon(1e-12));

    Vector one_hot(2), flat(2);
    one_hot << 50.0, -50.0;
    flat << 0.0, 0.0;
    CHECK(std::abs(categorical_kl(one_hot, flat) - std::log(2.0)) < 1e-6);
    CHECK(std::abs(categorical_kl(one_hot, flat) - 0.69315) < 1e-5);

    std::mt19937_64 rng(12);
    for (int i = 0; i < 1000; ++i) {
        const Vector a = random_matrix(4, 1, rng, 3.0);
        const Vector b = random_matrix(4, 1, rng, 3.0);
        const double kl = categorical_kl(a, b);
        CHECK(kl >= 0.0);
        // direct definition
        const Vector pa = softmax(a), pb = softmax(b);
        CHECK(std::abs(kl - (pa.array() * (pa.array().log() - pb.array().log())).sum()) < 1e-10);
    }

    Tape tape(false);
    const Var col_kl = categorical_kl(tape.constant(Matrix(q)), tape.constant(Matrix(q)));
    CHECK(col_kl.scalar() == doctest::Approx(0.0));
}

TEST_CASE("log-normal density examples") {
    MixtureParams std_normal{Vector::Ones(1), Vector::Zero(1), Vector::Ones(1)};
    CHECK(std::abs(lognormal_mixture_logpdf(1.0, std_normal) - std::log(1.0 / std::sqrt(2.0 * std::numbers::pi))) <
          1e-12);
    CHECK(std::abs(lognormal_mixture_logpdf(1.0, std_normal) - (-0.91894)) < 1e-5);
    CHECK_THROWS_AS(lognormal_mixture_logpdf(0.0, std_normal), std::domain_error);
    CHECK_THROWS_AS(lognormal_mixture_logpdf(-2.0, std_normal), std::domain_error);

    MixtureParams twin{Vector::Constant(2, 0.5), Vector::Constant(2, 0.4), Vector::Constant(2, 0.8)};
    MixtureParams single{Vector::Ones(1), Vector::Constant(1, 0.4), Vector::Constant(1, 0.8)};
    for (double tau : {0.01, 0.7, 3.0, 40.0}) {
        CHECK(std::abs(lognormal_mixture_logpdf(tau, twin) - lognormal_mixture_logpdf(tau, single)) < 1e-12);
    }
}

TEST_CASE("log-normal mixture density integrates to one") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const MixtureParams p = random_mixture(rng, 1 + trial % 4, 1.5);
        p.validate();
        // substitute tau = e^y over (e^-40, 1e6)
        const double total = oracles::simpson(
            [&](double y) { return std::exp(lognormal_mixture_logpdf(std::exp(y), p) + y); }, -40.0, std::log(1e6),
            20000);
        CHECK(std::abs(total - 1.0) < 1e-3);
        for (double tau : {0.05, 1.0, 9.0}) {
            CHECK(std::abs(lognormal_mixture_logpdf(tau, p) - reference_logpdf(tau, p.omega, p.mu, p.sigma)) < 1e-10);
        }
    }
}

TEST_CASE("log density is shift covariant") {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 50; ++trial) {
        MixtureParams p = random_mixture(rng, 3, 1.2);
        const double tau = std::exp(random_matrix(1, 1, rng)(0));
        const double s = std::exp(2.0 * random_matrix(1, 1, rng)(0));
        MixtureParams shifted = p;
        shifted.mu.array() += std::log(s);
        CHECK(std::abs(lognormal_mixture_logpdf(s * tau, shifted) - (lognormal_mixture_logpdf(tau, p) - std::log(s))) <
              1e-10);
    }
}

TEST_CASE("mixture mean") {
    MixtureParams one{Vector::Ones(1), Vector::Zero(1), Vector::Ones(1)};
    CHECK(std::abs(lognormal_mixture_mean(one) - std::exp(0.5)) < 1e-12);
    CHECK(std::abs(lognormal_mixture_mean(one) - 1.64872) < 1e-5);
    MixtureParams two{Vector::Constant(2, 0.5), Vector::Zero(2), Vector::Ones(2)};
    CHECK(std::abs(lognormal_mixture_mean(two) - lognormal_mixture_mean(one)) < 1e-12);

    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 3; ++trial) {
        const MixtureParams p = random_mixture(rng, 2 + trial, 1.5);
        double total = 0.0;
        const int n = 1000000;
        for (int i = 0; i < n; ++i) {
            total += sample_lognormal_mixture(p, rng);
        }
        CHECK(std::abs(total / n / lognormal_mixture_mean(p) - 1.0) < 0.01);
    }
}

TEST_CASE("mixture heads respect their constraints") {
    ParameterStore store;
    std::mt19937_64 rng(16);
    const MixtureHeads heads = MixtureHeads::create(store, "h", 5, 4, rng);
    for (int i = 0; i < 1000; ++i) {
        const MixtureParams p = heads.params(random_matrix(5, 1, rng, 3.0));
        CHECK_NOTHROW(p.validate());
        CHECK(p.sigma.minCoeff() >= 1e-3 * (1 - 1e-12));
        CHECK(p.sigma.maxCoeff() <= 1e3 * (1 + 1e-12));
    }
    const MixtureParams zero = heads.params(Vector::Zero(5));
    CHECK(oracles::relative_error(zero.omega, softmax(store.at("h.omega.bias").value.col(0))) < 1e-12);
    CHECK(oracles::relative_error(zero.mu, store.at("h.mu.bias").value) < 1e-12);
    CHECK(oracles::relative_error(zero.sigma, store.at("h.sigma.bias").value.array().exp().matrix()) < 1e-12);
    CHECK_THROWS_AS(heads.params(Vector::Zero(3)), std::invalid_argument);

    store.at("h.sigma.bias").value.setConstant(50.0);
    CHECK(heads.params(Vector::Zero(5)).sigma.maxCoeff() == doctest::Approx(1e3));
}

TEST_CASE("mixture parameter validation") {
    MixtureParams bad{Vector::Constant(2, 0.6), Vector::Zero(2), Vector::Ones(2)};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    MixtureParams neg_sigma{Vector::Constant(2, 0.5), Vector::Zero(2), -Vector::Ones(2)};
    CHECK_THROWS_AS(neg_sigma.validate(), std::invalid_argument);
}

TEST_CASE("archive round trip") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        std::map<std::string, Matrix> tensors;
        for (int k = 0; k < 1 + trial % 5; ++k) {
            tensors["t" + std::to_string(k) + ".w"] = random_matrix(1 + (trial + k) % 4, 1 + k % 3, rng, 10.0);
        }
        tensors["empty"] = Matrix(0, 3);
        std::stringstream buf;
        write_archive(buf, tensors);
        const auto back = read_archive(buf);
        REQUIRE(back.size() == tensors.size());
        for (const auto& [name, m] : tensors) {
            CHECK(back.at(name) == m);
        }

        std::stringstream buf32;
        write_archive(buf32, tensors, TensorPrecision::f32);
        const auto back32 = read_archive(buf32);
        for (const auto& [name, m] : tensors) {
            if (m.size() == 0) {
                CHECK(back32.at(name).cols() == 3);
                continue;
            }
            CHECK((back32.at(name) - m).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, m.cwiseAbs().maxCoeff()));
        }
    }
    std::stringstream junk("not an archive");
    CHECK_THROWS(read_archive(junk));
}

TEST_CASE("adam follows its update rule and minimizes a quadratic") {
    ParameterStore store;
    Parameter& p = store.create("x", 2, 1);
    p.value << 1.0, -2.0;
    Adam adam(store, AdamOptions{0.1, 0.9, 0.999, 1e-8, 0.0});

    // first step moves each coordinate by lr * sign(grad)
    p.grad << 4.0, -0.5;
    adam.step();
    CHECK(std::abs(p.value(0) - 0.9) < 1e-7);
    CHECK(std::abs(p.value(1) - (-1.9)) < 1e-7);

    for (int i = 0; i < 500; ++i) {
        store.zero_grad();
        Tape tape;
        const Var loss = sum(square(add_scalar(tape.param(p), -3.0)));
        tape.backward(loss);
        adam.step();
    }
    CHECK((p.value.array() - 3.0).abs().maxCoeff() < 1e-2);
    CHECK(adam.steps() == 501);
}

TEST_CASE("gradient clipping caps the update norm input") {
    ParameterStore store;
    Parameter& p = store.create("x", 1, 1);
    p.value << 0.0;
    Adam adam(store, AdamOptions{0.1, 0.0, 0.0, 1e-8, 1.0});
    p.grad << 100.0;
    CHECK(adam.step() == doctest::Approx(100.0));
    CHECK(std::abs(p.value(0) + 0.1) < 1e-6);
}

TEST_CASE("parameter store snapshot and restore") {
    ParameterStore store;
    std::mt19937_64 rng(18);
    Dense::create(store, "d", 3, 2, Activation::relu, rng);
    const auto snap = store.snapshot();
    store.at("d.weight").value.setZero();
    store.restore(snap);
    CHECK(store.at("d.weight").value == snap.at("d.weight"));
    CHECK(store.num_scalars() == 8);
    auto wrong = snap;
    wrong["d.bias"] = Matrix::Zero(3, 1);
    CHECK_THROWS_AS(store.restore(wrong), std::invalid_argument);
    CHECK_THROWS_AS(store.create("d.bias", 1, 1), std::invalid_argument);
}
