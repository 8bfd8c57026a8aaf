#include "vaetpp/model/vaetpp.hpp"

#include <cmath>
#include <stdexcept>

#include "vaetpp/errors.hpp"
#include "vaetpp/nn/distributions.hpp"

namespace vaetpp::model {

using nn::Activation;
using nn::RowVector;
using nn::Tape;

namespace {

Matrix one_hot_argmax(const Matrix& logits) {
    Matrix out = Matrix::Zero(logits.rows(), logits.cols());
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        Eigen::Index arg;
        logits.col(j).maxCoeff(&arg);
        out(arg, j) = 1.0;
    }
    return out;
}

Var empty_row(Tape& tape, Eigen::Index rows) { return tape.constant(Matrix::Zero(rows, 0)); }

} // namespace

void VaeTppConfig::validate() const {
    if (num_types < 2) {
        throw ValidationError("VAETPP needs at least two event types (no type pairs exist otherwise)");
    }
    if (num_intervals < 1) {
        throw ValidationError("number of intervals K must be positive");
    }
    if (embed_dim < 1 || hidden < 1 || decoder_hidden < 1 || components < 1) {
        throw ValidationError("layer widths and mixture components must be positive");
    }
    if (edge_types < 2) {
        throw ValidationError("at least two edge types are required (type 0 means no dependency)");
    }
    if (num_marks < 0) {
        throw ValidationError("num_marks must be non-negative");
    }
    if (!(initial_edge_probability > 0.0 && initial_edge_probability < 1.0)) {
        throw ValidationError("initial_edge_probability must lie in (0, 1)");
    }
}

int encoder_feature_width(int num_types, int num_marks) { return 4 + num_types + num_marks; }

Matrix encoder_features(const EventSequence& seq, const Normalizer& norm, int num_marks) {
    const int U = seq.num_types();
    const auto& events = seq.events();
    const auto L = static_cast<Eigen::Index>(events.size());
    const auto gaps = per_event_gaps(seq);
    Matrix x = Matrix::Zero(encoder_feature_width(U, num_marks), L * U);
    std::vector<Eigen::Index> latest(U, -1);
    for (Eigen::Index i = 0; i < L; ++i) {
        latest[events[i].type] = i;
        for (int v = 0; v < U; ++v) {
            const Eigen::Index col = i * U + v;
            double elapsed = events[i].t;
            if (const Eigen::Index j = latest[v]; j >= 0) {
                x(0, col) = norm.standardize(gaps[j]);
                elapsed = events[i].t - events[j].t;
                x(2, col) = 1.0;
                if (const auto& mark = events[j].mark; mark && num_marks > 0) {
                    if (*mark < 0 || *mark >= num_marks) {
                        throw ValidationError("mark " + std::to_string(*mark) + " outside [0, " +
                                              std::to_string(num_marks) + ")");
                    }
                    x(4 + U + *mark, col) = 1.0;
                }
            }
            x(1, col) = std::log1p(elapsed / norm.mean_tau);
            x(3, col) = v == events[i].type ? 1.0 : 0.0;
            x(4 + v, col) = 1.0;
        }
    }
    return x;
}

Matrix decoder_event_inputs(int num_types, int fired, double std_gap) {
    Matrix x = Matrix::Zero(2 + 2 * num_types, num_types);
    for (int v = 0; v < num_types; ++v) {
        x(0, v) = v == fired ? 1.0 : 0.0;
        x(1, v) = std_gap;
        x(2 + fired, v) = 1.0;
        x(2 + num_types + v, v) = 1.0;
    }
    return x;
}

VaeTpp::VaeTpp(VaeTppConfig config, std::uint64_t seed, bool static_graph)
    : config_(config), static_(static_graph) {
    if (static_) {
        config_.num_intervals = 1;
    }
    config_.validate();
    const int U = config_.num_types, H = config_.hidden, D = config_.embed_dim, Hd = config_.decoder_hidden;
    const int E = config_.edge_types;
    for (int v = 0; v < U; ++v) {
        for (int u = 0; u < U; ++u) {
            if (u != v) {
                pairs_.emplace_back(v, u);
            }
        }
    }

    std::mt19937_64 rng(seed);
    const int F = encoder_feature_width(U, config_.num_marks);
    embed_ = nn::Mlp::create(store_, "enc.embed", F, {H, D}, {Activation::elu, Activation::identity}, rng);
    f_emb1_ = nn::Mlp::create(store_, "enc.f_emb1", D, {H, H}, {Activation::elu, Activation::elu}, rng);
    f_e1_ = nn::Mlp::create(store_, "enc.f_e1", 2 * H, {H, H}, {Activation::elu, Activation::elu}, rng);
    f_v1_ = nn::Mlp::create(store_, "enc.f_v1", H, {H, H}, {Activation::elu, Activation::elu}, rng);
    f_e2_ = nn::Mlp::create(store_, "enc.f_e2", 2 * H, {H, H}, {Activation::elu, Activation::elu}, rng);
    f_emb2_ = nn::Mlp::create(store_, "enc.f_emb2", H, {H}, {Activation::relu}, rng);
    rnn_fwd_ = nn::GruCell::create(store_, "enc.rnn_fwd", H, H, rng);
    rnn_bwd_ = nn::GruCell::create(store_, "enc.rnn_bwd", H, H, rng);
    prior_head_ = nn::Mlp::create(store_, "prior.head", H, {H, E}, {Activation::relu, Activation::identity}, rng);
    enc_head_ = nn::Mlp::create(store_, "posterior.head", 2 * H, {H, E}, {Activation::relu, Activation::identity}, rng);
    Matrix edge_bias(E, 1);
    edge_bias(0, 0) = std::log(1.0 - config_.initial_edge_probability);
    edge_bias.bottomRows(E - 1).setConstant(std::log(config_.initial_edge_probability / (E - 1)));
    edge_bias.array() -= edge_bias.mean();
    store_.at("prior.head.1.bias").value = edge_bias;
    store_.at("posterior.head.1.bias").value = edge_bias;
    for (int e = 1; e < E; ++e) {
        edge_mlps_.push_back(nn::Mlp::create(store_, "dec.edge" + std::to_string(e), 2 * Hd, {Hd, Hd},
                                             {Activation::elu, Activation::elu}, rng));
    }
    gru_ = nn::GruCell::create(store_, "dec.gru", Hd + 2 + 2 * U, Hd, rng);
    heads_ = nn::MixtureHeads::create(store_, "dec.mixture", Hd, config_.components, rng);
    time_head_ = nn::Dense::create(store_, "dec.time", Hd, 1, Activation::identity, rng);
    type_head_ = nn::Dense::create(store_, "dec.type", Hd, U, Activation::identity, rng);
}

int VaeTpp::pair_index(int v, int u) const {
    const int U = config_.num_types;
    if (v == u || v < 0 || u < 0 || v >= U || u >= U) {
        throw std::out_of_range("no pair (" + std::to_string(v) + "," + std::to_string(u) + ")");
    }
    return v * (U - 1) + (u < v ? u : u - 1);
}

void VaeTpp::fit_normalization(const std::vector<const EventSequence*>& train) {
    norm_ = Normalizer::fit(train);
    const int C = config_.components;
    auto& mu_bias = store_.at("dec.mixture.mu.bias").value;
    for (int c = 0; c < C; ++c) {
        const double spread = C > 1 ? -2.0 + 4.0 * c / (C - 1) : 0.0;
        mu_bias(c, 0) = norm_.log_tau_mean + norm_.log_tau_std * spread;
    }
    store_.at("dec.mixture.sigma.bias").value.setConstant(std::log(norm_.log_tau_std));
    store_.at("dec.time.bias").value.setConstant(norm_.mean_tau);

    Eigen::VectorXd counts = Eigen::VectorXd::Ones(config_.num_types);
    for (const auto* s : train) {
        for (const auto& e : s->events()) {
            counts(e.type) += 1.0;
        }
    }
    store_.at("dec.type.bias").value = (counts / counts.sum()).array().log().matrix();
}

EncoderOutput VaeTpp::encode(Tape& tape, const EventSequence& seq) const {
    const int U = config_.num_types, K = config_.num_intervals, H = config_.hidden;
    const int P = num_pairs();
    if (seq.num_types() != U) {
        throw ValidationError("sequence has " + std::to_string(seq.num_types()) + " types, model expects " +
                              std::to_string(U));
    }
    const auto L = static_cast<int>(seq.size());
    EncoderOutput out;
    Var pooled;
    if (L == 0) {
        out.embeddings = empty_row(tape, config_.embed_dim);
        out.relations = empty_row(tape, H);
        pooled = tape.constant(Matrix::Zero(H, K * P));
    } else {
        const SubIntervalPartition part(seq.horizon(), K);
        out.embeddings = embed_.apply(tape, tape.constant(encoder_features(seq, norm_, config_.num_marks)));
        const Var h1 = f_emb1_.apply(tape, out.embeddings);
        std::vector<int> recv(static_cast<std::size_t>(L) * P), send(recv.size());
        for (int i = 0; i < L; ++i) {
            for (int p = 0; p < P; ++p) {
                recv[i * P + p] = i * U + pairs_[p].first;
                send[i * P + p] = i * U + pairs_[p].second;
            }
        }
        const Var e1 = f_e1_.apply(tape, nn::concat_rows({nn::gather_cols(h1, recv), nn::gather_cols(h1, send)}));
        const Var h2 = f_v1_.apply(tape, nn::scatter_add_cols(e1, recv, static_cast<Eigen::Index>(L) * U));
        out.relations = f_e2_.apply(tape, nn::concat_rows({nn::gather_cols(h2, recv), nn::gather_cols(h2, send)}));

        std::vector<std::vector<int>> groups(static_cast<std::size_t>(K) * P);
        for (int i = 0; i < L; ++i) {
            const int k = part.interval_of(seq.events()[i].t);
            for (int p = 0; p < P; ++p) {
                groups[k * P + p].push_back(i * P + p);
            }
        }
        pooled = nn::mean_cols(out.relations, groups);
    }
    out.interval_states = f_emb2_.apply(tape, pooled);

    std::vector<Var> fwd(K), bwd(K);
    Var h = tape.constant(Matrix::Zero(H, P));
    for (int k = 0; k < K; ++k) {
        h = rnn_fwd_.step(tape, h, nn::slice_cols(out.interval_states, k * P, P));
        fwd[k] = h;
    }
    h = tape.constant(Matrix::Zero(H, P));
    for (int k = K - 1; k >= 0; --k) {
        h = rnn_bwd_.step(tape, h, nn::slice_cols(out.interval_states, k * P, P));
        bwd[k] = h;
    }
    out.forward_states = nn::concat_cols(fwd);
    out.backward_states = nn::concat_cols(bwd);
    out.prior_logits = prior_head_.apply(tape, out.forward_states);
    out.posterior_logits = enc_head_.apply(tape, nn::concat_rows({out.backward_states, out.forward_states}));
    return out;
}

Var VaeTpp::latents(Tape& tape, const EncoderOutput& enc, const ForwardOptions& opts) const {
    const Eigen::Index E = config_.edge_types;
    const Eigen::Index cols = static_cast<Eigen::Index>(config_.num_intervals) * num_pairs();
    switch (opts.latents) {
    case LatentMode::sample: {
        std::mt19937_64 rng(opts.noise_seed);
        return nn::gumbel_softmax(enc.posterior_logits, nn::gumbel_noise(E, cols, rng), opts.temperature, opts.hard);
    }
    case LatentMode::mode:
        return tape.constant(one_hot_argmax(enc.posterior_logits.value()));
    case LatentMode::prior_mode:
        return tape.constant(one_hot_argmax(enc.prior_logits.value()));
    case LatentMode::mean:
        return nn::softmax_cols(enc.posterior_logits);
    case LatentMode::fixed:
        if (!opts.fixed_latents || opts.fixed_latents->rows() != E || opts.fixed_latents->cols() != cols) {
            throw ValidationError("fixed latents must be an E x (K * P) matrix");
        }
        return tape.constant(*opts.fixed_latents);
    }
    throw std::logic_error("unhandled latent mode");
}

DecoderOutput VaeTpp::decode(Tape& tape, const EventSequence& seq, const Var& z) const {
    const int U = config_.num_types, K = config_.num_intervals, Hd = config_.decoder_hidden;
    const int E = config_.edge_types, P = num_pairs();
    if (!z.valid()) {
        throw ValidationError("decoder needs sampled or fixed latents");
    }
    if (z.rows() != E || z.cols() != static_cast<Eigen::Index>(K) * P) {
        throw ValidationError("latent matrix must be E x (K * P)");
    }
    if (seq.num_types() != U) {
        throw ValidationError("sequence type count does not match the model");
    }
    const auto& events = seq.events();
    const auto N = static_cast<int>(events.size());
    DecoderOutput out;
    Var state = tape.constant(Matrix::Zero(Hd, U));
    if (N == 0) {
        out.log_likelihood = empty_row(tape, 1);
        out.time_prediction = empty_row(tape, 1);
        out.type_logits = empty_row(tape, U);
        out.final_state = state;
        out.type_states = state;
        return out;
    }

    const SubIntervalPartition part(seq.horizon(), K);
    const auto gaps = per_event_gaps(seq);
    std::vector<int> recv(P), send(P);
    for (int p = 0; p < P; ++p) {
        recv[p] = pairs_[p].first;
        send[p] = pairs_[p].second;
    }
    // Update weight of each node when an event fires: 1 for the firing type,
    // P[edge from the firing type] for the others (last column is the 1).
    const Var active = nn::concat_cols(
        {nn::col_sums(nn::slice_rows(z, 1, E - 1)), tape.constant(Matrix::Ones(1, 1))});
    const bool z_fixed = !tape.needs_grad(z.index());

    struct EdgeLayer {
        Var left, right, bias;
    };
    std::vector<EdgeLayer> first;
    for (const auto& mlp : edge_mlps_) {
        const auto& l0 = mlp.layers().front();
        const Var w = tape.param(*l0.weight);
        first.push_back({nn::slice_cols(w, 0, Hd), nn::slice_cols(w, Hd, Hd), tape.param(*l0.bias)});
    }

    std::vector<Var> pre(N), post(N);
    // each type's state just after its own latest event: the gap that starts
    // there is scored from information up to its start only
    std::vector<Var> own(U, tape.constant(Matrix::Zero(Hd, 1)));
    RowVector log_tau(N);
    for (int i = 0; i < N; ++i) {
        const int w = events[i].type;
        const int k = part.interval_of(events[i].t);
        log_tau(i) = std::log(gaps[i]);
        pre[i] = own[w];

        Var messages;
        for (int e = 1; e < E; ++e) {
            const Var gate = nn::slice_cols(nn::slice_rows(z, e, 1), static_cast<Eigen::Index>(k) * P, P);
            if (z_fixed && gate.value().isZero(0.0)) {
                continue;
            }
            const auto& mlp = edge_mlps_[e - 1];
            const auto& f = first[e - 1];
            Var h = nn::add(nn::gather_cols(nn::matmul(f.left, state), recv),
                            nn::gather_cols(nn::matmul(f.right, state), send));
            h = nn::activate(mlp.layers().front().activation, nn::add_bias(h, f.bias));
            for (std::size_t l = 1; l < mlp.layers().size(); ++l) {
                h = mlp.layers()[l].apply(tape, h);
            }
            const Var m = nn::scale_columns(h, gate);
            messages = messages.valid() ? nn::add(messages, m) : m;
        }
        const Var aggregate =
            messages.valid() ? nn::scatter_add_cols(messages, recv, U) : tape.constant(Matrix::Zero(Hd, U));
        const Var input =
            nn::concat_rows({aggregate, tape.constant(decoder_event_inputs(U, w, norm_.standardize(gaps[i])))});
        const Var candidate = gru_.step(tape, state, input);

        std::vector<int> idx(U);
        for (int v = 0; v < U; ++v) {
            idx[v] = v == w ? K * P : k * P + pair_index(v, w);
        }
        state = nn::add(state, nn::scale_columns(nn::sub(candidate, state), nn::gather_cols(active, idx)));
        post[i] = nn::slice_cols(state, w, 1);
        own[w] = post[i];
    }

    const Var theta = nn::concat_cols(pre);
    const auto mix = heads_.apply(tape, theta);
    out.log_likelihood = nn::lognormal_mixture_logpdf(mix.logits, mix.mu, mix.log_sigma, log_tau);
    out.mixture_logits = mix.logits;
    out.mixture_mu = mix.mu;
    out.mixture_log_sigma = mix.log_sigma;
    out.time_prediction = time_head_.apply(tape, theta);
    if (N > 1) {
        post.pop_back();
        out.type_logits = type_head_.apply(tape, nn::concat_cols(post));
    } else {
        out.type_logits = empty_row(tape, U);
    }
    out.final_state = state;
    out.type_states = nn::concat_cols(own);
    return out;
}

ForwardResult VaeTpp::forward(Tape& tape, const EventSequence& seq, const ForwardOptions& opts) const {
    const EncoderOutput enc = encode(tape, seq);
    const Var z = latents(tape, enc, opts);
    const DecoderOutput dec = decode(tape, seq, z);
    ForwardResult r;
    r.log_likelihood = dec.log_likelihood;
    r.kl = nn::sum(nn::categorical_kl(enc.posterior_logits, enc.prior_logits));
    r.time_prediction = dec.time_prediction;
    r.type_logits = dec.type_logits;
    const auto gaps = per_event_gaps(seq);
    r.gaps = Eigen::Map<const RowVector>(gaps.data(), static_cast<Eigen::Index>(gaps.size()));
    for (const auto& e : seq.events()) {
        r.types.push_back(e.type);
    }
    return r;
}

ElboReport VaeTpp::elbo(const EventSequence& seq, const ForwardOptions& opts, int num_samples) const {
    if (num_samples < 1) {
        throw ValidationError("num_samples must be positive");
    }
    ElboReport report;
    const int K = config_.num_intervals, P = num_pairs();
    for (int s = 0; s < num_samples; ++s) {
        Tape tape(false);
        ForwardOptions o = opts;
        o.noise_seed = opts.noise_seed + static_cast<std::uint64_t>(s);
        const EncoderOutput enc = encode(tape, seq);
        const DecoderOutput dec = decode(tape, seq, latents(tape, enc, o));
        report.reconstruction += dec.log_likelihood.value().sum();
        if (s == 0) {
            const Matrix kl = nn::categorical_kl(enc.posterior_logits, enc.prior_logits).value();
            report.kl_per_interval.assign(K, 0.0);
            for (int k = 0; k < K; ++k) {
                report.kl_per_interval[k] = kl.block(0, static_cast<Eigen::Index>(k) * P, 1, P).sum();
            }
            report.kl = kl.sum();
        }
    }
    report.reconstruction /= num_samples;
    report.elbo = report.reconstruction - report.kl;
    return report;
}

NextEventPrediction VaeTpp::predict_next(const EventSequence& prefix, const ForwardOptions& opts) const {
    const int U = config_.num_types;
    Tape tape(false);
    const EncoderOutput enc = encode(tape, prefix);
    const DecoderOutput dec = decode(tape, prefix, latents(tape, enc, opts));
    const Matrix& state = dec.final_state.value();
    const Matrix& own = dec.type_states.value();

    Eigen::VectorXd last = Eigen::VectorXd::Zero(U);
    for (const auto& e : prefix.events()) {
        last(e.type) = e.t;
    }
    NextEventPrediction out;
    out.density_time.resize(U);
    const Matrix tau_hat = time_head_.apply(tape, tape.constant(own)).value();
    out.point_time = last + tau_hat.row(0).transpose();
    for (int u = 0; u < U; ++u) {
        out.density_time(u) = last(u) + nn::lognormal_mixture_mean(heads_.params(own.col(u)));
    }
    const Eigen::VectorXd theta =
        prefix.empty() ? Eigen::VectorXd::Zero(config_.decoder_hidden) : Eigen::VectorXd(state.col(prefix.events().back().type));
    out.type_probs = nn::softmax(type_head_.apply(tape, tape.constant(theta)).value().col(0));
    Eigen::Index arg;
    out.type_probs.maxCoeff(&arg);
    out.predicted_type = static_cast<int>(arg);
    return out;
}

namespace {

Matrix edge_table(const Matrix& logits, int K, int P) {
    Matrix probs(K, P);
    for (int k = 0; k < K; ++k) {
        for (int p = 0; p < P; ++p) {
            probs(k, p) = 1.0 - nn::softmax(logits.col(static_cast<Eigen::Index>(k) * P + p))(0);
        }
    }
    return probs;
}

} // namespace

Matrix VaeTpp::edge_probabilities(const EventSequence& seq) const {
    Tape tape(false);
    return edge_table(encode(tape, seq).posterior_logits.value(), config_.num_intervals, num_pairs());
}

Matrix VaeTpp::prior_edge_probabilities(const EventSequence& seq) const {
    Tape tape(false);
    return edge_table(encode(tape, seq).prior_logits.value(), config_.num_intervals, num_pairs());
}

void VaeTpp::permute_types(const std::vector<int>& perm) {
    const int U = config_.num_types, Hd = config_.decoder_hidden;
    std::vector<bool> seen(U, false);
    if (static_cast<int>(perm.size()) != U) {
        throw ValidationError("permutation must list every type");
    }
    for (int p : perm) {
        if (p < 0 || p >= U || seen[p]) {
            throw ValidationError("not a permutation of the type ids");
        }
        seen[p] = true;
    }
    auto permute_cols = [&](Matrix& m, Eigen::Index offset) {
        const Matrix old = m;
        for (int t = 0; t < U; ++t) {
            m.col(offset + perm[t]) = old.col(offset + t);
        }
    };
    auto permute_rows = [&](Matrix& m) {
        const Matrix old = m;
        for (int t = 0; t < U; ++t) {
            m.row(perm[t]) = old.row(t);
        }
    };
    permute_cols(store_.at("enc.embed.0.weight").value, 4);
    permute_cols(store_.at("dec.gru.input_weight").value, Hd + 2);
    permute_cols(store_.at("dec.gru.input_weight").value, Hd + 2 + U);
    permute_rows(store_.at("dec.type.weight").value);
    permute_rows(store_.at("dec.type.bias").value);
}

std::map<std::string, Matrix> VaeTpp::state() const {
    auto out = store_.snapshot();
    norm_.write(out);
    return out;
}

void VaeTpp::load_state(const std::map<std::string, Matrix>& tensors) {
    store_.restore(tensors);
    norm_ = Normalizer::read(tensors);
}

} // namespace vaetpp::model
