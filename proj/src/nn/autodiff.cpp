#include "vaetpp/nn/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vaetpp::nn {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()) + ")");
    }
}

void require_same_tape(const Var& a, const Var& b) {
    if (a.tape() != b.tape()) {
        throw std::invalid_argument("operands live on different tapes");
    }
}

Matrix column_softmax(const Matrix& x) {
    Matrix y = x;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double m = x.col(j).maxCoeff();
        y.col(j) = (x.col(j).array() - m).exp();
        y.col(j) /= y.col(j).sum();
    }
    return y;
}

RowVector column_logsumexp(const Matrix& x) {
    RowVector out(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double m = x.col(j).maxCoeff();
        out(j) = m + std::log((x.col(j).array() - m).exp().sum());
    }
    return out;
}

} // namespace

const Matrix& Var::value() const { return tape_->value(index_); }
const Matrix& Var::grad() const { return tape_->grad(index_); }

double Var::scalar() const {
    const auto& v = value();
    if (v.size() != 1) {
        throw std::invalid_argument("scalar() on a non-1x1 value");
    }
    return v(0, 0);
}

Var Tape::constant(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::input(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, {}, nullptr, record_});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(Parameter& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) {
        return Var(this, it->second);
    }
    // Copy: the parameter may be updated while this tape is still alive.
    nodes_.push_back(Node{p.value, {}, {}, &p, record_});
    const int id = static_cast<int>(nodes_.size()) - 1;
    param_nodes_.emplace(&p, id);
    return Var(this, id);
}

Var Tape::push(Matrix value, const std::vector<Var>& parents, BackwardFn fn) {
    bool needs = false;
    if (record_) {
        for (const auto& p : parents) {
            if (p.tape() != this) {
                throw std::invalid_argument("operand from another tape");
            }
            needs = needs || nodes_[p.index()].needs_grad;
        }
    }
    nodes_.push_back(Node{std::move(value), {}, needs ? std::move(fn) : BackwardFn{}, nullptr, needs});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(int i, const Matrix& g) { accumulate_expr(i, g); }

void Tape::backward(const Var& output) {
    if (!record_) {
        throw std::logic_error("backward() on a tape that does not record gradients");
    }
    if (output.tape() != this || output.value().size() != 1) {
        throw std::invalid_argument("backward() needs a 1x1 node from this tape");
    }
    for (auto& n : nodes_) {
        n.grad.resize(0, 0);
    }
    nodes_[output.index()].grad = Matrix::Ones(1, 1);
    for (int i = output.index(); i >= 0; --i) {
        auto& n = nodes_[i];
        if (n.grad.size() == 0) {
            continue;
        }
        if (n.backward) {
            n.backward(*this, i);
        }
        if (n.param != nullptr) {
            if (n.param->grad.size() == 0) {
                n.param->zero_grad();
            }
            n.param->grad += n.grad;
        }
    }
}

// --- elementwise and linear algebra -------------------------------------

Var add(const Var& a, const Var& b) {
    require_same_tape(a, b);
    require_same_shape(a, b, "add");
    const int ia = a.index(), ib = b.index();
    return a.tape()->push(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, int self) {
        t.accumulate(ia, t.grad(self));
        t.accumulate(ib, t.grad(self));
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_tape(a, b);
    require_same_shape(a, b, "sub");
    const int ia = a.index(), ib = b.index();
    return a.tape()->push(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, int self) {
        t.accumulate(ia, t.grad(self));
        t.accumulate_expr(ib, -t.grad(self));
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_tape(a, b);
    require_same_shape(a, b, "mul");
    const int ia = a.index(), ib = b.index();
    return a.tape()->push(a.value().cwiseProduct(b.value()), {a, b}, [ia, ib](Tape& t, int self) {
        t.accumulate_expr(ia, t.grad(self).cwiseProduct(t.value(ib)));
        t.accumulate_expr(ib, t.grad(self).cwiseProduct(t.value(ia)));
    });
}

Var scale(const Var& a, double s) {
    const int ia = a.index();
    return a.tape()->push(a.value() * s, {a}, [ia, s](Tape& t, int self) { t.accumulate_expr(ia, t.grad(self) * s); });
}

Var add_scalar(const Var& a, double s) {
    const int ia = a.index();
    return a.tape()->push(a.value().array() + s, {a}, [ia](Tape& t, int self) { t.accumulate(ia, t.grad(self)); });
}

Var matmul(const Var& a, const Var& b) {
    require_same_tape(a, b);
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.rows()) + ")");
    }
    const int ia = a.index(), ib = b.index();
    // Coefficient-wise product: each output column depends only on its own
    // input column, whatever the batch width. Blocked GEMM does not promise that.
    Matrix out = a.value().lazyProduct(b.value());
    return a.tape()->push(std::move(out), {a, b}, [ia, ib](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        if (t.needs_grad(ia)) {
            t.accumulate_expr(ia, g * t.value(ib).transpose());
        }
        if (t.needs_grad(ib)) {
            t.accumulate_expr(ib, t.value(ia).transpose() * g);
        }
    });
}

Var add_bias(const Var& x, const Var& b) {
    require_same_tape(x, b);
    if (b.cols() != 1 || b.rows() != x.rows()) {
        throw std::invalid_argument("add_bias: bias must be a column with as many rows as the input");
    }
    const int ix = x.index(), ib = b.index();
    Matrix out = x.value().colwise() + b.value().col(0);
    return x.tape()->push(std::move(out), {x, b}, [ix, ib](Tape& t, int self) {
        t.accumulate(ix, t.grad(self));
        t.accumulate_expr(ib, t.grad(self).rowwise().sum());
    });
}

Var scale_columns(const Var& x, const Var& w) {
    require_same_tape(x, w);
    if (w.rows() != 1 || w.cols() != x.cols()) {
        throw std::invalid_argument("scale_columns: weights must be 1 x cols");
    }
    const int ix = x.index(), iw = w.index();
    Matrix out = x.value().array().rowwise() * w.value().row(0).array();
    return x.tape()->push(std::move(out), {x, w}, [ix, iw](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        t.accumulate_expr(ix, (g.array().rowwise() * t.value(iw).row(0).array()).matrix());
        t.accumulate_expr(iw, g.cwiseProduct(t.value(ix)).colwise().sum());
    });
}

Var scale_rows(const Var& x, const Var& w) {
    require_same_tape(x, w);
    if (w.cols() != 1 || w.rows() != x.rows()) {
        throw std::invalid_argument("scale_rows: weights must be rows x 1");
    }
    const int ix = x.index(), iw = w.index();
    Matrix out = x.value().array().colwise() * w.value().col(0).array();
    return x.tape()->push(std::move(out), {x, w}, [ix, iw](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        t.accumulate_expr(ix, (g.array().colwise() * t.value(iw).col(0).array()).matrix());
        t.accumulate_expr(iw, g.cwiseProduct(t.value(ix)).rowwise().sum());
    });
}

Var relu(const Var& x) {
    const int ix = x.index();
    return x.tape()->push(x.value().cwiseMax(0.0), {x}, [ix](Tape& t, int self) {
        t.accumulate_expr(ix, (t.value(ix).array() > 0.0).select(t.grad(self), 0.0).matrix());
    });
}

Var elu(const Var& x) {
    const int ix = x.index();
    Matrix out = (x.value().array() > 0.0).select(x.value().array(), x.value().array().exp() - 1.0);
    return x.tape()->push(std::move(out), {x}, [ix](Tape& t, int self) {
        const auto& xv = t.value(ix).array();
        const auto& yv = t.value(self).array();
        t.accumulate_expr(ix, (t.grad(self).array() * (xv > 0.0).select(1.0, yv + 1.0)).matrix());
    });
}

Var sigmoid(const Var& x) {
    const int ix = x.index();
    Matrix out = (1.0 + (-x.value().array()).exp()).inverse();
    return x.tape()->push(std::move(out), {x}, [ix](Tape& t, int self) {
        const auto& y = t.value(self).array();
        t.accumulate_expr(ix, (t.grad(self).array() * y * (1.0 - y)).matrix());
    });
}

Var tanh(const Var& x) {
    const int ix = x.index();
    return x.tape()->push(x.value().array().tanh().matrix(), {x}, [ix](Tape& t, int self) {
        const auto& y = t.value(self).array();
        t.accumulate_expr(ix, (t.grad(self).array() * (1.0 - y.square())).matrix());
    });
}

Var exp(const Var& x) {
    const int ix = x.index();
    return x.tape()->push(x.value().array().exp().matrix(), {x}, [ix](Tape& t, int self) {
        t.accumulate_expr(ix, t.grad(self).cwiseProduct(t.value(self)));
    });
}

Var log(const Var& x) {
    const int ix = x.index();
    return x.tape()->push(x.value().array().log().matrix(), {x}, [ix](Tape& t, int self) {
        t.accumulate_expr(ix, t.grad(self).cwiseQuotient(t.value(ix)));
    });
}

Var square(const Var& x) {
    const int ix = x.index();
    return x.tape()->push(x.value().array().square().matrix(), {x}, [ix](Tape& t, int self) {
        t.accumulate_expr(ix, 2.0 * t.grad(self).cwiseProduct(t.value(ix)));
    });
}

Var clamp(const Var& x, double lo, double hi) {
    const int ix = x.index();
    Matrix out = x.value().cwiseMax(lo).cwiseMin(hi);
    return x.tape()->push(std::move(out), {x}, [ix, lo, hi](Tape& t, int self) {
        const auto& xv = t.value(ix).array();
        t.accumulate_expr(ix, ((xv > lo) && (xv < hi)).select(t.grad(self), 0.0).matrix());
    });
}

// --- reshaping -----------------------------------------------------------

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) {
        throw std::invalid_argument("concat_rows: no parts");
    }
    Tape* tape = parts.front().tape();
    const Eigen::Index cols = parts.front().cols();
    Eigen::Index rows = 0;
    for (const auto& p : parts) {
        if (p.tape() != tape || p.cols() != cols) {
            throw std::invalid_argument("concat_rows: column counts differ");
        }
        rows += p.rows();
    }
    Matrix out(rows, cols);
    std::vector<std::pair<int, Eigen::Index>> layout;
    Eigen::Index r = 0;
    for (const auto& p : parts) {
        out.middleRows(r, p.rows()) = p.value();
        layout.emplace_back(p.index(), r);
        r += p.rows();
    }
    return tape->push(std::move(out), parts, [layout](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        for (const auto& [id, start] : layout) {
            t.accumulate_expr(id, g.middleRows(start, t.value(id).rows()));
        }
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) {
        throw std::invalid_argument("concat_cols: no parts");
    }
    Tape* tape = parts.front().tape();
    const Eigen::Index rows = parts.front().rows();
    Eigen::Index cols = 0;
    for (const auto& p : parts) {
        if (p.tape() != tape || p.rows() != rows) {
            throw std::invalid_argument("concat_cols: row counts differ");
        }
        cols += p.cols();
    }
    Matrix out(rows, cols);
    std::vector<std::pair<int, Eigen::Index>> layout;
    Eigen::Index c = 0;
    for (const auto& p : parts) {
        out.middleCols(c, p.cols()) = p.value();
        layout.emplace_back(p.index(), c);
        c += p.cols();
    }
    return tape->push(std::move(out), parts, [layout](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        for (const auto& [id, start] : layout) {
            t.accumulate_expr(id, g.middleCols(start, t.value(id).cols()));
        }
    });
}

Var slice_rows(const Var& x, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > x.rows()) {
        throw std::invalid_argument("slice_rows: range out of bounds");
    }
    const int ix = x.index();
    return x.tape()->push(x.value().middleRows(start, count), {x}, [ix, start, count](Tape& t, int self) {
        Matrix g = Matrix::Zero(t.value(ix).rows(), t.value(ix).cols());
        g.middleRows(start, count) = t.grad(self);
        t.accumulate(ix, g);
    });
}

Var slice_cols(const Var& x, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > x.cols()) {
        throw std::invalid_argument("slice_cols: range out of bounds");
    }
    const int ix = x.index();
    return x.tape()->push(x.value().middleCols(start, count), {x}, [ix, start, count](Tape& t, int self) {
        Matrix g = Matrix::Zero(t.value(ix).rows(), t.value(ix).cols());
        g.middleCols(start, count) = t.grad(self);
        t.accumulate(ix, g);
    });
}

Var gather_cols(const Var& x, const std::vector<int>& index) {
    const Matrix& xv = x.value();
    Matrix out(xv.rows(), static_cast<Eigen::Index>(index.size()));
    for (std::size_t j = 0; j < index.size(); ++j) {
        if (index[j] < 0 || index[j] >= xv.cols()) {
            throw std::invalid_argument("gather_cols: index out of range");
        }
        out.col(j) = xv.col(index[j]);
    }
    const int ix = x.index();
    return x.tape()->push(std::move(out), {x}, [ix, index](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        Matrix gx = Matrix::Zero(t.value(ix).rows(), t.value(ix).cols());
        for (std::size_t j = 0; j < index.size(); ++j) {
            gx.col(index[j]) += g.col(j);
        }
        t.accumulate(ix, gx);
    });
}

Var scatter_add_cols(const Var& x, const std::vector<int>& index, Eigen::Index num_cols) {
    const Matrix& xv = x.value();
    if (static_cast<Eigen::Index>(index.size()) != xv.cols()) {
        throw std::invalid_argument("scatter_add_cols: one index per input column required");
    }
    Matrix out = Matrix::Zero(xv.rows(), num_cols);
    for (std::size_t j = 0; j < index.size(); ++j) {
        if (index[j] < 0 || index[j] >= num_cols) {
            throw std::invalid_argument("scatter_add_cols: index out of range");
        }
        out.col(index[j]) += xv.col(j);
    }
    const int ix = x.index();
    return x.tape()->push(std::move(out), {x}, [ix, index](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        Matrix gx(g.rows(), static_cast<Eigen::Index>(index.size()));
        for (std::size_t j = 0; j < index.size(); ++j) {
            gx.col(j) = g.col(index[j]);
        }
        t.accumulate(ix, gx);
    });
}

Var mean_cols(const Var& x, const std::vector<std::vector<int>>& groups) {
    const Matrix& xv = x.value();
    Matrix out = Matrix::Zero(xv.rows(), static_cast<Eigen::Index>(groups.size()));
    for (std::size_t k = 0; k < groups.size(); ++k) {
        for (int j : groups[k]) {
            if (j < 0 || j >= xv.cols()) {
                throw std::invalid_argument("mean_cols: index out of range");
            }
            out.col(k) += xv.col(j);
        }
        if (!groups[k].empty()) {
            out.col(k) /= static_cast<double>(groups[k].size());
        }
    }
    const int ix = x.index();
    return x.tape()->push(std::move(out), {x}, [ix, groups](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        Matrix gx = Matrix::Zero(t.value(ix).rows(), t.value(ix).cols());
        for (std::size_t k = 0; k < groups.size(); ++k) {
            for (int j : groups[k]) {
                gx.col(j) += g.col(k) / static_cast<double>(groups[k].size());
            }
        }
        t.accumulate(ix, gx);
    });
}

// --- reductions and normalizers -----------------------------------------

Var sum(const Var& x) {
    const int ix = x.index();
    Matrix out(1, 1);
    out(0, 0) = x.value().sum();
    return x.tape()->push(std::move(out), {x}, [ix](Tape& t, int self) {
        t.accumulate_expr(ix, Matrix::Constant(t.value(ix).rows(), t.value(ix).cols(), t.grad(self)(0, 0)));
    });
}

Var col_sums(const Var& x) {
    const int ix = x.index();
    return x.tape()->push(x.value().colwise().sum(), {x}, [ix](Tape& t, int self) {
        t.accumulate_expr(ix, Matrix::Ones(t.value(ix).rows(), 1) * t.grad(self));
    });
}

Var log_softmax_cols(const Var& x) {
    const int ix = x.index();
    Matrix out = x.value().rowwise() - column_logsumexp(x.value());
    return x.tape()->push(std::move(out), {x}, [ix](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        const Matrix p = t.value(self).array().exp();
        t.accumulate_expr(ix, g - (p.array().rowwise() * g.colwise().sum().array()).matrix());
    });
}

Var softmax_cols(const Var& x) {
    const int ix = x.index();
    return x.tape()->push(column_softmax(x.value()), {x}, [ix](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        const Matrix& y = t.value(self);
        const RowVector inner = g.cwiseProduct(y).colwise().sum();
        t.accumulate_expr(ix, y.cwiseProduct((g.rowwise() - inner)));
    });
}

Var logsumexp_cols(const Var& x) {
    const int ix = x.index();
    return x.tape()->push(column_logsumexp(x.value()), {x}, [ix](Tape& t, int self) {
        const Matrix p = column_softmax(t.value(ix));
        t.accumulate_expr(ix, (p.array().rowwise() * t.grad(self).row(0).array()).matrix());
    });
}

Var straight_through_hard(const Var& soft) {
    const Matrix& s = soft.value();
    Matrix out = Matrix::Zero(s.rows(), s.cols());
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
        Eigen::Index best = 0;
        for (Eigen::Index r = 1; r < s.rows(); ++r) {
            if (s(r, j) > s(best, j)) {
                best = r;
            }
        }
        out(best, j) = 1.0;
    }
    const int ix = soft.index();
    return soft.tape()->push(std::move(out), {soft}, [ix](Tape& t, int self) { t.accumulate(ix, t.grad(self)); });
}

Var lognormal_mixture_logpdf(const Var& logits, const Var& mu, const Var& log_sigma, const RowVector& log_tau) {
    require_same_tape(logits, mu);
    require_same_tape(logits, log_sigma);
    require_same_shape(logits, mu, "lognormal_mixture_logpdf");
    require_same_shape(logits, log_sigma, "lognormal_mixture_logpdf");
    if (log_tau.size() != logits.cols()) {
        throw std::invalid_argument("lognormal_mixture_logpdf: one log-time per column required");
    }
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);

    const Matrix weights = column_softmax(logits.value());
    const Matrix log_weights = logits.value().rowwise() - column_logsumexp(logits.value());
    const Matrix inv_sigma = (-log_sigma.value().array()).exp();
    // standardized residual d = (log tau - mu) / sigma
    Matrix d = ((-mu.value()).rowwise() + log_tau).cwiseProduct(inv_sigma);
    Matrix comp = log_weights - log_sigma.value() - 0.5 * d.array().square().matrix();
    comp.array().rowwise() -= (log_tau.array() + half_log_2pi);
    const RowVector out = column_logsumexp(comp);
    Matrix resp = (comp.rowwise() - out).array().exp();

    const int il = logits.index(), im = mu.index(), is = log_sigma.index();
    return logits.tape()->push(
        Matrix(out), {logits, mu, log_sigma},
        [il, im, is, weights, inv_sigma, d = std::move(d), resp = std::move(resp)](Tape& t, int self) {
            const RowVector g = t.grad(self).row(0);
            const Matrix rg = resp.array().rowwise() * g.array();
            t.accumulate_expr(il, rg - (weights.array().rowwise() * g.array()).matrix());
            t.accumulate_expr(im, rg.cwiseProduct(d).cwiseProduct(inv_sigma));
            t.accumulate_expr(is, rg.cwiseProduct((d.array().square() - 1.0).matrix()));
        });
}

Var categorical_kl(const Var& q_logits, const Var& p_logits) {
    require_same_tape(q_logits, p_logits);
    require_same_shape(q_logits, p_logits, "categorical_kl");
    const Matrix lq = q_logits.value().rowwise() - column_logsumexp(q_logits.value());
    const Matrix lp = p_logits.value().rowwise() - column_logsumexp(p_logits.value());
    const Matrix q = lq.array().exp();
    const Matrix p = lp.array().exp();
    Matrix diff = lq - lp;
    RowVector kl = q.cwiseProduct(diff).colwise().sum();
    // Rounding can leave tiny negatives when q == p.
    kl = kl.cwiseMax(0.0);
    const int iq = q_logits.index(), ip = p_logits.index();
    return q_logits.tape()->push(Matrix(kl), {q_logits, p_logits},
                                 [iq, ip, q, p, diff = std::move(diff), kl](Tape& t, int self) {
                                     const RowVector g = t.grad(self).row(0);
                                     const Matrix centred = diff.rowwise() - kl;
                                     t.accumulate_expr(
                                         iq, (q.cwiseProduct(centred).array().rowwise() * g.array()).matrix());
                                     t.accumulate_expr(ip, ((p - q).array().rowwise() * g.array()).matrix());
                                 });
}

} // namespace vaetpp::nn
