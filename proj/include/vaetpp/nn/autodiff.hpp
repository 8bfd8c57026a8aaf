#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace vaetpp::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// A trainable tensor. Gradients accumulate into `grad` on Tape::backward.
struct Parameter {
    Matrix value;
    Matrix grad;

    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while its tape lives.
class Var {
public:
    Var() = default;

    const Matrix& value() const;
    /// Gradient of the last backward() target with respect to this node
    /// (zero-sized if the node did not receive any).
    const Matrix& grad() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    double scalar() const;

    Tape* tape() const { return tape_; }
    int index() const { return index_; }
    bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, int index) : tape_(tape), index_(index) {}

    Tape* tape_ = nullptr;
    int index_ = -1;
};

/// Records matrix operations and replays them in reverse for gradients.
///
/// Every value is a dense column-major matrix; batched ops treat columns as
/// independent samples. A tape constructed with record_gradients = false only
/// evaluates (no closures are kept).
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, int self)>;

    explicit Tape(bool record_gradients = true) : record_(record_gradients) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const noexcept { return record_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    Var constant(Matrix value);
    /// Differentiable leaf not bound to a Parameter; read its gradient via Var::grad().
    Var input(Matrix value);
    /// Leaf for a Parameter. Repeated calls with the same parameter return the same node.
    Var param(Parameter& p);

    /// Reverse sweep from a 1x1 node; parameter gradients are added to Parameter::grad.
    void backward(const Var& output);

    // Op-author interface.
    Var push(Matrix value, const std::vector<Var>& parents, BackwardFn fn);
    const Matrix& value(int i) const { return nodes_[i].value; }
    const Matrix& grad(int i) const { return nodes_[i].grad; }
    bool needs_grad(int i) const { return nodes_[i].needs_grad; }
    /// Accumulates g into node i's gradient buffer (allocated on first use).
    void accumulate(int i, const Matrix& g);
    template <typename Expr>
    void accumulate_expr(int i, const Expr& g) {
        auto& n = nodes_[i];
        if (!n.needs_grad) {
            return;
        }
        if (n.grad.size() == 0) {
            n.grad = g;
        } else {
            n.grad += g;
        }
    }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        BackwardFn backward;
        Parameter* param = nullptr;
        bool needs_grad = false;
    };

    bool record_;
    std::vector<Node> nodes_;
    std::unordered_map<Parameter*, int> param_nodes_;
};

// --- elementwise and linear algebra -------------------------------------

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var matmul(const Var& a, const Var& b);
/// X (r x c) + b (r x 1) added to every column.
Var add_bias(const Var& x, const Var& b);
/// X (r x c) with column j multiplied by w(0, j); w is 1 x c.
Var scale_columns(const Var& x, const Var& w);
/// X (r x c) with row i multiplied by w(i, 0); w is r x 1.
Var scale_rows(const Var& x, const Var& w);

Var relu(const Var& x);
Var elu(const Var& x);
Var sigmoid(const Var& x);
Var tanh(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var square(const Var& x);
/// Elementwise clamp; gradient is zero where the bound is active.
Var clamp(const Var& x, double lo, double hi);

// --- reshaping -----------------------------------------------------------

Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(const Var& x, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& x, Eigen::Index start, Eigen::Index count);
/// out(:, j) = x(:, index[j])
Var gather_cols(const Var& x, const std::vector<int>& index);
/// out(:, index[j]) += x(:, j); out has `num_cols` columns.
Var scatter_add_cols(const Var& x, const std::vector<int>& index, Eigen::Index num_cols);
/// Each output column is the mean of the listed input columns; an empty list gives zeros.
Var mean_cols(const Var& x, const std::vector<std::vector<int>>& groups);

// --- reductions and normalizers -----------------------------------------

Var sum(const Var& x);                    // 1 x 1
Var col_sums(const Var& x);               // 1 x c
Var log_softmax_cols(const Var& x);
Var softmax_cols(const Var& x);
Var logsumexp_cols(const Var& x);          // 1 x c
/// Forward: one-hot of each column's argmax (ties to the lower row).
/// Backward: identity (straight-through).
Var straight_through_hard(const Var& soft);

/// Column-wise log-normal mixture log-density.
/// logits, mu, log_sigma: C x n; log_tau: 1 x n constant. Returns 1 x n.
Var lognormal_mixture_logpdf(const Var& logits, const Var& mu, const Var& log_sigma, const RowVector& log_tau);

/// Column-wise KL(softmax(q) || softmax(p)); returns 1 x n.
Var categorical_kl(const Var& q_logits, const Var& p_logits);

} // namespace vaetpp::nn
