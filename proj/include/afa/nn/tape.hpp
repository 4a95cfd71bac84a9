#pragma once

#include <Eigen/Core>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace afa::nn {

using Mat = Eigen::MatrixXd;

struct Parameter {
    std::string name;
    Mat value;
    Mat grad;

    Parameter(std::string n, Mat v) : name(std::move(n)), value(std::move(v)) {
        grad = Mat::Zero(value.rows(), value.cols());
    }
    void zero_grad() { grad.setZero(); }
    Eigen::Index size() const { return value.size(); }
};

// Flat collection of named parameters; owns storage so layers can hold raw
// pointers. Iteration order is creation order, which optimizers and the
// checkpoint format rely on.
class ParameterSet {
public:
    Parameter* add(const std::string& name, Mat value);
    Parameter* find(const std::string& name) const;

    const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }
    size_t count() const { return params_.size(); }
    Eigen::Index total_size() const;

    void zero_grad();
    // Copies values from a layout-identical set (parameter snapshots).
    void copy_values_from(const ParameterSet& other);

private:
    std::vector<std::unique_ptr<Parameter>> params_;
};

class Graph;

struct Node {
    Mat val;
    Mat grad;
    std::function<void()> back;
};

// Lightweight handle into a Graph's tape.
struct Var {
    Graph* g = nullptr;
    Node* n = nullptr;

    const Mat& val() const { return n->val; }
    Mat& grad() const { return n->grad; }
    Eigen::Index rows() const { return n->val.rows(); }
    Eigen::Index cols() const { return n->val.cols(); }
};

// Reverse-mode tape. Build a graph per forward pass, call backward once on a
// scalar node, then discard. With grad disabled the same code path runs as a
// plain forward evaluation.
class Graph {
public:
    explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }

    Var input(Mat v);
    Var constant(double v) { return input(Mat::Constant(1, 1, v)); }
    Var param(Parameter& p);

    // Seeds d(loss)/d(loss) = 1 and runs the tape in reverse. `loss` must be 1x1.
    void backward(const Var& loss);

    size_t size() const { return nodes_.size(); }

    Var make(Mat val, std::function<void()> back = nullptr);

private:
    std::deque<Node> nodes_;
    bool grad_enabled_;
};

// --- elementwise and affine ops --------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);            // elementwise
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var neg(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var tanh_op(Var a);
Var exp_op(Var a);
Var log_op(Var a);
Var square(Var a);
Var softplus(Var a);              // log(1 + e^x), stable
Var logaddexp(Var a, Var b);      // elementwise log(e^a + e^b), stable

// x: (B x in), W: (out x in), b: (out x 1)  ->  (B x out)
Var affine(Var x, Var W, Var b);
// x * W^T without bias, same shapes as affine.
Var linear(Var x, Var W);
Var matmul(Var a, Var b);

Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, int start, int len);
// out(i, 0) = a(i, idx[i]); used to pick the chosen action's log-probability.
Var gather_cols(Var a, const std::vector<int>& idx);

Var sum_all(Var a);               // 1x1
Var log_softmax_rows(Var a);

// Cuts the gradient; the result is a constant holding a's current value.
Var detach(Var a);

// --- convolution ------------------------------------------------------------

struct ConvSpec {
    int in_channels = 1, in_h = 0, in_w = 0;
    int out_channels = 1, kernel = 3, stride = 1, pad = 0;

    int out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
    int out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
    int in_dim() const { return in_channels * in_h * in_w; }
    int out_dim() const { return out_channels * out_h() * out_w(); }
};

// x: (B x Cin*H*W) with c-major rows, W: (Cout x Cin*K*K), b: (Cout x 1).
Var conv2d(Var x, Var W, Var b, const ConvSpec& spec);

struct ConvTransposeSpec {
    int in_channels = 1, in_h = 0, in_w = 0;
    int out_channels = 1, kernel = 3, stride = 1, pad = 0;

    int out_h() const { return (in_h - 1) * stride - 2 * pad + kernel; }
    int out_w() const { return (in_w - 1) * stride - 2 * pad + kernel; }
    int in_dim() const { return in_channels * in_h * in_w; }
    int out_dim() const { return out_channels * out_h() * out_w(); }
};

// x: (B x Cin*H*W), W: (Cin x Cout*K*K), b: (Cout x 1).
Var conv2d_transpose(Var x, Var W, Var b, const ConvTransposeSpec& spec);

}  // namespace afa::nn
