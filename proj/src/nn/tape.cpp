#include "afa/nn/tape.hpp"

#include <cmath>

#include "afa/core/errors.hpp"

namespace afa::nn {

Parameter* ParameterSet::add(const std::string& name, Mat value) {
    afa::require(find(name) == nullptr, "duplicate parameter name: " + name);
    params_.push_back(std::make_unique<Parameter>(name, std::move(value)));
    return params_.back().get();
}

Parameter* ParameterSet::find(const std::string& name) const {
    for (const auto& p : params_)
        if (p->name == name) return p.get();
    return nullptr;
}

Eigen::Index ParameterSet::total_size() const {
    Eigen::Index n = 0;
    for (const auto& p : params_) n += p->size();
    return n;
}

void ParameterSet::zero_grad() {
    for (const auto& p : params_) p->zero_grad();
}

void ParameterSet::copy_values_from(const ParameterSet& other) {
    afa::require(params_.size() == other.params_.size(),
                 "copy_values_from: parameter count mismatch");
    for (size_t i = 0; i < params_.size(); ++i) {
        afa::require(params_[i]->value.rows() == other.params_[i]->value.rows() &&
                         params_[i]->value.cols() == other.params_[i]->value.cols(),
                     "copy_values_from: shape mismatch at " + params_[i]->name);
        params_[i]->value = other.params_[i]->value;
    }
}

Var Graph::make(Mat val, std::function<void()> back) {
    nodes_.push_back(Node{std::move(val), Mat(), grad_enabled_ ? std::move(back) : nullptr});
    Node* n = &nodes_.back();
    if (grad_enabled_) n->grad = Mat::Zero(n->val.rows(), n->val.cols());
    return Var{this, n};
}

Var Graph::input(Mat v) { return make(std::move(v)); }

Var Graph::param(Parameter& p) {
    Var out = make(p.value);
    if (grad_enabled_) {
        Node* n = out.n;
        Parameter* pp = &p;
        n->back = [n, pp]() { pp->grad += n->grad; };
    }
    return out;
}

void Graph::backward(const Var& loss) {
    afa::require(grad_enabled_, "backward() on a grad-disabled graph");
    afa::require(loss.n->val.size() == 1, "backward() expects a scalar loss");
    loss.n->grad(0, 0) = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
        if (it->back) it->back();
}

namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
    afa::require(a.rows() == b.rows() && a.cols() == b.cols(),
                 std::string(op) + ": shape mismatch");
}

}  // namespace

Var add(Var a, Var b) {
    check_same_shape(a, b, "add");
    Var out = a.g->make(a.val() + b.val());
    if (a.g->grad_enabled()) {
        Node *na = a.n, *nb = b.n, *no = out.n;
        no->back = [na, nb, no]() {
            na->grad += no->grad;
            nb->grad += no->grad;
        };
    }
    return out;
}

Var sub(Var a, Var b) {
    check_same_shape(a, b, "sub");
    Var out = a.g->make(a.val() - b.val());
    if (a.g->grad_enabled()) {
        Node *na = a.n, *nb = b.n, *no = out.n;
        no->back = [na, nb, no]() {
            na->grad += no->grad;
            nb->grad -= no->grad;
        };
    }
    return out;
}

Var mul(Var a, Var b) {
    check_same_shape(a, b, "mul");
    Var out = a.g->make(a.val().cwiseProduct(b.val()));
    if (a.g->grad_enabled()) {
        Node *na = a.n, *nb = b.n, *no = out.n;
        no->back = [na, nb, no]() {
            na->grad += no->grad.cwiseProduct(nb->val);
            nb->grad += no->grad.cwiseProduct(na->val);
        };
    }
    return out;
}

Var scale(Var a, double c) {
    Var out = a.g->make(a.val() * c);
    if (a.g->grad_enabled()) {
        Node *na = a.n, *no = out.n;
        no->back = [na, no, c]() { na->grad += no->grad * c; };
    }
    return out;
}

Var add_scalar(Var a, double c) {
    Var out = a.g->make(a.val().array() + c);
    if (a.g->grad_enabled()) {
        Node *na = a.n, *no = out.n;
        no->back = [na, no]() { na->grad += no->grad; };
    }
    return out;
}

Var neg(Var a) { return scale(a, -1.0); }

Var relu(Var a) {
    Var out = a.g->make(a.val().cwiseMax(0.0));
    if (a.g->grad_enabled()) {
        Node *na = a.n, *no = out.n;
        no->back = [na, no]() {
            na->grad.array() += no->grad.array() * (na->val.array() > 0.0).cast<double>();
        };
    }
    return out;
}

Var sigmoid(Var a) {
    // Stable: never exponentiates a large positive magnitude.
    Mat s = a.val().unaryExpr([](double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    });
    Var out = a.g->make(std::move(s));
    if (a.g->grad_enabled()) {
        Node *na = a.n, *no = out.n;
        no->back = [na, no]() {
            na->grad.array() += no->grad.array() * no->val.array() * (1.0 - no->val.array());
        };
    }
    return out;
}

Var tanh_op(Var a) {
    Var out = a.g->make(a.val().array().tanh());
    if (a.g->grad_enabled()) {
        Node *na = a.n, *no = out.n;
        no->back = [na, no]() {
            na->grad.array() += no->grad.array() * (1.0 - no->val.array().square());
        };
    }
    return out;
}

Var exp_op(Var a) {
    Var out = a.g->make(a.val().array().exp());
    if (a.g->grad_enabled()) {
        Node *na = a.n, *no = out.n;
        no->back = [na, no]() { na->grad.array() += no->grad.array() * no->val.array(); };
    }
    return out;
}

Var log_op(Var a) {
    Var out = a.g->make(a.val().array().log());
    if (a.g->grad_enabled()) {
        Node *na = a.n, *no = out.n;
        no->back = [na, no]() { na->grad.array() += no->grad.array() / na->val.array(); };
    }
    return out;
}

Var square(Var a) {
    Var out = a.g->make(a.val().array().square());
    if (a.g->grad_enabled()) {
        Node *na = a.n, *no = out.n;
        no->back = [na, no]() { na->grad.array() += no->grad.array() * 2.0 * na->val.array(); };
    }
    return out;
}

Var softplus(Var a) {
    Mat s = a.val().unaryExpr(
        [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); });
    Var out = a.g->make(std::move(s));
    if (a.g->grad_enabled()) {
        Node *na = a.n, *no = out.n;
        no->back = [na, no]() {
            Mat sig = na->val.unaryExpr([](double x) {
                return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
            });
            na->grad.array() += no->grad.array() * sig.array();
        };
    }
    return out;
}

Var logaddexp(Var a, Var b) {
    check_same_shape(a, b, "logaddexp");
    Mat m = a.val().cwiseMax(b.val());
    Mat out_v = m.array() +
                ((a.val() - m).array().exp() + (b.val() - m).array().exp()).log();
    Var out = a.g->make(std::move(out_v));
    if (a.g->grad_enabled()) {
        Node *na = a.n, *nb = b.n, *no = out.n;
        no->back = [na, nb, no]() {
            na->grad.array() += no->grad.array() * (na->val - no->val).array().exp();
            nb->grad.array() += no->grad.array() * (nb->val - no->val).array().exp();
        };
    }
    return out;
}

Var affine(Var x, Var W, Var b) {
    afa::require(x.cols() == W.cols(), "affine: input width does not match weight");
    afa::require(b.cols() == 1 && b.rows() == W.rows(), "affine: bias shape mismatch");
    Mat out_v = x.val() * W.val().transpose();
    out_v.rowwise() += b.val().col(0).transpose();
    Var out = x.g->make(std::move(out_v));
    if (x.g->grad_enabled()) {
        Node *nx = x.n, *nw = W.n, *nb = b.n, *no = out.n;
        no->back = [nx, nw, nb, no]() {
            nx->grad.noalias() += no->grad * nw->val;
            nw->grad.noalias() += no->grad.transpose() * nx->val;
            nb->grad.col(0) += no->grad.colwise().sum().transpose();
        };
    }
    return out;
}

Var linear(Var x, Var W) {
    afa::require(x.cols() == W.cols(), "linear: input width does not match weight");
    Var out = x.g->make(x.val() * W.val().transpose());
    if (x.g->grad_enabled()) {
        Node *nx = x.n, *nw = W.n, *no = out.n;
        no->back = [nx, nw, no]() {
            nx->grad.noalias() += no->grad * nw->val;
            nw->grad.noalias() += no->grad.transpose() * nx->val;
        };
    }
    return out;
}

Var matmul(Var a, Var b) {
    afa::require(a.cols() == b.rows(), "matmul: inner dimension mismatch");
    Var out = a.g->make(a.val() * b.val());
    if (a.g->grad_enabled()) {
        Node *na = a.n, *nb = b.n, *no = out.n;
        no->back = [na, nb, no]() {
            na->grad.noalias() += no->grad * nb->val.transpose();
            nb->grad.noalias() += na->val.transpose() * no->grad;
        };
    }
    return out;
}

Var concat_cols(const std::vector<Var>& parts) {
    afa::require(!parts.empty(), "concat_cols: empty input");
    Eigen::Index rows = parts[0].rows(), cols = 0;
    for (const Var& p : parts) {
        afa::require(p.rows() == rows, "concat_cols: row count mismatch");
        cols += p.cols();
    }
    Mat out_v(rows, cols);
    Eigen::Index at = 0;
    for (const Var& p : parts) {
        out_v.middleCols(at, p.cols()) = p.val();
        at += p.cols();
    }
    Var out = parts[0].g->make(std::move(out_v));
    if (parts[0].g->grad_enabled()) {
        std::vector<Node*> srcs;
        for (const Var& p : parts) srcs.push_back(p.n);
        Node* no = out.n;
        no->back = [srcs, no]() {
            Eigen::Index at = 0;
            for (Node* s : srcs) {
                s->grad += no->grad.middleCols(at, s->val.cols());
                at += s->val.cols();
            }
        };
    }
    return out;
}

Var slice_cols(Var a, int start, int len) {
    afa::require(start >= 0 && len >= 0 && start + len <= a.cols(),
                 "slice_cols: range out of bounds");
    Var out = a.g->make(a.val().middleCols(start, len));
    if (a.g->grad_enabled()) {
        Node *na = a.n, *no = out.n;
        no->back = [na, no, start, len]() { na->grad.middleCols(start, len) += no->grad; };
    }
    return out;
}

Var gather_cols(Var a, const std::vector<int>& idx) {
    afa::require(static_cast<Eigen::Index>(idx.size()) == a.rows(),
                 "gather_cols: one index per row required");
    Mat out_v(a.rows(), 1);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        afa::require(idx[i] >= 0 && idx[i] < a.cols(), "gather_cols: index out of range");
        out_v(i, 0) = a.val()(i, idx[i]);
    }
    Var out = a.g->make(std::move(out_v));
    if (a.g->grad_enabled()) {
        Node *na = a.n, *no = out.n;
        std::vector<int> ix = idx;
        no->back = [na, no, ix]() {
            for (Eigen::Index i = 0; i < na->val.rows(); ++i)
                na->grad(i, ix[i]) += no->grad(i, 0);
        };
    }
    return out;
}

Var sum_all(Var a) {
    Var out = a.g->make(Mat::Constant(1, 1, a.val().sum()));
    if (a.g->grad_enabled()) {
        Node *na = a.n, *no = out.n;
        no->back = [na, no]() { na->grad.array() += no->grad(0, 0); };
    }
    return out;
}

Var log_softmax_rows(Var a) {
    Mat out_v = a.val();
    for (Eigen::Index i = 0; i < out_v.rows(); ++i) {
        double m = out_v.row(i).maxCoeff();
        double lse = m + std::log((out_v.row(i).array() - m).exp().sum());
        out_v.row(i).array() -= lse;
    }
    Var out = a.g->make(std::move(out_v));
    if (a.g->grad_enabled()) {
        Node *na = a.n, *no = out.n;
        no->back = [na, no]() {
            // d(log_softmax) pulls back as g - softmax * rowsum(g).
            for (Eigen::Index i = 0; i < na->val.rows(); ++i) {
                double gsum = no->grad.row(i).sum();
                na->grad.row(i).array() +=
                    no->grad.row(i).array() - no->val.row(i).array().exp() * gsum;
            }
        };
    }
    return out;
}

Var detach(Var a) { return a.g->input(a.val()); }

// --- convolution -------------------------------------------------------------

namespace {

struct PatchSpec {
    int channels, img_h, img_w;  // image being gathered from / scattered into
    int kernel, stride, pad;
    int grid_h, grid_w;  // number of patch positions
};

// cols: (C*K*K x grid_h*grid_w); cols((c*K+ki)*K+kj, gi*grid_w+gj) =
// img[c, gi*stride-pad+ki, gj*stride-pad+kj] (zero outside the image).
void im2col(const double* img, const PatchSpec& s, Mat& cols) {
    cols.setZero();
    for (int c = 0; c < s.channels; ++c)
        for (int ki = 0; ki < s.kernel; ++ki)
            for (int kj = 0; kj < s.kernel; ++kj) {
                const int row = (c * s.kernel + ki) * s.kernel + kj;
                for (int gi = 0; gi < s.grid_h; ++gi) {
                    const int ii = gi * s.stride - s.pad + ki;
                    if (ii < 0 || ii >= s.img_h) continue;
                    for (int gj = 0; gj < s.grid_w; ++gj) {
                        const int jj = gj * s.stride - s.pad + kj;
                        if (jj < 0 || jj >= s.img_w) continue;
                        cols(row, gi * s.grid_w + gj) = img[(c * s.img_h + ii) * s.img_w + jj];
                    }
                }
            }
}

// Adjoint of im2col: scatter-add patch columns back into the image buffer.
void col2im_add(const Mat& cols, const PatchSpec& s, double* img) {
    for (int c = 0; c < s.channels; ++c)
        for (int ki = 0; ki < s.kernel; ++ki)
            for (int kj = 0; kj < s.kernel; ++kj) {
                const int row = (c * s.kernel + ki) * s.kernel + kj;
                for (int gi = 0; gi < s.grid_h; ++gi) {
                    const int ii = gi * s.stride - s.pad + ki;
                    if (ii < 0 || ii >= s.img_h) continue;
                    for (int gj = 0; gj < s.grid_w; ++gj) {
                        const int jj = gj * s.stride - s.pad + kj;
                        if (jj < 0 || jj >= s.img_w) continue;
                        img[(c * s.img_h + ii) * s.img_w + jj] += cols(row, gi * s.grid_w + gj);
                    }
                }
            }
}

}  // namespace

Var conv2d(Var x, Var W, Var b, const ConvSpec& spec) {
    afa::require(x.cols() == spec.in_dim(), "conv2d: input width mismatch");
    afa::require(W.rows() == spec.out_channels &&
                     W.cols() == spec.in_channels * spec.kernel * spec.kernel,
                 "conv2d: weight shape mismatch");
    afa::require(b.rows() == spec.out_channels && b.cols() == 1, "conv2d: bias shape mismatch");

    const PatchSpec ps{spec.in_channels, spec.in_h,     spec.in_w,  spec.kernel,
                       spec.stride,      spec.pad,      spec.out_h(), spec.out_w()};
    const int out_hw = spec.out_h() * spec.out_w();
    const Eigen::Index batch = x.rows();

    Mat out_v(batch, spec.out_dim());
    Mat cols(spec.in_channels * spec.kernel * spec.kernel, out_hw);
    // Row of x is c-major [c][i][j]; Eigen matrices are col-major, so copy the
    // row out to a contiguous buffer before indexing with raw offsets.
    Eigen::VectorXd row_buf(spec.in_dim());
    for (Eigen::Index s = 0; s < batch; ++s) {
        row_buf = x.val().row(s).transpose();
        im2col(row_buf.data(), ps, cols);
        Mat o = W.val() * cols;  // (Cout x out_hw)
        o.colwise() += b.val().col(0);
        for (int c = 0; c < spec.out_channels; ++c)
            out_v.row(s).segment(c * out_hw, out_hw) = o.row(c);
    }
    Var out = x.g->make(std::move(out_v));
    if (x.g->grad_enabled()) {
        Node *nx = x.n, *nw = W.n, *nb = b.n, *no = out.n;
        ConvSpec sp = spec;
        no->back = [nx, nw, nb, no, sp]() {
            const PatchSpec ps{sp.in_channels, sp.in_h, sp.in_w,    sp.kernel,
                               sp.stride,      sp.pad,  sp.out_h(), sp.out_w()};
            const int out_hw = sp.out_h() * sp.out_w();
            Mat cols(sp.in_channels * sp.kernel * sp.kernel, out_hw);
            Mat go(sp.out_channels, out_hw);
            Eigen::VectorXd row_buf(sp.in_dim());
            Eigen::VectorXd gx_buf(sp.in_dim());
            for (Eigen::Index s = 0; s < nx->val.rows(); ++s) {
                for (int c = 0; c < sp.out_channels; ++c)
                    go.row(c) = no->grad.row(s).segment(c * out_hw, out_hw);
                row_buf = nx->val.row(s).transpose();
                im2col(row_buf.data(), ps, cols);
                nw->grad.noalias() += go * cols.transpose();
                nb->grad.col(0) += go.rowwise().sum();
                gx_buf.setZero();
                Mat gcols = nw->val.transpose() * go;
                col2im_add(gcols, ps, gx_buf.data());
                nx->grad.row(s) += gx_buf.transpose();
            }
        };
    }
    return out;
}

Var conv2d_transpose(Var x, Var W, Var b, const ConvTransposeSpec& spec) {
    afa::require(x.cols() == spec.in_dim(), "conv2d_transpose: input width mismatch");
    afa::require(W.rows() == spec.in_channels &&
                     W.cols() == spec.out_channels * spec.kernel * spec.kernel,
                 "conv2d_transpose: weight shape mismatch");
    afa::require(b.rows() == spec.out_channels && b.cols() == 1,
                 "conv2d_transpose: bias shape mismatch");

    // Patch geometry lives on the *output* image; the input grid plays the role
    // of patch positions. This makes the op the exact adjoint of conv2d.
    const PatchSpec ps{spec.out_channels, spec.out_h(), spec.out_w(), spec.kernel,
                       spec.stride,       spec.pad,     spec.in_h,    spec.in_w};
    const int in_hw = spec.in_h * spec.in_w;
    const int out_hw = spec.out_h() * spec.out_w();
    const Eigen::Index batch = x.rows();

    Mat out_v(batch, spec.out_dim());
    Mat xin(spec.in_channels, in_hw);
    Eigen::VectorXd out_buf(spec.out_dim());
    for (Eigen::Index s = 0; s < batch; ++s) {
        for (int c = 0; c < spec.in_channels; ++c)
            xin.row(c) = x.val().row(s).segment(c * in_hw, in_hw);
        Mat cols = W.val().transpose() * xin;  // (Cout*K*K x in_hw)
        out_buf.setZero();
        col2im_add(cols, ps, out_buf.data());
        for (int c = 0; c < spec.out_channels; ++c)
            out_buf.segment(c * out_hw, out_hw).array() += b.val()(c, 0);
        out_v.row(s) = out_buf.transpose();
    }
    Var out = x.g->make(std::move(out_v));
    if (x.g->grad_enabled()) {
        Node *nx = x.n, *nw = W.n, *nb = b.n, *no = out.n;
        ConvTransposeSpec sp = spec;
        no->back = [nx, nw, nb, no, sp]() {
            const PatchSpec ps{sp.out_channels, sp.out_h(), sp.out_w(), sp.kernel,
                               sp.stride,       sp.pad,     sp.in_h,    sp.in_w};
            const int in_hw = sp.in_h * sp.in_w;
            const int out_hw = sp.out_h() * sp.out_w();
            Mat cols(sp.out_channels * sp.kernel * sp.kernel, in_hw);
            Mat xin(sp.in_channels, in_hw);
            Eigen::VectorXd go_buf(sp.out_dim());
            for (Eigen::Index s = 0; s < nx->val.rows(); ++s) {
                go_buf = no->grad.row(s).transpose();
                im2col(go_buf.data(), ps, cols);
                for (int c = 0; c < sp.in_channels; ++c)
                    xin.row(c) = nx->val.row(s).segment(c * in_hw, in_hw);
                nw->grad.noalias() += xin * cols.transpose();
                Mat gx = nw->val * cols;  // (Cin x in_hw)
                for (int c = 0; c < sp.in_channels; ++c)
                    nx->grad.row(s).segment(c * in_hw, in_hw) += gx.row(c);
                for (int c = 0; c < sp.out_channels; ++c)
                    nb->grad(c, 0) += no->grad.row(s).segment(c * out_hw, out_hw).sum();
            }
        };
    }
    return out;
}

}  // namespace afa::nn
