#include "afa/nn/layers.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "afa/core/errors.hpp"

namespace afa::nn {

Mat xavier_uniform(int rows, int cols, afa::Rng& rng) {
    const double bound = std::sqrt(6.0 / (rows + cols));
    Mat m(rows, cols);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
    return m;
}

Mat kaiming_uniform(int rows, int cols, int fan_in, afa::Rng& rng) {
    const double bound = std::sqrt(6.0 / fan_in);
    Mat m(rows, cols);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
    return m;
}

Mat orthogonal_init(int rows, int cols, double gain, afa::Rng& rng) {
    // QR of a Gaussian matrix; sign-correct the diagonal so the distribution
    // is uniform over orthogonal matrices.
    const bool tall = rows >= cols;
    const int r = tall ? rows : cols, c = tall ? cols : rows;
    Mat a(r, c);
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = rng.normal();
    Eigen::HouseholderQR<Mat> qr(a);
    Mat q = qr.householderQ() * Mat::Identity(r, c);
    Mat rm = qr.matrixQR().topRows(c).triangularView<Eigen::Upper>();
    for (int j = 0; j < c; ++j)
        if (rm(j, j) < 0.0) q.col(j) = -q.col(j);
    if (!tall) q.transposeInPlace();
    return gain * q;
}

Mat normalized_columns(int rows, int cols, double std_dev, afa::Rng& rng) {
    Mat m(rows, cols);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.normal();
    for (Eigen::Index j = 0; j < m.cols(); ++j) m.col(j) *= std_dev / m.col(j).norm();
    return m;
}

namespace {

Mat init_weight(Init init, int rows, int cols, int fan_in, double gain, afa::Rng& rng) {
    switch (init) {
        case Init::xavier: return xavier_uniform(rows, cols, rng);
        case Init::kaiming: return kaiming_uniform(rows, cols, fan_in, rng);
        case Init::orthogonal: return orthogonal_init(rows, cols, gain, rng);
        case Init::normalized_columns: return normalized_columns(rows, cols, gain, rng);
    }
    throw afa::ContractViolation("unknown init kind");
}

}  // namespace

Linear::Linear(ParameterSet& ps, const std::string& name, int in, int out, afa::Rng& rng,
               Init init, double gain) {
    // normalized_columns follows the actor-critic convention of normalizing
    // per output unit, i.e. the rows of our (out x in) weight.
    Mat w = init == Init::normalized_columns
                ? normalized_columns(in, out, gain, rng).transpose()
                : init_weight(init, out, in, in, gain, rng);
    W = ps.add(name + ".W", std::move(w));
    b = ps.add(name + ".b", Mat::Zero(out, 1));
}

LstmCell::LstmCell(ParameterSet& ps, const std::string& name, int in, int hidden_size,
                   afa::Rng& rng)
    : hidden(hidden_size) {
    Wx = ps.add(name + ".Wx", xavier_uniform(4 * hidden_size, in, rng));
    Wh = ps.add(name + ".Wh", xavier_uniform(4 * hidden_size, hidden_size, rng));
    Mat bias = Mat::Zero(4 * hidden_size, 1);
    // Forget-gate bias of 1 keeps early memory from vanishing.
    bias.block(hidden_size, 0, hidden_size, 1).setOnes();
    b = ps.add(name + ".b", std::move(bias));
}

std::pair<Var, Var> LstmCell::operator()(Graph& g, Var x, Var h, Var c) const {
    Var gates = add(affine(x, g.param(*Wx), g.param(*b)), linear(h, g.param(*Wh)));
    Var i = sigmoid(slice_cols(gates, 0, hidden));
    Var f = sigmoid(slice_cols(gates, hidden, hidden));
    Var cand = tanh_op(slice_cols(gates, 2 * hidden, hidden));
    Var o = sigmoid(slice_cols(gates, 3 * hidden, hidden));
    Var c_new = add(mul(f, c), mul(i, cand));
    Var h_new = mul(o, tanh_op(c_new));
    return {h_new, c_new};
}

Conv2dLayer::Conv2dLayer(ParameterSet& ps, const std::string& name, const ConvSpec& s,
                         afa::Rng& rng, Init init)
    : spec(s) {
    const int fan_in = s.in_channels * s.kernel * s.kernel;
    const int rows = s.out_channels, cols = fan_in;
    Mat w = init == Init::orthogonal ? orthogonal_init(rows, cols, 1.0, rng)
                                     : kaiming_uniform(rows, cols, fan_in, rng);
    W = ps.add(name + ".W", std::move(w));
    b = ps.add(name + ".b", Mat::Zero(s.out_channels, 1));
}

ConvTranspose2dLayer::ConvTranspose2dLayer(ParameterSet& ps, const std::string& name,
                                           const ConvTransposeSpec& s, afa::Rng& rng)
    : spec(s) {
    const int fan_in = s.in_channels * s.kernel * s.kernel;
    W = ps.add(name + ".W",
               kaiming_uniform(s.in_channels, s.out_channels * s.kernel * s.kernel, fan_in, rng));
    b = ps.add(name + ".b", Mat::Zero(s.out_channels, 1));
}

// --- optimizer ---------------------------------------------------------------

Adam::Adam(ParameterSet& params, double lr, double beta1, double beta2, double eps)
    : params_(&params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params.all()) {
        m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
}

void Adam::step(double max_grad_norm) {
    if (max_grad_norm > 0.0) {
        double sq = 0.0;
        for (const auto& p : params_->all()) sq += p->grad.squaredNorm();
        const double norm = std::sqrt(sq);
        if (norm > max_grad_norm) {
            const double s = max_grad_norm / norm;
            for (const auto& p : params_->all()) p->grad *= s;
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    const auto& ps = params_->all();
    for (size_t i = 0; i < ps.size(); ++i) {
        Parameter& p = *ps[i];
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
        p.value.array() -=
            lr_ * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
        p.grad.setZero();
    }
}

}  // namespace afa::nn
