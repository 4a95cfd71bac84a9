#pragma once

// Straight-line reference implementation of the actor-critic forward pass and
// loss, deliberately structured nothing like the production code: plain Eigen
// vector arithmetic, one transition at a time, direct convolution loops, no
// tape. Parameters are looked up by name from the production network so both
// sides evaluate identical weights.

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "afa/models/policy.hpp"

namespace policy_oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline const Mat& P(const afa::PolicyNet& net, const std::string& name) {
    const afa::nn::Parameter* p = net.params().find(name);
    if (!p) throw std::runtime_error("policy_oracle: missing parameter " + name);
    return p->value;
}

inline Vec lin(const afa::PolicyNet& net, const std::string& name, const Vec& x) {
    return P(net, name + ".W") * x + P(net, name + ".b").col(0);
}

inline Vec relu_v(Vec x) {
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = std::max(0.0, x[i]);
    return x;
}

inline double sigmoid_s(double v) {
    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

// Direct convolution over a c-major flattened image, zero padding.
inline Vec conv_direct(const Vec& x, const Mat& W, const Vec& b, int cin, int h, int w,
                       int cout, int k, int stride, int pad) {
    const int oh = (h + 2 * pad - k) / stride + 1;
    const int ow = (w + 2 * pad - k) / stride + 1;
    Vec out(cout * oh * ow);
    for (int co = 0; co < cout; ++co)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = b[co];
                for (int ci = 0; ci < cin; ++ci)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const int iy = oy * stride - pad + ky;
                            const int ix = ox * stride - pad + kx;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                            acc += W(co, (ci * k + ky) * k + kx) *
                                   x[(ci * h + iy) * w + ix];
                        }
                out[(co * oh + oy) * ow + ox] = acc;
            }
    return out;
}

struct LstmState {
    Vec h, c;
};

inline LstmState lstm_step(const afa::PolicyNet& net, const LstmState& prev, const Vec& x) {
    const Mat& Wx = P(net, "lstm.Wx");
    const Mat& Wh = P(net, "lstm.Wh");
    const Vec b = P(net, "lstm.b").col(0);
    const int H = static_cast<int>(prev.h.size());
    const Vec gates = Wx * x + Wh * prev.h + b;
    LstmState next{Vec(H), Vec(H)};
    for (int j = 0; j < H; ++j) {
        const double i = sigmoid_s(gates[j]);
        const double f = sigmoid_s(gates[H + j]);
        const double cand = std::tanh(gates[2 * H + j]);
        const double o = sigmoid_s(gates[3 * H + j]);
        next.c[j] = f * prev.c[j] + i * cand;
        next.h[j] = o * std::tanh(next.c[j]);
    }
    return next;
}

inline Vec trunk(const afa::PolicyNet& net, const Vec& input) {
    using Encoder = afa::PolicySpec::Encoder;
    const afa::PolicySpec& s = net.spec();
    switch (s.encoder) {
        case Encoder::none:
            return input;
        case Encoder::fc:
            return relu_v(lin(net, "fc", input));
        case Encoder::conv: {
            const int fs = s.frame_size;
            Vec a = relu_v(conv_direct(input, P(net, "conv0.W"), P(net, "conv0.b").col(0), 1,
                                       fs, fs, s.conv_c1, 4, 2, 1));
            Vec b = relu_v(conv_direct(a, P(net, "conv1.W"), P(net, "conv1.b").col(0),
                                       s.conv_c1, fs / 2, fs / 2, s.conv_c2, 4, 2, 1));
            return relu_v(lin(net, "fc", b));
        }
        case Encoder::mlp: {
            Vec a = input;
            for (size_t i = 0; i < s.mlp_widths.size(); ++i)
                a = relu_v(lin(net, "mlp" + std::to_string(i), a));
            return a;
        }
    }
    throw std::runtime_error("policy_oracle: unknown encoder");
}

struct HeadOut {
    Vec task_logits;
    Vec acq_logits;
    double value = 0.0;
    LstmState state;
};

inline HeadOut forward(const afa::PolicyNet& net, const Vec& input, const LstmState& prev) {
    LstmState st = lstm_step(net, prev, trunk(net, input));
    HeadOut o;
    o.task_logits = lin(net, "task", st.h);
    o.acq_logits = lin(net, "acq", st.h);
    o.value = lin(net, "value", st.h)[0];
    o.state = st;
    return o;
}

inline LstmState initial_state(const afa::PolicyNet& net) {
    const int H = net.spec().lstm_hidden;
    return LstmState{Vec::Zero(H), Vec::Zero(H)};
}

inline Vec softmax(const Vec& logits) {
    Vec p = (logits.array() - logits.maxCoeff()).exp();
    return p / p.sum();
}

inline double log_softmax_at(const Vec& logits, int idx) {
    const double m = logits.maxCoeff();
    return logits[idx] - (m + std::log((logits.array() - m).exp().sum()));
}

inline double bernoulli_log_prob(double logit, bool bit) {
    const double p = sigmoid_s(logit);
    return bit ? std::log(p) : std::log1p(-p);
}

struct LossBreakdown {
    double loss = 0.0;
    double policy_term = 0.0;
    double value_term = 0.0;
    double entropy_term = 0.0;
    std::vector<double> returns;
};

inline LossBreakdown a3c_loss(const afa::PolicyNet& net, const afa::Rollout& rollout,
                              const afa::CostModel& cm, const afa::A3cHyper& hyper) {
    const int T = static_cast<int>(rollout.steps.size());
    LossBreakdown out;
    out.returns.resize(T);
    double g = rollout.steps.back().terminal ? 0.0 : rollout.bootstrap_value;
    for (int t = T - 1; t >= 0; --t) {
        g = (rollout.steps[t].reward - rollout.steps[t].cost) + cm.discount * g;
        out.returns[t] = g;
    }

    LstmState st{rollout.initial_state.h.row(0).transpose(),
                 rollout.initial_state.c.row(0).transpose()};
    for (int t = 0; t < T; ++t) {
        const afa::Transition& tr = rollout.steps[t];
        HeadOut o = forward(net, tr.features, st);
        st = o.state;

        double lp = log_softmax_at(o.task_logits, tr.action.control);
        for (Eigen::Index j = 0; j < o.acq_logits.size(); ++j)
            lp += bernoulli_log_prob(o.acq_logits[j], tr.action.acquisition.bits[j] != 0);
        const double adv = out.returns[t] - tr.value;
        out.policy_term += -lp * adv;
        out.value_term += (out.returns[t] - o.value) * (out.returns[t] - o.value);

        const Vec p = softmax(o.task_logits);
        for (Eigen::Index i = 0; i < p.size(); ++i) out.entropy_term += -p[i] * std::log(p[i]);
        for (Eigen::Index j = 0; j < o.acq_logits.size(); ++j) {
            const double q = sigmoid_s(o.acq_logits[j]);
            out.entropy_term += -(q * std::log(q) + (1.0 - q) * std::log1p(-q));
        }
    }
    out.loss = out.policy_term + hyper.value_coef * out.value_term -
               hyper.entropy_coef * out.entropy_term;
    return out;
}

}  // namespace policy_oracle
