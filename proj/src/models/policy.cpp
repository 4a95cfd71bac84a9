#include "afa/models/policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "afa/core/errors.hpp"

namespace afa {

namespace {

// Keeps reported probabilities strictly inside (0, 1) even for saturated
// logits, so downstream log() calls stay finite.
constexpr double kProbEps = 1e-12;

double clamp_prob(double p) { return std::min(1.0 - kProbEps, std::max(kProbEps, p)); }

double stable_sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double control_log_prob(const Eigen::VectorXd& logits, int control) {
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    return logits[control] - lse;
}

double acquisition_log_prob(const Eigen::VectorXd& probs, const FeatureMask& mask) {
    double lp = 0.0;
    for (Eigen::Index j = 0; j < probs.size(); ++j)
        lp += mask.bits[j] ? std::log(probs[j]) : std::log1p(-probs[j]);
    return lp;
}

ActResult finish_action(const PolicyOutput& out, JointAction action) {
    ActResult r;
    r.log_prob_control = control_log_prob(out.task_logits, action.control);
    r.log_prob_acquisition = acquisition_log_prob(out.acq_probs, action.acquisition);
    r.log_prob = r.log_prob_control + r.log_prob_acquisition;
    r.value = out.value;
    r.state = out.state;
    r.action = std::move(action);
    return r;
}

}  // namespace

void PolicySpec::validate() const {
    require(input_dim >= 1, "PolicySpec: input_dim must be >= 1");
    require(n_control_actions >= 1, "PolicySpec: n_control_actions must be >= 1");
    require(n_features >= 1, "PolicySpec: n_features must be >= 1");
    require(lstm_hidden >= 1, "PolicySpec: lstm_hidden must be >= 1");
    if (encoder == Encoder::fc) require(fc_width >= 1, "PolicySpec: fc_width must be >= 1");
    if (encoder == Encoder::conv) {
        require(frame_size >= 4 && frame_size * frame_size == input_dim,
                "PolicySpec: conv encoder needs a square frame input");
        require(frame_size % 4 == 0,
                "PolicySpec: frame edge must survive two stride-2 halvings");
        require(conv_c1 >= 1 && conv_c2 >= 1 && fc_width >= 1,
                "PolicySpec: conv trunk sizes must be >= 1");
    }
    if (encoder == Encoder::mlp) {
        require(!mlp_widths.empty(), "PolicySpec: mlp encoder needs at least one layer");
        for (int w : mlp_widths) require(w >= 1, "PolicySpec: mlp widths must be >= 1");
    }
    require(trunk_std > 0.0 && policy_head_std > 0.0 && value_head_std > 0.0,
            "PolicySpec: init scales must be positive");
}

PolicySpec ball_policy_spec(int input_dim) {
    PolicySpec s;
    s.input_dim = input_dim;
    s.n_control_actions = 5;
    s.n_features = 4;
    s.lstm_hidden = 1024;
    s.encoder = PolicySpec::Encoder::fc;
    s.fc_width = 1024;
    return s;
}

PolicySpec sepsis_policy_spec(int input_dim) {
    PolicySpec s;
    s.input_dim = input_dim;
    s.n_control_actions = 8;
    s.n_features = 4;
    s.lstm_hidden = 256;
    s.encoder = PolicySpec::Encoder::none;
    return s;
}

PolicySpec ball_e2e_policy_spec(int frame_size) {
    PolicySpec s;
    s.input_dim = frame_size * frame_size;
    s.frame_size = frame_size;
    s.n_control_actions = 5;
    s.n_features = 4;
    s.lstm_hidden = 1024;
    s.encoder = PolicySpec::Encoder::conv;
    s.conv_c1 = 16;
    s.conv_c2 = 32;
    s.fc_width = 1024;
    return s;
}

PolicySpec sepsis_e2e_policy_spec(int obs_dim) {
    PolicySpec s;
    s.input_dim = obs_dim;
    s.n_control_actions = 8;
    s.n_features = 4;
    s.lstm_hidden = 256;
    s.encoder = PolicySpec::Encoder::mlp;
    s.mlp_widths = {32, 64, 32};
    return s;
}

PolicyNet::PolicyNet(const PolicySpec& spec, uint64_t init_seed) : spec_(spec) {
    spec_.validate();
    Rng rng(init_seed);
    int width = spec_.input_dim;
    switch (spec_.encoder) {
        case PolicySpec::Encoder::none:
            break;
        case PolicySpec::Encoder::fc:
            fc_ = nn::Linear(params_, "fc", width, spec_.fc_width, rng,
                             nn::Init::normalized_columns, spec_.trunk_std);
            width = spec_.fc_width;
            break;
        case PolicySpec::Encoder::conv: {
            nn::ConvSpec c0{1, spec_.frame_size, spec_.frame_size, spec_.conv_c1, 4, 2, 1};
            convs_.emplace_back(params_, "conv0", c0, rng);
            nn::ConvSpec c1{spec_.conv_c1, c0.out_h(), c0.out_w(), spec_.conv_c2, 4, 2, 1};
            convs_.emplace_back(params_, "conv1", c1, rng);
            fc_ = nn::Linear(params_, "fc", c1.out_dim(), spec_.fc_width, rng,
                             nn::Init::orthogonal);
            width = spec_.fc_width;
            break;
        }
        case PolicySpec::Encoder::mlp:
            for (size_t i = 0; i < spec_.mlp_widths.size(); ++i) {
                mlp_.emplace_back(params_, "mlp" + std::to_string(i), width,
                                  spec_.mlp_widths[i], rng, nn::Init::normalized_columns,
                                  spec_.trunk_std);
                width = spec_.mlp_widths[i];
            }
            break;
    }
    lstm_ = nn::LstmCell(params_, "lstm", width, spec_.lstm_hidden, rng);
    // All recurrent biases start at zero, overriding the cell's forget-gate
    // default.
    lstm_.b->value.setZero();
    value_ = nn::Linear(params_, "value", spec_.lstm_hidden, 1, rng,
                        nn::Init::normalized_columns, spec_.value_head_std);
    task_ = nn::Linear(params_, "task", spec_.lstm_hidden, spec_.n_control_actions, rng,
                       nn::Init::normalized_columns, spec_.policy_head_std);
    acq_ = nn::Linear(params_, "acq", spec_.lstm_hidden, spec_.n_features, rng,
                      nn::Init::normalized_columns, spec_.policy_head_std);
}

PolicyState PolicyNet::initial_state() const {
    PolicyState s;
    s.h = Mat::Zero(1, spec_.lstm_hidden);
    s.c = Mat::Zero(1, spec_.lstm_hidden);
    s.initialized = true;
    return s;
}

PolicyNet::StepVars PolicyNet::forward(Graph& g, Var x, Var h, Var c) const {
    require(x.cols() == spec_.input_dim, "PolicyNet::forward: input width mismatch");
    Var feat = x;
    switch (spec_.encoder) {
        case PolicySpec::Encoder::none:
            break;
        case PolicySpec::Encoder::fc:
            feat = relu(fc_(g, feat));
            break;
        case PolicySpec::Encoder::conv:
            for (const auto& conv : convs_) feat = relu(conv(g, feat));
            feat = relu(fc_(g, feat));
            break;
        case PolicySpec::Encoder::mlp:
            for (const auto& layer : mlp_) feat = relu(layer(g, feat));
            break;
    }
    auto [h2, c2] = lstm_(g, feat, h, c);
    return {task_(g, h2), acq_(g, h2), value_(g, h2), h2, c2};
}

PolicyOutput PolicyNet::evaluate(const Eigen::VectorXd& features,
                                 const PolicyState& prev) const {
    require(prev.initialized, "PolicyNet: recurrent state must be initialized before use");
    require(features.size() == spec_.input_dim, "PolicyNet: feature width mismatch");
    Graph g(false);
    StepVars out = forward(g, g.input(features.transpose()), g.input(prev.h), g.input(prev.c));
    PolicyOutput res;
    res.task_logits = out.task_logits.val().row(0).transpose();
    require(res.task_logits.allFinite(), "PolicyNet: task logits must be finite");
    res.acq_probs.resize(spec_.n_features);
    for (int j = 0; j < spec_.n_features; ++j)
        res.acq_probs[j] = clamp_prob(stable_sigmoid(out.acq_logits.val()(0, j)));
    res.value = out.value.val()(0, 0);
    res.state = PolicyState{out.h.val(), out.c.val(), true};
    return res;
}

ActResult PolicyNet::act(const Eigen::VectorXd& features, const PolicyState& prev,
                         Rng& rng) const {
    PolicyOutput out = evaluate(features, prev);
    const double m = out.task_logits.maxCoeff();
    Eigen::VectorXd probs = (out.task_logits.array() - m).exp();
    probs /= probs.sum();
    JointAction action;
    action.control = rng.categorical(probs.data(), spec_.n_control_actions);
    action.acquisition = FeatureMask(spec_.n_features);
    for (int j = 0; j < spec_.n_features; ++j)
        action.acquisition.bits[j] = rng.bernoulli(out.acq_probs[j]) ? 1 : 0;
    return finish_action(out, std::move(action));
}

ActResult PolicyNet::act(const BeliefState& belief, const PolicyState& prev, Rng& rng) const {
    return act(belief.value, prev, rng);
}

ActResult PolicyNet::act_greedy(const Eigen::VectorXd& features,
                                const PolicyState& prev) const {
    PolicyOutput out = evaluate(features, prev);
    JointAction action;
    action.control = greedy_control(out.task_logits);
    action.acquisition = greedy_acquisition(out.acq_probs);
    return finish_action(out, std::move(action));
}

ActResult PolicyNet::act_greedy(const BeliefState& belief, const PolicyState& prev) const {
    return act_greedy(belief.value, prev);
}

int greedy_control(const Eigen::VectorXd& task_logits) {
    Eigen::Index best = 0;
    task_logits.maxCoeff(&best);
    return static_cast<int>(best);
}

FeatureMask greedy_acquisition(const Eigen::VectorXd& acq_probs) {
    FeatureMask mask(static_cast<int>(acq_probs.size()));
    for (Eigen::Index j = 0; j < acq_probs.size(); ++j)
        mask.bits[j] = acq_probs[j] > 0.5 ? 1 : 0;
    return mask;
}

double joint_log_prob(const Eigen::VectorXd& task_logits, const Eigen::VectorXd& acq_probs,
                      const JointAction& action) {
    require(action.control >= 0 && action.control < task_logits.size(),
            "joint_log_prob: control index out of range");
    require(action.acquisition.size() == acq_probs.size(),
            "joint_log_prob: acquisition mask width mismatch");
    return control_log_prob(task_logits, action.control) +
           acquisition_log_prob(acq_probs, action.acquisition);
}

void Rollout::validate(const PolicySpec& spec) const {
    require(!steps.empty(), "Rollout: must contain at least one transition");
    require(initial_state.initialized, "Rollout: initial recurrent state must be initialized");
    for (size_t t = 0; t < steps.size(); ++t) {
        const Transition& tr = steps[t];
        require(tr.features.size() == spec.input_dim, "Rollout: feature width mismatch");
        require(tr.action.control >= 0 && tr.action.control < spec.n_control_actions,
                "Rollout: control action out of range");
        require(tr.action.acquisition.size() == spec.n_features,
                "Rollout: acquisition mask width mismatch");
        require(!tr.terminal || t + 1 == steps.size(),
                "Rollout: terminal transition must be the last one");
    }
}

Var a3c_loss(Graph& g, const PolicyNet& net, const Rollout& rollout, const CostModel& cm,
             const A3cHyper& hyper, A3cDiagnostics* diag) {
    const PolicySpec& spec = net.spec();
    rollout.validate(spec);
    cm.validate();
    const int T = static_cast<int>(rollout.steps.size());

    // Discounted cost-adjusted returns, bootstrapped through a truncation.
    std::vector<double> returns(T);
    double running = rollout.steps.back().terminal ? 0.0 : rollout.bootstrap_value;
    for (int t = T - 1; t >= 0; --t) {
        running = (rollout.steps[t].reward - rollout.steps[t].cost) + cm.discount * running;
        returns[t] = running;
    }

    Var h = g.input(rollout.initial_state.h);
    Var c = g.input(rollout.initial_state.c);
    Var policy_term = g.constant(0.0);
    Var value_term = g.constant(0.0);
    Var entropy_term = g.constant(0.0);
    for (int t = 0; t < T; ++t) {
        const Transition& tr = rollout.steps[t];
        PolicyNet::StepVars out = net.forward(g, g.input(tr.features.transpose()), h, c);
        h = out.h;
        c = out.c;

        Var log_probs = log_softmax_rows(out.task_logits);
        Var lp_control = gather_cols(log_probs, {tr.action.control});
        Var lp = lp_control;
        if (hyper.train_acquisition) {
            // Bernoulli log-likelihood of bit y given logit l is -softplus(-s*l)
            // with s = 2y - 1.
            Mat sign(1, spec.n_features);
            for (int j = 0; j < spec.n_features; ++j)
                sign(0, j) = tr.action.acquisition.bits[j] ? 1.0 : -1.0;
            Var lp_bits = neg(softplus(neg(mul(out.acq_logits, g.input(sign)))));
            lp = add(lp_control, sum_all(lp_bits));
        }

        // The advantage is a plain coefficient built from the recorded value
        // estimate, so no gradient flows through it and the loss stays a clean
        // function of the parameters (under serialized updates the recorded
        // and recomputed values coincide bit-exactly).
        const double advantage = returns[t] - tr.value;
        policy_term = add(policy_term, scale(lp, -advantage));
        value_term = add(value_term, square(sub(g.constant(returns[t]), out.value)));

        Var probs = exp_op(log_probs);
        Var ent_control = neg(sum_all(mul(probs, log_probs)));
        Var ent = ent_control;
        if (hyper.train_acquisition) {
            Var p_bits = sigmoid(out.acq_logits);
            Var ent_bits = add(mul(p_bits, softplus(neg(out.acq_logits))),
                               mul(add_scalar(neg(p_bits), 1.0), softplus(out.acq_logits)));
            ent = add(ent_control, sum_all(ent_bits));
        }
        entropy_term = add(entropy_term, ent);
    }

    Var loss = add(policy_term, sub(scale(value_term, hyper.value_coef),
                                    scale(entropy_term, hyper.entropy_coef)));
    if (diag) {
        diag->loss = loss.val()(0, 0);
        diag->policy_term = policy_term.val()(0, 0);
        diag->value_term = value_term.val()(0, 0);
        diag->entropy_term = entropy_term.val()(0, 0);
        diag->returns = returns;
    }
    return loss;
}

}  // namespace afa
