#pragma once

#include <vector>

#include "afa/core/rng.hpp"
#include "afa/core/types.hpp"
#include "afa/models/vae.hpp"
#include "afa/nn/layers.hpp"
#include "afa/nn/tape.hpp"

namespace afa {

// Recurrent actor-critic with three independent heads on a shared LSTM core:
// a categorical task policy over control actions, a factorized acquisition
// policy (one Bernoulli logit per acquirable feature group) and a scalar value
// baseline. The input pathway is selected by the spec: belief features pass
// through an optional fully connected trunk, while the end-to-end variants
// encode the imputed raw observation with their own convolutional or dense
// trunk before the recurrent core.
struct PolicySpec {
    enum class Encoder {
        none,  // features feed the recurrent cell directly
        fc,    // one fully connected layer + ReLU
        conv,  // two stride-2 convolutions + dense layer (square frame input)
        mlp    // stack of fully connected layers, each + ReLU (vector input)
    };

    int input_dim = 0;  // feature (or flattened frame) width fed to the network
    int n_control_actions = 0;
    int n_features = 0;  // acquisition head width
    int lstm_hidden = 256;
    Encoder encoder = Encoder::none;
    int fc_width = 1024;  // Encoder::fc, and the conv trunk's dense layer
    int frame_size = 0;   // Encoder::conv: square frame edge
    int conv_c1 = 16, conv_c2 = 32;
    std::vector<int> mlp_widths = {32, 64, 32};
    // Normalized-columns scales: wide for trunk and value head, small for both
    // policy heads so the initial action distributions are near uniform.
    double trunk_std = 1.0;
    double policy_head_std = 0.01;
    double value_head_std = 1.0;

    void validate() const;
};

// Reference configurations. `input_dim` is the belief width for the VAE-driven
// agents; the end-to-end variants take the flattened observation width.
PolicySpec ball_policy_spec(int input_dim);
PolicySpec sepsis_policy_spec(int input_dim);
PolicySpec ball_e2e_policy_spec(int frame_size = 32);
PolicySpec sepsis_e2e_policy_spec(int obs_dim = 8);

struct PolicyState {
    Mat h, c;  // (1 x lstm_hidden) each
    bool initialized = false;
};

struct PolicyOutput {
    Eigen::VectorXd task_logits;  // finite
    Eigen::VectorXd acq_probs;    // strictly inside (0, 1)
    double value = 0.0;
    PolicyState state;  // recurrent state after consuming this input
};

struct ActResult {
    JointAction action;
    double log_prob_control = 0.0;
    double log_prob_acquisition = 0.0;
    double log_prob = 0.0;  // joint: control + acquisition
    double value = 0.0;
    PolicyState state;
};

class PolicyNet {
public:
    PolicyNet(const PolicySpec& spec, uint64_t init_seed);

    const PolicySpec& spec() const { return spec_; }
    nn::ParameterSet& params() { return params_; }
    const nn::ParameterSet& params() const { return params_; }

    // Zero recurrent state, marked initialized; required at episode start.
    PolicyState initial_state() const;

    // One differentiable step on the tape; x is (B x input_dim).
    struct StepVars {
        Var task_logits;  // (B x n_control_actions)
        Var acq_logits;   // (B x n_features)
        Var value;        // (B x 1)
        Var h, c;
    };
    StepVars forward(Graph& g, Var x, Var h, Var c) const;

    // Plain forward pass (no gradients) for one feature row.
    PolicyOutput evaluate(const Eigen::VectorXd& features, const PolicyState& prev) const;

    // Samples a joint action: control from the categorical head, then one
    // Bernoulli draw per feature in index order.
    ActResult act(const Eigen::VectorXd& features, const PolicyState& prev, Rng& rng) const;
    ActResult act(const BeliefState& belief, const PolicyState& prev, Rng& rng) const;

    // Deterministic evaluation-mode action: argmax control, bits at p > 0.5.
    ActResult act_greedy(const Eigen::VectorXd& features, const PolicyState& prev) const;
    ActResult act_greedy(const BeliefState& belief, const PolicyState& prev) const;

private:
    PolicySpec spec_;
    nn::ParameterSet params_;
    std::vector<nn::Linear> mlp_;
    std::vector<nn::Conv2dLayer> convs_;
    nn::Linear fc_, value_, task_, acq_;
    nn::LstmCell lstm_;
};

// Greedy decisions from head outputs. The control argmax is invariant to
// adding a constant to every logit; ties resolve to the lowest index.
int greedy_control(const Eigen::VectorXd& task_logits);
FeatureMask greedy_acquisition(const Eigen::VectorXd& acq_probs);

// log pi(action) recomputed from head outputs; matches ActResult::log_prob.
double joint_log_prob(const Eigen::VectorXd& task_logits, const Eigen::VectorXd& acq_probs,
                      const JointAction& action);

// One saved step of experience. `features` is the exact network input (belief
// or imputed observation). `log_prob` is diagnostic only; `value` is the
// acting-time estimate V(b_t) and serves as the advantage baseline in the
// loss.
struct Transition {
    Eigen::VectorXd features;
    JointAction action;
    double reward = 0.0;
    double cost = 0.0;
    double log_prob = 0.0;
    double value = 0.0;
    bool terminal = false;
};

// A segment collected by a single worker: either episode-terminated (last
// step terminal) or truncated, in which case `bootstrap_value` must hold the
// value estimate of the successor state.
struct Rollout {
    std::vector<Transition> steps;
    PolicyState initial_state;  // recurrent state before steps.front()
    double bootstrap_value = 0.0;

    void validate(const PolicySpec& spec) const;
};

struct A3cHyper {
    double value_coef = 0.5;
    double entropy_coef = 0.01;
    // When false, the acquisition head contributes neither log-probability nor
    // entropy (used when acquisition bits are drawn externally, e.g. a fixed
    // Bernoulli baseline, so only the control head and critic learn).
    bool train_acquisition = true;
};

struct A3cDiagnostics {
    double loss = 0.0;
    double policy_term = 0.0;     // -sum_t log pi(a_t | b_t) * advantage_t
    double value_term = 0.0;      // sum_t (G_t - V_t)^2, unweighted
    double entropy_term = 0.0;    // sum_t H_t, unweighted
    std::vector<double> returns;  // cost-adjusted G_t per step
};

// Actor-critic loss over one rollout:
//   loss = -sum_t log pi(a_t) * (G_t - v_t)
//          + value_coef * sum_t (G_t - V(b_t))^2
//          - entropy_coef * sum_t H_t
// where G_t are discounted returns of the cost-adjusted rewards r_t - c_t,
// bootstrapped with `bootstrap_value` at a truncation, and H_t sums the
// categorical and Bernoulli head entropies. The advantage G_t - v_t uses the
// recorded value estimates and carries no gradient; the squared value error
// uses the value head re-run on the tape, as are the log-probabilities and
// entropies. The recurrent state is treated as constant at the rollout
// boundary.
Var a3c_loss(Graph& g, const PolicyNet& net, const Rollout& rollout, const CostModel& cm,
             const A3cHyper& hyper, A3cDiagnostics* diag = nullptr);

}  // namespace afa
