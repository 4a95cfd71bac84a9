#pragma once

#include <utility>
#include <vector>

#include "afa/core/rng.hpp"
#include "afa/core/types.hpp"
#include "afa/nn/layers.hpp"
#include "afa/nn/tape.hpp"

namespace afa {

using nn::Graph;
using nn::Mat;
using nn::Var;

struct ImputerConfig {
    double fill_value = 0.0;
};

// Fills unobserved entries with a fixed out-of-range value.
Eigen::RowVectorXd zero_impute(const MaskedObservation& obs, const ImputerConfig& cfg);

struct LatentDistribution {
    Eigen::VectorXd mean;
    Eigen::VectorXd log_variance;
};

struct BeliefState {
    Eigen::VectorXd value;
};

// The belief is the posterior mean; variance is deliberately dropped.
inline BeliefState belief(const LatentDistribution& dist) { return BeliefState{dist.mean}; }

enum class VaeFamily { frame, vector };

// Which entries of the full target contribute to the reconstruction loss:
// observed entries always do; `partial` adds nothing, `full` adds every
// unobserved entry, `stored` adds the trajectory's persisted supervision bits.
enum class SupervisionPolicy { partial, full, stored };

struct VaeSpec {
    VaeFamily family = VaeFamily::vector;
    bool sequential = false;
    int obs_dim = 0;     // flattened observation size
    int frame_size = 0;  // square frame edge (frame family only)
    int action_dim = 0;  // encoded joint-action size (sequential only)
    int d_z = 10;
    double beta = 1.0;
    double fill_value = 0.0;

    // vector family widths
    std::vector<int> enc_widths = {32, 64};             // non-sequential encoder
    std::vector<int> state_proj_widths = {32, 16, 10};  // sequential f_x projection
    int action_proj_width = 10;
    std::vector<int> trunk_widths = {64, 32};           // f_c -> recurrent input
    int lstm_hidden = 32;
    std::vector<int> dec_widths = {64, 64, 32};

    // frame family channel/width choices
    int frame_enc_c1 = 32, frame_enc_c2 = 64, frame_enc_fc = 256;
    int frame_seq_channels = 32, frame_seq_fx = 32, frame_seq_action_proj = 32;
    int frame_dec_c1 = 32, frame_dec_c2 = 32;

    // decoder output width: per-pixel two-class logits for frames, means for vectors
    int decoder_dim() const { return family == VaeFamily::frame ? 2 * obs_dim : obs_dim; }
    void validate() const;
};

// Reference configurations.
VaeSpec ball_nonseq_spec();
VaeSpec ball_seq_spec();
VaeSpec sepsis_nonseq_spec();
VaeSpec sepsis_seq_spec();

struct LatentVars {
    Var mean, log_var;  // (B x d_z) each
};

struct FilterVars {
    Var h, c;  // recurrent cell state, (B x lstm_hidden)
};

// Variational model over (sequences of) masked observations. One class covers
// the non-sequential baseline and the sequential filtering model for both
// observation families; `spec.sequential` selects which entry points are valid.
class Vae {
public:
    Vae(const VaeSpec& spec, uint64_t init_seed);

    const VaeSpec& spec() const { return spec_; }
    nn::ParameterSet& params() { return params_; }
    const nn::ParameterSet& params() const { return params_; }

    // Non-sequential posterior for independent samples.
    LatentVars encode(Graph& g, Var imputed) const;

    // Sequential filter: consumes the imputed observation of step t and the
    // encoding of action t-1 (zeros at t=1); hidden state starts at zero.
    FilterVars initial_state(Graph& g, int batch) const;
    std::pair<FilterVars, LatentVars> filter_step(Graph& g, const FilterVars& prev, Var imputed,
                                                  Var action_enc) const;

    // Likelihood parameters for the full feature vector.
    Var decode(Graph& g, Var z) const;

private:
    VaeSpec spec_;
    nn::ParameterSet params_;

    // vector family
    std::vector<nn::Linear> enc_, sproj_, trunk_, dec_;
    nn::Linear aproj_, mu_, logvar_, dec_out_;
    // frame family
    std::vector<nn::Conv2dLayer> convs_;
    std::vector<nn::ConvTranspose2dLayer> deconvs_;
    nn::Linear enc_fc_, fx_, dec_fc_;
    nn::LstmCell lstm_;
};

struct ElboDiagnostics {
    double loss = 0.0;
    double recon_observed = 0.0;    // negative log-likelihood over observed entries
    double recon_unobserved = 0.0;  // over supervised unobserved entries
    double kl = 0.0;                // unweighted
    int n_units = 0;                // normalization count: trajectories (seq) or samples (non-seq)
};

// Negative supervised ELBO of a trajectory batch, reduced by summing over time
// and features and averaging over the batch. `noise` fixes the reparameterized
// samples: sequential models take one (B x d_z) matrix per time index up to the
// longest trajectory; non-sequential models take a single (N x d_z) matrix with
// one row per valid (trajectory, step) pair in batch-major order.
Var elbo_loss(Graph& g, const Vae& vae, const EnvDescriptor& desc,
              const std::vector<const TrajectoryRecord*>& batch, SupervisionPolicy sup,
              const std::vector<Mat>& noise, ElboDiagnostics* diag = nullptr);

// Convenience overload that draws the noise from `rng`.
Var elbo_loss(Graph& g, const Vae& vae, const EnvDescriptor& desc,
              const std::vector<const TrajectoryRecord*>& batch, SupervisionPolicy sup, Rng& rng,
              ElboDiagnostics* diag = nullptr);

// Shapes the noise matrices `elbo_loss` expects for this batch.
std::vector<Mat> make_elbo_noise(const Vae& vae, const std::vector<const TrajectoryRecord*>& batch,
                                 Rng& rng);

// Imputed filter input and action encoding streams for one trajectory, in the
// exact layout `elbo_loss` consumes (also used by evaluation).
Eigen::RowVectorXd imputed_input_row(const TrajectoryRecord& traj, int t, double fill_value);
Eigen::RowVectorXd action_encoding_row(const TrajectoryRecord& traj, int t,
                                       const EnvDescriptor& desc);

// Online belief extraction for the RL loop; runs the filter without gradients.
class BeliefTracker {
public:
    explicit BeliefTracker(const Vae& vae);

    void reset();
    // Feeds the observation of the current step and the encoding of the
    // previous action (zeros at the first step); returns b_t.
    Eigen::VectorXd update(const MaskedObservation& obs, const Eigen::VectorXd& prev_action_enc);

private:
    const Vae* vae_;
    Mat h_, c_;
};

// Single-step belief for the non-sequential baseline.
Eigen::VectorXd nonseq_belief(const Vae& vae, const MaskedObservation& obs);

}  // namespace afa
