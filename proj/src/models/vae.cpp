#include "afa/models/vae.hpp"

#include <algorithm>
#include <cmath>

#include "afa/core/errors.hpp"

namespace afa {

using namespace afa::nn;

namespace {
constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * ln(2*pi)
}

Eigen::RowVectorXd zero_impute(const MaskedObservation& obs, const ImputerConfig& cfg) {
    require(obs.observed.size() == static_cast<Eigen::Index>(obs.mask.size()),
            "zero_impute: observed/mask size mismatch");
    Eigen::RowVectorXd out(obs.observed.size());
    for (Eigen::Index i = 0; i < obs.observed.size(); ++i) {
        out[i] = obs.mask[i] ? static_cast<double>(obs.observed[i]) : cfg.fill_value;
    }
    return out;
}

void VaeSpec::validate() const {
    require(obs_dim >= 1, "VaeSpec: obs_dim must be >= 1");
    require(d_z >= 1, "VaeSpec: d_z must be >= 1");
    require(beta >= 0.0, "VaeSpec: beta must be >= 0");
    if (family == VaeFamily::frame) {
        require(frame_size >= 4 && frame_size * frame_size == obs_dim,
                "VaeSpec: frame_size inconsistent with obs_dim");
        require(frame_size % (sequential ? 8 : 4) == 0,
                "VaeSpec: frame_size must be divisible by the conv stack's total stride");
    }
    if (sequential) {
        require(action_dim >= 1, "VaeSpec: sequential model needs action_dim");
        require(lstm_hidden >= 1, "VaeSpec: lstm_hidden must be >= 1");
    }
}

VaeSpec ball_nonseq_spec() {
    VaeSpec s;
    s.family = VaeFamily::frame;
    s.sequential = false;
    s.frame_size = 32;
    s.obs_dim = 32 * 32;
    s.d_z = 32;
    s.beta = 1.0;
    s.fill_value = 0.5;
    return s;
}

VaeSpec ball_seq_spec() {
    VaeSpec s = ball_nonseq_spec();
    s.sequential = true;
    s.action_dim = 9;  // 5 controls one-hot + 4 acquisition bits
    s.lstm_hidden = 32;
    return s;
}

VaeSpec sepsis_nonseq_spec() {
    VaeSpec s;
    s.family = VaeFamily::vector;
    s.sequential = false;
    s.obs_dim = 8;
    s.d_z = 10;
    s.beta = 0.01;
    s.fill_value = -10.0;
    return s;
}

VaeSpec sepsis_seq_spec() {
    VaeSpec s = sepsis_nonseq_spec();
    s.sequential = true;
    s.action_dim = 12;  // 8 controls one-hot + 4 acquisition bits
    s.lstm_hidden = 32;
    return s;
}

Vae::Vae(const VaeSpec& spec, uint64_t init_seed) : spec_(spec) {
    spec_.validate();
    Rng rng(derive_seed(init_seed, "vae_init"));

    if (spec_.family == VaeFamily::vector) {
        if (!spec_.sequential) {
            int in = spec_.obs_dim;
            for (size_t i = 0; i < spec_.enc_widths.size(); ++i) {
                enc_.emplace_back(params_, "enc" + std::to_string(i), in, spec_.enc_widths[i],
                                  rng);
                in = spec_.enc_widths[i];
            }
            mu_ = Linear(params_, "mu", in, spec_.d_z, rng, Init::xavier);
            logvar_ = Linear(params_, "logvar", in, spec_.d_z, rng, Init::xavier);
        } else {
            int in = spec_.obs_dim;
            for (size_t i = 0; i < spec_.state_proj_widths.size(); ++i) {
                sproj_.emplace_back(params_, "sproj" + std::to_string(i), in,
                                    spec_.state_proj_widths[i], rng);
                in = spec_.state_proj_widths[i];
            }
            const int fx_dim = in;
            aproj_ = Linear(params_, "aproj", spec_.action_dim, spec_.action_proj_width, rng);
            require(spec_.action_proj_width == fx_dim,
                    "VaeSpec: action projection width must match the state feature width");
            int tin = 3 * fx_dim;  // [f_x, f_a, f_x * f_a]
            for (size_t i = 0; i < spec_.trunk_widths.size(); ++i) {
                trunk_.emplace_back(params_, "trunk" + std::to_string(i), tin,
                                    spec_.trunk_widths[i], rng);
                tin = spec_.trunk_widths[i];
            }
            lstm_ = LstmCell(params_, "lstm", tin, spec_.lstm_hidden, rng);
            mu_ = Linear(params_, "mu", spec_.lstm_hidden, spec_.d_z, rng, Init::xavier);
            logvar_ = Linear(params_, "logvar", spec_.lstm_hidden, spec_.d_z, rng, Init::xavier);
        }
        // decoder: shared by both variants
        int din = spec_.d_z;
        for (size_t i = 0; i < spec_.dec_widths.size(); ++i) {
            dec_.emplace_back(params_, "dec" + std::to_string(i), din, spec_.dec_widths[i], rng);
            din = spec_.dec_widths[i];
        }
        dec_out_ = Linear(params_, "dec_out", din, spec_.decoder_dim(), rng, Init::xavier);
        return;
    }

    // frame family; halving convolutions with kernel 4, stride 2, pad 1
    const int fs = spec_.frame_size;
    auto halving = [&](int in_c, int in_hw, int out_c) {
        ConvSpec cs;
        cs.in_channels = in_c;
        cs.in_h = cs.in_w = in_hw;
        cs.out_channels = out_c;
        cs.kernel = 4;
        cs.stride = 2;
        cs.pad = 1;
        return cs;
    };
    if (!spec_.sequential) {
        convs_.emplace_back(params_, "conv0", halving(1, fs, spec_.frame_enc_c1), rng);
        convs_.emplace_back(params_, "conv1", halving(spec_.frame_enc_c1, fs / 2,
                                                      spec_.frame_enc_c2), rng);
        const int flat = spec_.frame_enc_c2 * (fs / 4) * (fs / 4);
        enc_fc_ = Linear(params_, "enc_fc", flat, spec_.frame_enc_fc, rng);
        mu_ = Linear(params_, "mu", spec_.frame_enc_fc, spec_.d_z, rng, Init::xavier);
        logvar_ = Linear(params_, "logvar", spec_.frame_enc_fc, spec_.d_z, rng, Init::xavier);
    } else {
        convs_.emplace_back(params_, "conv0", halving(1, fs, spec_.frame_seq_channels), rng);
        convs_.emplace_back(params_, "conv1",
                            halving(spec_.frame_seq_channels, fs / 2, spec_.frame_seq_channels),
                            rng);
        convs_.emplace_back(params_, "conv2",
                            halving(spec_.frame_seq_channels, fs / 4, spec_.frame_seq_channels),
                            rng);
        const int flat = spec_.frame_seq_channels * (fs / 8) * (fs / 8);
        fx_ = Linear(params_, "fx", flat, spec_.frame_seq_fx, rng);
        aproj_ = Linear(params_, "aproj", spec_.action_dim, spec_.frame_seq_action_proj, rng);
        require(spec_.frame_seq_action_proj == spec_.frame_seq_fx,
                "VaeSpec: action projection width must match the frame feature width");
        int tin = 3 * spec_.frame_seq_fx;
        for (size_t i = 0; i < spec_.trunk_widths.size(); ++i) {
            trunk_.emplace_back(params_, "trunk" + std::to_string(i), tin, spec_.trunk_widths[i],
                                rng);
            tin = spec_.trunk_widths[i];
        }
        lstm_ = LstmCell(params_, "lstm", tin, spec_.lstm_hidden, rng);
        mu_ = Linear(params_, "mu", spec_.lstm_hidden, spec_.d_z, rng, Init::xavier);
        logvar_ = Linear(params_, "logvar", spec_.lstm_hidden, spec_.d_z, rng, Init::xavier);
    }
    // decoder: FC to a (4, fs/4, fs/4) seed, two upsampling deconvolutions,
    // then a stride-1 head emitting two logits per pixel
    const int seed_hw = fs / 4;
    dec_fc_ = Linear(params_, "dec_fc", spec_.d_z, 4 * seed_hw * seed_hw, rng);
    ConvTransposeSpec d0;
    d0.in_channels = 4;
    d0.in_h = d0.in_w = seed_hw;
    d0.out_channels = spec_.frame_dec_c1;
    d0.kernel = 4;
    d0.stride = 2;
    d0.pad = 1;
    deconvs_.emplace_back(params_, "deconv0", d0, rng);
    ConvTransposeSpec d1 = d0;
    d1.in_channels = spec_.frame_dec_c1;
    d1.in_h = d1.in_w = fs / 2;
    d1.out_channels = spec_.frame_dec_c2;
    deconvs_.emplace_back(params_, "deconv1", d1, rng);
    ConvTransposeSpec d2;
    d2.in_channels = spec_.frame_dec_c2;
    d2.in_h = d2.in_w = fs;
    d2.out_channels = 2;
    d2.kernel = 3;
    d2.stride = 1;
    d2.pad = 1;
    deconvs_.emplace_back(params_, "deconv2", d2, rng);
}

LatentVars Vae::encode(Graph& g, Var imputed) const {
    require(!spec_.sequential, "Vae::encode is the non-sequential entry point");
    require(imputed.cols() == spec_.obs_dim, "Vae::encode: input width mismatch");
    Var h = imputed;
    if (spec_.family == VaeFamily::vector) {
        for (size_t i = 0; i < enc_.size(); ++i) {
            h = enc_[i](g, h);
            if (i + 1 < enc_.size()) h = relu(h);
        }
    } else {
        h = relu(convs_[0](g, h));
        h = relu(convs_[1](g, h));
        h = relu(enc_fc_(g, h));
    }
    return {mu_(g, h), logvar_(g, h)};
}

FilterVars Vae::initial_state(Graph& g, int batch) const {
    require(spec_.sequential, "Vae::initial_state: non-sequential model has no filter");
    return {g.input(Mat::Zero(batch, spec_.lstm_hidden)),
            g.input(Mat::Zero(batch, spec_.lstm_hidden))};
}

std::pair<FilterVars, LatentVars> Vae::filter_step(Graph& g, const FilterVars& prev, Var imputed,
                                                   Var action_enc) const {
    require(spec_.sequential, "Vae::filter_step: model is not sequential");
    require(imputed.cols() == spec_.obs_dim, "Vae::filter_step: observation width mismatch");
    require(action_enc.cols() == spec_.action_dim, "Vae::filter_step: action width mismatch");

    Var fx = imputed;
    if (spec_.family == VaeFamily::vector) {
        for (size_t i = 0; i < sproj_.size(); ++i) {
            fx = sproj_[i](g, fx);
            if (i + 1 < sproj_.size()) fx = relu(fx);
        }
    } else {
        for (const auto& conv : convs_) fx = relu(conv(g, fx));
        fx = fx_(g, fx);
    }
    Var fa = aproj_(g, action_enc);
    Var fc = concat_cols({fx, fa, mul(fx, fa)});
    for (const auto& layer : trunk_) fc = relu(layer(g, fc));
    auto [h, c] = lstm_(g, fc, prev.h, prev.c);
    return {FilterVars{h, c}, LatentVars{mu_(g, h), logvar_(g, h)}};
}

Var Vae::decode(Graph& g, Var z) const {
    require(z.cols() == spec_.d_z, "Vae::decode: latent width mismatch");
    if (spec_.family == VaeFamily::vector) {
        Var h = z;
        for (const auto& layer : dec_) h = relu(layer(g, h));
        return dec_out_(g, h);
    }
    Var h = relu(dec_fc_(g, z));
    h = relu(deconvs_[0](g, h));
    h = relu(deconvs_[1](g, h));
    return deconvs_[2](g, h);  // logits, 2 channels
}

Eigen::RowVectorXd imputed_input_row(const TrajectoryRecord& traj, int t, double fill_value) {
    const int dim = static_cast<int>(traj.observations.cols());
    Eigen::RowVectorXd out(dim);
    for (int i = 0; i < dim; ++i) {
        out[i] = traj.mask_at(t, i) ? static_cast<double>(traj.observations(t, i)) : fill_value;
    }
    return out;
}

Eigen::RowVectorXd action_encoding_row(const TrajectoryRecord& traj, int t,
                                       const EnvDescriptor& desc) {
    Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(action_encoding_dim(desc));
    if (t == 0) return out;  // no action precedes the first observation
    JointAction a;
    a.control = traj.controls[t - 1];
    a.acquisition = FeatureMask(desc.n_features);
    for (int f = 0; f < desc.n_features; ++f) {
        a.acquisition.bits[f] = traj.acquisition_at(t - 1, f, desc.n_features);
    }
    return encode_action(a, desc).transpose();
}

namespace {

// Elementwise negative log-likelihood of the full target under the decoder
// output: two-logit categorical per pixel for frames, unit-variance Gaussian
// per entry for vectors.
Var elementwise_nll(Graph& g, const VaeSpec& spec, Var decoded, const Mat& target) {
    Var x = g.input(target);
    if (spec.family == VaeFamily::frame) {
        const int p = spec.obs_dim;
        Var l0 = slice_cols(decoded, 0, p);
        Var l1 = slice_cols(decoded, p, p);
        Var lse = logaddexp(l0, l1);
        Var picked = add(l0, mul(x, sub(l1, l0)));  // l0 + x*(l1-l0), x in {0,1}
        return sub(lse, picked);
    }
    Var diff = sub(decoded, x);
    return add_scalar(scale(square(diff), 0.5), kHalfLog2Pi);
}

// KL(q || N(0, I)) per element: 0.5 * (mu^2 + e^lv - 1 - lv).
Var elementwise_kl(Graph& g, const LatentVars& lat) {
    Var a = add(square(lat.mean), exp_op(lat.log_var));
    Var b = add_scalar(neg(lat.log_var), -1.0);
    (void)g;
    return scale(add(a, b), 0.5);
}

struct StepTensors {
    Mat input, action, target, w_obs, w_unobs;
};

/// Target-bit policy: observed entries always count; unobserved ones only under
// `full` or when the trajectory's stored supervision selects them.
void fill_weights(const TrajectoryRecord& traj, int t, SupervisionPolicy sup, int row, Mat& w_obs,
                  Mat& w_unobs) {
    const int dim = static_cast<int>(traj.observations.cols());
    if (sup == SupervisionPolicy::stored) {
        require(traj.supervision.size() == static_cast<size_t>(dim),
                "elbo: stored supervision requested but the trajectory has none");
    }
    for (int i = 0; i < dim; ++i) {
        const bool observed = traj.mask_at(t, i) != 0;
        w_obs(row, i) = observed ? 1.0 : 0.0;
        bool sup_bit = false;
        if (!observed) {
            switch (sup) {
                case SupervisionPolicy::partial: sup_bit = false; break;
                case SupervisionPolicy::full: sup_bit = true; break;
                case SupervisionPolicy::stored: sup_bit = traj.supervision[i] != 0; break;
            }
        }
        w_unobs(row, i) = sup_bit ? 1.0 : 0.0;
    }
}

}  // namespace

std::vector<Mat> make_elbo_noise(const Vae& vae, const std::vector<const TrajectoryRecord*>& batch,
                                 Rng& rng) {
    require(!batch.empty(), "make_elbo_noise: empty batch");
    auto fill = [&](Mat& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.normal();
    };
    std::vector<Mat> noise;
    if (vae.spec().sequential) {
        int t_max = 0;
        for (const auto* tr : batch) t_max = std::max(t_max, tr->length);
        for (int t = 0; t < t_max; ++t) {
            Mat m(static_cast<Eigen::Index>(batch.size()), vae.spec().d_z);
            fill(m);
            noise.push_back(std::move(m));
        }
    } else {
        Eigen::Index n = 0;
        for (const auto* tr : batch) n += tr->length;
        Mat m(n, vae.spec().d_z);
        fill(m);
        noise.push_back(std::move(m));
    }
    return noise;
}

Var elbo_loss(Graph& g, const Vae& vae, const EnvDescriptor& desc,
              const std::vector<const TrajectoryRecord*>& batch, SupervisionPolicy sup,
              const std::vector<Mat>& noise, ElboDiagnostics* diag) {
    require(!batch.empty(), "elbo: empty batch");
    const VaeSpec& spec = vae.spec();
    const int dim = spec.obs_dim;
    for (const auto* tr : batch) {
        require(tr != nullptr && tr->length >= 1, "elbo: empty trajectory in batch");
        require(tr->observations.cols() == dim, "elbo: trajectory width mismatch");
    }

    Var obs_nll = g.input(Mat::Zero(1, 1));
    Var unobs_nll = g.input(Mat::Zero(1, 1));
    Var kl_sum = g.input(Mat::Zero(1, 1));
    int n_units = 0;

    if (spec.sequential) {
        const int B = static_cast<int>(batch.size());
        int t_max = 0;
        for (const auto* tr : batch) t_max = std::max(t_max, tr->length);
        require(static_cast<int>(noise.size()) == t_max,
                "elbo: sequential noise must have one matrix per time step");
        n_units = B;

        FilterVars st = vae.initial_state(g, B);
        for (int t = 0; t < t_max; ++t) {
            require(noise[t].rows() == B && noise[t].cols() == spec.d_z,
                    "elbo: noise shape mismatch");
            StepTensors s;
            s.input = Mat::Constant(B, dim, spec.fill_value);
            s.action = Mat::Zero(B, spec.action_dim);
            s.target = Mat::Zero(B, dim);
            s.w_obs = Mat::Zero(B, dim);
            s.w_unobs = Mat::Zero(B, dim);
            Mat valid = Mat::Zero(B, spec.d_z);
            for (int b = 0; b < B; ++b) {
                const TrajectoryRecord& tr = *batch[b];
                if (t >= tr.length) continue;  // padded; weights stay zero
                s.input.row(b) = imputed_input_row(tr, t, spec.fill_value);
                s.action.row(b) = action_encoding_row(tr, t, desc);
                s.target.row(b) = tr.observations.row(t).cast<double>();
                fill_weights(tr, t, sup, b, s.w_obs, s.w_unobs);
                valid.row(b).setOnes();
            }
            auto [next, lat] = vae.filter_step(g, st, g.input(s.input), g.input(s.action));
            st = next;
            Var z = add(lat.mean, mul(exp_op(scale(lat.log_var, 0.5)), g.input(noise[t])));
            Var nll = elementwise_nll(g, spec, vae.decode(g, z), s.target);
            obs_nll = add(obs_nll, sum_all(mul(nll, g.input(s.w_obs))));
            unobs_nll = add(unobs_nll, sum_all(mul(nll, g.input(s.w_unobs))));
            kl_sum = add(kl_sum, sum_all(mul(elementwise_kl(g, lat), g.input(valid))));
        }
    } else {
        Eigen::Index n = 0;
        for (const auto* tr : batch) n += tr->length;
        require(noise.size() == 1 && noise[0].rows() == n && noise[0].cols() == spec.d_z,
                "elbo: non-sequential noise must be one matrix with a row per sample");
        n_units = static_cast<int>(n);

        Mat input(n, dim), target(n, dim);
        Mat w_obs = Mat::Zero(n, dim), w_unobs = Mat::Zero(n, dim);
        Eigen::Index row = 0;
        for (const auto* tr : batch) {
            for (int t = 0; t < tr->length; ++t, ++row) {
                input.row(row) = imputed_input_row(*tr, t, spec.fill_value);
                target.row(row) = tr->observations.row(t).cast<double>();
                fill_weights(*tr, t, sup, static_cast<int>(row), w_obs, w_unobs);
            }
        }
        LatentVars lat = vae.encode(g, g.input(input));
        Var z = add(lat.mean, mul(exp_op(scale(lat.log_var, 0.5)), g.input(noise[0])));
        Var nll = elementwise_nll(g, spec, vae.decode(g, z), target);
        obs_nll = add(obs_nll, sum_all(mul(nll, g.input(w_obs))));
        unobs_nll = add(unobs_nll, sum_all(mul(nll, g.input(w_unobs))));
        kl_sum = add(kl_sum, sum_all(elementwise_kl(g, lat)));
    }

    const double inv_n = 1.0 / n_units;
    Var recon = add(obs_nll, unobs_nll);
    Var loss = scale(add(recon, scale(kl_sum, spec.beta)), inv_n);
    if (diag) {
        diag->loss = loss.val()(0, 0);
        diag->recon_observed = obs_nll.val()(0, 0) * inv_n;
        diag->recon_unobserved = unobs_nll.val()(0, 0) * inv_n;
        diag->kl = kl_sum.val()(0, 0) * inv_n;
        diag->n_units = n_units;
    }
    return loss;
}

Var elbo_loss(Graph& g, const Vae& vae, const EnvDescriptor& desc,
              const std::vector<const TrajectoryRecord*>& batch, SupervisionPolicy sup, Rng& rng,
              ElboDiagnostics* diag) {
    return elbo_loss(g, vae, desc, batch, sup, make_elbo_noise(vae, batch, rng), diag);
}

BeliefTracker::BeliefTracker(const Vae& vae) : vae_(&vae) {
    require(vae.spec().sequential, "BeliefTracker needs a sequential model");
    reset();
}

void BeliefTracker::reset() {
    h_ = Mat::Zero(1, vae_->spec().lstm_hidden);
    c_ = Mat::Zero(1, vae_->spec().lstm_hidden);
}

Eigen::VectorXd BeliefTracker::update(const MaskedObservation& obs,
                                      const Eigen::VectorXd& prev_action_enc) {
    Graph g(false);
    const ImputerConfig imp{vae_->spec().fill_value};
    Mat x(1, vae_->spec().obs_dim);
    x.row(0) = zero_impute(obs, imp);
    Mat a(1, vae_->spec().action_dim);
    a.row(0) = prev_action_enc.transpose();
    FilterVars prev{g.input(h_), g.input(c_)};
    auto [next, lat] = vae_->filter_step(g, prev, g.input(x), g.input(a));
    h_ = next.h.val();
    c_ = next.c.val();
    return lat.mean.val().row(0).transpose();
}

Eigen::VectorXd nonseq_belief(const Vae& vae, const MaskedObservation& obs) {
    Graph g(false);
    const ImputerConfig imp{vae.spec().fill_value};
    Mat x(1, vae.spec().obs_dim);
    x.row(0) = zero_impute(obs, imp);
    LatentVars lat = vae.encode(g, g.input(x));
    return lat.mean.val().row(0).transpose();
}

}  // namespace afa
