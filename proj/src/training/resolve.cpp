#include "afa/training/resolve.hpp"

#include "afa/core/errors.hpp"

namespace afa::training {

const char* to_string(SupervisionPolicy sup) {
    switch (sup) {
        case SupervisionPolicy::partial: return "partial";
        case SupervisionPolicy::full: return "full";
        case SupervisionPolicy::stored: return "stored";
    }
    return "?";
}

ResolvedModel resolve_model(const io::ExperimentConfig& cfg) {
    cfg.validate();
    const bool ball = cfg.env.name == "bouncing_ball";
    const bool sequential = cfg.model.kind == "seq_po_vae";

    ResolvedModel r;
    r.end_to_end = cfg.model.kind == "end_to_end";
    if (ball) {
        r.vae_spec = sequential ? ball_seq_spec() : ball_nonseq_spec();
        r.vae_learning_rate = sequential ? 5e-4 : 1e-4;
    } else {
        r.vae_spec = sequential ? sepsis_seq_spec() : sepsis_nonseq_spec();
        r.vae_learning_rate = sequential ? 1e-3 : 1e-4;
    }
    if (cfg.model.d_z > 0) r.vae_spec.d_z = cfg.model.d_z;
    if (cfg.model.beta >= 0.0) r.vae_spec.beta = cfg.model.beta;
    if (cfg.vae.learning_rate > 0.0) r.vae_learning_rate = cfg.vae.learning_rate;

    if (cfg.model.kind == "nonseq_zi_partial") r.supervision = SupervisionPolicy::partial;
    else if (cfg.model.kind == "nonseq_zi_full") r.supervision = SupervisionPolicy::full;
    else r.supervision = SupervisionPolicy::stored;  // honours the dataset's bits

    r.fill_value = r.vae_spec.fill_value;
    r.policy_input_dim = r.end_to_end ? r.vae_spec.obs_dim : r.vae_spec.d_z;
    return r;
}

PolicySpec make_policy_spec(const io::ExperimentConfig& cfg) {
    const ResolvedModel r = resolve_model(cfg);
    const bool ball = cfg.env.name == "bouncing_ball";
    if (r.end_to_end)
        return ball ? ball_e2e_policy_spec(r.vae_spec.frame_size)
                    : sepsis_e2e_policy_spec(r.vae_spec.obs_dim);
    return ball ? ball_policy_spec(r.policy_input_dim) : sepsis_policy_spec(r.policy_input_dim);
}

nlohmann::json resolved_meta(const io::ExperimentConfig& cfg) {
    const ResolvedModel r = resolve_model(cfg);
    return nlohmann::json{{"env", cfg.env.name},
                          {"model_kind", cfg.model.kind},
                          {"d_z", r.vae_spec.d_z},
                          {"beta", r.vae_spec.beta},
                          {"vae_learning_rate", r.vae_learning_rate},
                          {"supervision", to_string(r.supervision)},
                          {"fill_value", r.fill_value},
                          {"policy_input_dim", r.policy_input_dim},
                          {"config_hash", cfg.config_hash()}};
}

}  // namespace afa::training
