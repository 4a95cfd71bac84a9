#pragma once

#include <string>

#include <json.hpp>

#include "afa/io/config.hpp"
#include "afa/models/policy.hpp"
#include "afa/models/vae.hpp"

namespace afa::training {

// Concrete model choices derived from the config's sentinel values ("auto"
// learning rate, d_z, beta). Recorded verbatim in every artifact so a run can
// be reproduced without re-deriving the tables.
struct ResolvedModel {
    bool end_to_end = false;
    VaeSpec vae_spec;               // meaningful unless end_to_end
    SupervisionPolicy supervision = SupervisionPolicy::full;
    double vae_learning_rate = 0.0;
    int policy_input_dim = 0;       // d_z, or obs_dim for end-to-end agents
    double fill_value = 0.0;        // imputation fill for raw-observation inputs
};

// Reference learning rates: ball 1e-4 non-sequential / 5e-4 sequential;
// sepsis 1e-4 non-sequential / 1e-3 sequential. Reference betas and latent
// sizes come from the model factories (ball beta 1.0, sepsis 0.01).
ResolvedModel resolve_model(const io::ExperimentConfig& cfg);

// Policy architecture for the configured env and model kind; belief-driven
// agents take the latent width, end-to-end agents the raw observation layout.
PolicySpec make_policy_spec(const io::ExperimentConfig& cfg);

// JSON block of the resolved choices for checkpoint/manifest meta.
nlohmann::json resolved_meta(const io::ExperimentConfig& cfg);

const char* to_string(SupervisionPolicy sup);

}  // namespace afa::training
