#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace afa::io {

// Fully resolved experiment settings. Parsing is strict: unknown keys are
// rejected with their dotted path, so every accepted key is by construction
// one of the documented fields below. Scalar fields with value 0 (or -1 for
// beta) mean "resolve from the per-environment reference tables"; resolution
// happens in the training module and the resolved values are recorded in
// every artifact.
struct EnvSettings {
    std::string name = "sepsis";  // "bouncing_ball" | "sepsis"
    double unit_cost = 0.01;
    double discount = 0.99;
    int max_steps = 0;  // 0 -> environment default (ball 50, sepsis 30)
    std::string dynamics_file = "data/sepsis_dynamics.json";  // sepsis only
};

struct ModelSettings {
    // "seq_po_vae" | "nonseq_zi_partial" | "nonseq_zi_full" | "end_to_end"
    std::string kind = "seq_po_vae";
    int d_z = 0;        // 0 -> architecture default
    double beta = -1.0;  // < 0 -> reference default (ball 1.0, sepsis 0.01)
};

struct DatasetSettings {
    std::string dir = "dataset";
    int train_trajectories = 2000;
    int test_trajectories = 2000;
    double random_fraction = 0.5;  // portion collected by the random policy
    bool random_only = false;      // explicit fallback when no checkpoint given
    std::string collect_policy_checkpoint = "";
    double supervision_fraction = 1.0;  // unobserved entries eligible as targets
};

struct VaeTrainSettings {
    double learning_rate = 0.0;  // 0 -> reference table default
    int batch_size = 32;
    int epochs = 20;
    double grad_clip = 0.0;  // 0 -> off
};

struct RlSettings {
    double learning_rate = 1e-4;
    int workers = 16;
    int rollout_length = 20;
    double entropy_coef = 0.01;
    double value_coef = 0.5;
    long total_env_steps = 1000000;
    long eval_interval = 50000;  // env steps between greedy evaluations
    int eval_episodes = 100;
    bool serialized_updates = true;  // bit-reproducible update ordering
    double grad_clip = 40.0;
};

struct EvalSettings {
    std::vector<double> costs = {0.0, 0.01, 0.025};
    std::vector<double> random_probs = {0.25, 0.5, 0.75, 1.0};
};

struct ExperimentConfig {
    uint64_t master_seed = 1;
    std::string output_dir = "runs/out";
    EnvSettings env;
    ModelSettings model;
    DatasetSettings dataset;
    VaeTrainSettings vae;
    RlSettings rl;
    EvalSettings eval;

    void validate() const;
    nlohmann::json to_json() const;

    // FNV-1a over the canonicalized settings; `output_dir` is excluded so the
    // hash identifies the experiment's behavior, not where it writes.
    std::string config_hash() const;

    // Strict parse: unknown keys and type mismatches raise ValidationError
    // naming the dotted path.
    static ExperimentConfig from_json(const nlohmann::json& j);

    // Reads a JSON file, applies "a.b.c=value" overrides, then parses
    // strictly (so a mistyped override path fails like any unknown key).
    static ExperimentConfig load(const std::string& path,
                                 const std::vector<std::string>& overrides = {});
    static ExperimentConfig from_defaults(const std::string& env_name,
                                          const std::vector<std::string>& overrides = {});
};

// Applies one dotted-path override to a JSON tree; the value text is parsed
// as JSON when possible and kept as a string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

}  // namespace afa::io
