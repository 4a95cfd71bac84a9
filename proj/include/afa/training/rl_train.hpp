#pragma once

#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "afa/io/config.hpp"
#include "afa/models/policy.hpp"
#include "afa/models/vae.hpp"
#include "afa/training/env_factory.hpp"

namespace afa::training {

// Turns raw masked observations into policy inputs. Belief-driven agents run
// the trained filter (recurrent or single-step); end-to-end agents impute the
// unobserved entries with the task's fill value. Call `features` exactly once
// per observation in step order: the recurrent filter advances on every call.
class FeaturePipeline {
public:
    // `vae == nullptr` selects plain imputation.
    FeaturePipeline(const Vae* vae, double fill_value, const EnvDescriptor& desc);

    void reset();
    // `prev_action == nullptr` marks the first observation of an episode.
    Eigen::VectorXd features(const MaskedObservation& obs, const JointAction* prev_action);

private:
    const Vae* vae_;
    double fill_;
    EnvDescriptor desc_;
    std::optional<BeliefTracker> tracker_;
};

// Aggregates over one batch of evaluation episodes. Standard errors are
// across episodes (sample standard deviation / sqrt(n)).
struct EvalSummary {
    int episodes = 0;
    double mean_task_reward = 0.0, stderr_task_reward = 0.0;
    double mean_cost_adjusted_return = 0.0, stderr_cost_adjusted_return = 0.0;
    double mean_acquisitions = 0.0, stderr_acquisitions = 0.0;
    double discharge_rate = 0.0;  // sepsis outcome fractions; 0 elsewhere
    double mortality_rate = 0.0;
    double mean_length = 0.0;
    double total_cost = 0.0;     // summed acquisition charges, all episodes
    long total_acquired_bits = 0;
};

struct EvalOptions {
    int episodes = 100;
    uint64_t seed = 0;  // base stream; episode i uses a derived sub-seed
    bool greedy = true;
    // Replaces every sampled acquisition mask with independent Bernoulli(p)
    // draws (the fixed random-acquisition baseline).
    std::optional<double> random_acquisition_p;
};

// Runs `opts.episodes` episodes on a fresh environment built from `cfg` and
// reports undiscounted per-episode sums: task reward (rewards only) and
// cost-adjusted return (rewards minus acquisition charges).
EvalSummary evaluate_policy(const PolicyNet& net, const Vae* vae, const io::ExperimentConfig& cfg,
                            const EvalOptions& opts);

// Acquisition price active while env_steps < until_env_step. Phases must be
// strictly increasing; the last phase's price covers any remainder. Switching
// phases rebuilds the environments, so episodes in flight restart.
struct CostPhase {
    long until_env_step = 0;
    double unit_cost = 0.0;
};

// Two-phase warm-up used when training an end-to-end collection policy:
// 0.01 per bit for the first 80% of steps, then 0.02.
std::vector<CostPhase> e2e_warmup_schedule(long total_env_steps);

struct JointTrainOptions {
    // Pre-trained filter weights; required for belief-driven model kinds and
    // rejected for end-to-end ones.
    std::string vae_checkpoint;
    // Fixed Bernoulli(p) acquisition instead of the learned head; the head is
    // excluded from the loss so only control and critic learn.
    std::optional<double> random_acquisition_p;
    std::vector<CostPhase> cost_schedule;  // empty: config unit_cost throughout
    bool deterministic_timing = true;      // metrics wall_seconds written as 0
    std::ostream* log = nullptr;           // one line per evaluation point
};

struct JointTrainResult {
    std::string checkpoint_path;  // final policy weights + run meta
    std::string metrics_path;     // evaluation curve CSV
    long env_steps = 0;
    long updates = 0;
    EvalSummary final_eval;
    // Training-time acquisition totals, for exact cost accounting checks.
    double total_cost_charged = 0.0;
    long total_bits_acquired = 0;
};

// Joint actor-critic training of the control and acquisition policies over
// the configured environment. Workers collect rollouts in parallel against
// the shared network; gradient updates are applied by a single thread, in
// worker order when rl.serialized_updates is set (bit-reproducible) or in
// completion order otherwise. A greedy evaluation runs before training and
// after each rl.eval_interval env steps, appending one metrics row each time.
JointTrainResult train_joint(const io::ExperimentConfig& cfg, const JointTrainOptions& opts);

}  // namespace afa::training
