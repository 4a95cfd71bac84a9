#pragma once

#include <memory>
#include <string>

#include "afa/core/types.hpp"
#include "afa/io/config.hpp"

namespace afa::training {

// Uniform episode interface over the two tasks so collection, RL and
// evaluation share one loop.
class Env {
public:
    virtual ~Env() = default;
    virtual MaskedObservation reset(uint64_t seed) = 0;
    virtual StepResult step(const JointAction& action) = 0;
    virtual const EnvDescriptor& descriptor() const = 0;
    // Version tag of the dynamics parameter file; empty for built-in dynamics.
    virtual std::string version() const = 0;
};

// Builds the configured environment. `unit_cost_override >= 0` replaces the
// config's acquisition cost (cost schedules and sweeps); max_steps 0 falls
// back to the task default (ball 50, sepsis 30).
std::unique_ptr<Env> make_env(const io::ExperimentConfig& cfg, double unit_cost_override = -1.0);

CostModel make_cost_model(const io::ExperimentConfig& cfg, double unit_cost_override = -1.0);

}  // namespace afa::training
