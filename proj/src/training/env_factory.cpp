#include "afa/training/env_factory.hpp"

#include "afa/core/errors.hpp"
#include "afa/envs/bouncing_ball.hpp"
#include "afa/envs/sepsis.hpp"

namespace afa::training {

namespace {

class BallEnvAdapter final : public Env {
public:
    BallEnvAdapter(const BallConfig& cfg, const CostModel& cost) : env_(cfg, cost) {}

    MaskedObservation reset(uint64_t seed) override { return env_.reset(seed); }
    StepResult step(const JointAction& action) override { return env_.step(action); }
    const EnvDescriptor& descriptor() const override { return env_.descriptor(); }
    std::string version() const override { return ""; }

private:
    BouncingBallEnv env_;
};

class SepsisEnvAdapter final : public Env {
public:
    SepsisEnvAdapter(SepsisDynamics dynamics, const CostModel& cost, int max_steps)
        : env_(std::move(dynamics), cost, max_steps) {}

    MaskedObservation reset(uint64_t seed) override { return env_.reset(seed); }
    StepResult step(const JointAction& action) override { return env_.step(action); }
    const EnvDescriptor& descriptor() const override { return env_.descriptor(); }
    std::string version() const override { return env_.dynamics().version; }

private:
    SepsisEnv env_;
};

}  // namespace

CostModel make_cost_model(const io::ExperimentConfig& cfg, double unit_cost_override) {
    CostModel cm;
    cm.unit_cost = unit_cost_override >= 0.0 ? unit_cost_override : cfg.env.unit_cost;
    cm.discount = cfg.env.discount;
    cm.validate();
    return cm;
}

std::unique_ptr<Env> make_env(const io::ExperimentConfig& cfg, double unit_cost_override) {
    const CostModel cm = make_cost_model(cfg, unit_cost_override);
    if (cfg.env.name == "bouncing_ball") {
        BallConfig ball;
        if (cfg.env.max_steps > 0) ball.max_steps = cfg.env.max_steps;
        return std::make_unique<BallEnvAdapter>(ball, cm);
    }
    if (cfg.env.name == "sepsis") {
        if (cfg.env.dynamics_file.empty())
            throw ValidationError("config: sepsis requires env.dynamics_file");
        SepsisDynamics dynamics = SepsisDynamics::load(cfg.env.dynamics_file);
        const int max_steps = cfg.env.max_steps > 0 ? cfg.env.max_steps : 30;
        return std::make_unique<SepsisEnvAdapter>(std::move(dynamics), cm, max_steps);
    }
    throw ValidationError("config: unknown env.name " + cfg.env.name);
}

}  // namespace afa::training
