#pragma once

#include "afa/core/rng.hpp"
#include "afa/core/types.hpp"

namespace afa {

struct BallState {
    double x = 0.0, y = 0.0;     // pixel coordinates, y grows downward
    double vx = 0.0, vy = 0.0;   // pixels per step
    int step_count = 0;
};

struct BallConfig {
    int box_size = 32;
    double ball_radius = 2.0;
    double target_x = 5.0, target_y = 25.0;
    double target_threshold = 1.0;   // per axis
    double speed_init = 4.0;
    double velocity_delta = 0.5;
    double max_speed = 5.0;          // per axis cap
    int max_steps = 50;
    double reward_success = 1.0;
};

// Ball-in-a-box navigation task. Observation is a binary box_size x box_size
// frame; feature acquisition selects which of the four quadrants of the next
// frame are revealed. Control actions: 0: Vx-d, 1: Vx+d, 2: Vy+d (down),
// 3: Vy-d (up), 4: null.
class BouncingBallEnv {
public:
    explicit BouncingBallEnv(const BallConfig& cfg = {}, const CostModel& cost = {});

    static EnvDescriptor make_descriptor(const BallConfig& cfg = {});

    const EnvDescriptor& descriptor() const { return desc_; }
    const BallConfig& config() const { return cfg_; }
    const BallState& state() const { return state_; }

    // Starts an episode: position uniform in the upper-left quadrant, speed
    // exactly speed_init, null (fully masked) first observation.
    MaskedObservation reset(uint64_t seed);
    StepResult step(const JointAction& action);

    // Deterministic single-step dynamics: velocity delta with the cap rule,
    // Euler position update, specular reflection off the walls.
    static BallState step_dynamics(const BallState& s, int control, const BallConfig& cfg);

    // Binary frame: pixel (row i, col j) is 1 iff (j-x)^2 + (i-y)^2 <= radius^2.
    static ObsVec render(const BallState& s, const BallConfig& cfg);

    // Test hook: forces the current state (episode bookkeeping untouched).
    void set_state(const BallState& s) { state_ = s; done_ = false; }

private:
    MaskedObservation observe(const FeatureMask& acquisition) const;

    BallConfig cfg_;
    CostModel cost_;
    EnvDescriptor desc_;
    BallState state_;
    Rng rng_;
    bool done_ = true;
};

}  // namespace afa
