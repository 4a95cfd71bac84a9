#include "afa/envs/bouncing_ball.hpp"

#include <cmath>

#include "afa/core/errors.hpp"

namespace afa {

BouncingBallEnv::BouncingBallEnv(const BallConfig& cfg, const CostModel& cost)
    : cfg_(cfg), cost_(cost), desc_(make_descriptor(cfg)) {
    desc_.validate();
    cost_.validate();
}

EnvDescriptor BouncingBallEnv::make_descriptor(const BallConfig& cfg) {
    EnvDescriptor d;
    d.name = "bouncing_ball";
    d.n_features = 4;
    d.obs_shape = {cfg.box_size, cfg.box_size};
    d.n_control_actions = 5;
    d.max_steps = cfg.max_steps;
    // quadrants in order: upper-left, upper-right, lower-left, lower-right
    const int half = cfg.box_size / 2;
    d.feature_group_map.assign(4, {});
    for (int i = 0; i < cfg.box_size; ++i) {
        for (int j = 0; j < cfg.box_size; ++j) {
            const int q = (i < half ? 0 : 2) + (j < half ? 0 : 1);
            d.feature_group_map[q].push_back(i * cfg.box_size + j);
        }
    }
    return d;
}

MaskedObservation BouncingBallEnv::reset(uint64_t seed) {
    rng_.reseed(seed);
    const double half = cfg_.box_size / 2.0;
    state_ = BallState{};
    state_.x = rng_.uniform(0.0, half);
    state_.y = rng_.uniform(0.0, half);
    double tx = 0.0, ty = 0.0, norm = 0.0;
    do {
        tx = rng_.uniform(-0.5, 0.5);
        ty = rng_.uniform(-0.5, 0.5);
        norm = std::sqrt(tx * tx + ty * ty);
    } while (norm == 0.0);
    state_.vx = cfg_.speed_init * tx / norm;
    state_.vy = cfg_.speed_init * ty / norm;
    state_.step_count = 0;
    done_ = false;
    return observe(FeatureMask(desc_.n_features, false));
}

BallState BouncingBallEnv::step_dynamics(const BallState& s, int control, const BallConfig& cfg) {
    require(control >= 0 && control < 5, "bouncing_ball: control index out of range");
    BallState n = s;
    double dx = 0.0, dy = 0.0;
    switch (control) {
        case 0: dx = -cfg.velocity_delta; break;
        case 1: dx = +cfg.velocity_delta; break;
        case 2: dy = +cfg.velocity_delta; break;
        case 3: dy = -cfg.velocity_delta; break;
        default: break;  // null action
    }
    // An update that would exceed the per-axis cap is discarded, not clamped.
    if (std::abs(n.vx + dx) <= cfg.max_speed) n.vx += dx;
    if (std::abs(n.vy + dy) <= cfg.max_speed) n.vy += dy;

    n.x += n.vx;
    n.y += n.vy;
    // Specular reflection; the wall the ball center bounces on sits one radius
    // inside the box. Repeated until interior (a fast corner hit can need two).
    const double lo = cfg.ball_radius;
    const double hi = cfg.box_size - cfg.ball_radius;
    while (n.x < lo || n.x > hi) {
        if (n.x < lo) n.x = 2.0 * lo - n.x;
        if (n.x > hi) n.x = 2.0 * hi - n.x;
        n.vx = -n.vx;
    }
    while (n.y < lo || n.y > hi) {
        if (n.y < lo) n.y = 2.0 * lo - n.y;
        if (n.y > hi) n.y = 2.0 * hi - n.y;
        n.vy = -n.vy;
    }
    n.step_count = s.step_count + 1;
    return n;
}

StepResult BouncingBallEnv::step(const JointAction& action) {
    require(!done_, "bouncing_ball: step called on a finished episode");
    require(action.acquisition.size() == desc_.n_features,
            "bouncing_ball: acquisition mask length mismatch");
    state_ = step_dynamics(state_, action.control, cfg_);

    StepResult result;
    const bool at_target = std::abs(state_.x - cfg_.target_x) <= cfg_.target_threshold &&
                           std::abs(state_.y - cfg_.target_y) <= cfg_.target_threshold;
    if (at_target) {
        result.reward = cfg_.reward_success;
        result.terminal = true;
    } else if (state_.step_count >= cfg_.max_steps) {
        result.terminal = true;
    }
    result.cost = acquisition_cost(action.acquisition, cost_);
    result.obs = observe(action.acquisition);
    done_ = result.terminal;
    return result;
}

ObsVec BouncingBallEnv::render(const BallState& s, const BallConfig& cfg) {
    ObsVec frame = ObsVec::Zero(cfg.box_size * cfg.box_size);
    const double r2 = cfg.ball_radius * cfg.ball_radius;
    for (int i = 0; i < cfg.box_size; ++i) {
        for (int j = 0; j < cfg.box_size; ++j) {
            const double di = i - s.y;
            const double dj = j - s.x;
            if (di * di + dj * dj <= r2) frame[i * cfg.box_size + j] = 1.0f;
        }
    }
    return frame;
}

MaskedObservation BouncingBallEnv::observe(const FeatureMask& acquisition) const {
    MaskedObservation obs;
    obs.full = render(state_, cfg_);
    obs.mask = expand_mask(acquisition, desc_);
    obs.observed = ObsVec::Zero(obs.full.size());
    for (Eigen::Index i = 0; i < obs.full.size(); ++i) {
        if (obs.mask[i]) obs.observed[i] = obs.full[i];
    }
    return obs;
}

}  // namespace afa
