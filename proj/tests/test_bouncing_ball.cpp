#include <doctest.h>

#include <cmath>

#include "afa/core/rng.hpp"
#include "afa/envs/bouncing_ball.hpp"

using namespace afa;

namespace {

FeatureMask random_mask(Rng& rng, int n) {
    FeatureMask m(n);
    for (auto& b : m.bits) b = rng.bernoulli(0.5) ? 1 : 0;
    return m;
}

}  // namespace

TEST_CASE("ball descriptor: quadrant groups partition the frame") {
    const auto desc = BouncingBallEnv::make_descriptor();
    CHECK(desc.n_features == 4);
    CHECK(desc.obs_dim() == 32 * 32);
    CHECK(desc.n_control_actions == 5);
    size_t total = 0;
    for (const auto& g : desc.feature_group_map) total += g.size();
    CHECK(total == 1024);  // disjointness is enforced by validate()

    // spot-check quadrant membership: (row, col) -> group
    auto contains = [&](int q, int i, int j) {
        const int raw = i * 32 + j;
        for (int idx : desc.feature_group_map[q])
            if (idx == raw) return true;
        return false;
    };
    CHECK(contains(0, 0, 0));     // upper-left
    CHECK(contains(1, 3, 20));    // upper-right
    CHECK(contains(2, 30, 4));    // lower-left
    CHECK(contains(3, 16, 16));   // lower-right
}

TEST_CASE("ball render matches a per-pixel oracle") {
    BallConfig cfg;
    Rng rng(71);
    for (int trial = 0; trial < 20; ++trial) {
        BallState s;
        s.x = rng.uniform(0.0, 32.0);
        s.y = rng.uniform(0.0, 32.0);
        const auto frame = BouncingBallEnv::render(s, cfg);
        for (int i = 0; i < 32; ++i) {
            for (int j = 0; j < 32; ++j) {
                const double d2 = (j - s.x) * (j - s.x) + (i - s.y) * (i - s.y);
                const float expect = d2 <= cfg.ball_radius * cfg.ball_radius ? 1.0f : 0.0f;
                REQUIRE(frame[i * 32 + j] == expect);
            }
        }
    }
}

TEST_CASE("ball reset: upper-left start, exact initial speed, null observation") {
    BouncingBallEnv env;
    for (uint64_t seed = 0; seed < 50; ++seed) {
        const auto obs = env.reset(seed);
        const auto& s = env.state();
        CHECK(s.x >= 0.0);
        CHECK(s.x < 16.0);
        CHECK(s.y >= 0.0);
        CHECK(s.y < 16.0);
        const double speed = std::sqrt(s.vx * s.vx + s.vy * s.vy);
        CHECK(std::abs(speed - 4.0) <= 1e-9);
        // first observation reveals nothing
        for (uint8_t m : obs.mask) REQUIRE(m == 0);
        CHECK(obs.observed.isZero(0.0f));
    }
}

TEST_CASE("ball velocity updates past the cap are discarded, not clamped") {
    BallConfig cfg;
    BallState s;
    s.x = 16.0;
    s.y = 16.0;
    s.vx = 4.8;
    s.vy = 0.0;
    // +0.5 would give 5.3 > 5: discarded
    auto n = BouncingBallEnv::step_dynamics(s, 1, cfg);
    CHECK(n.vx == doctest::Approx(4.8));
    // -0.5 gives 4.3: applied
    n = BouncingBallEnv::step_dynamics(s, 0, cfg);
    CHECK(n.vx == doctest::Approx(4.3));
    // exactly reaching the cap is allowed
    s.vx = 4.5;
    n = BouncingBallEnv::step_dynamics(s, 1, cfg);
    CHECK(n.vx == doctest::Approx(5.0));
    // null action leaves velocity alone
    n = BouncingBallEnv::step_dynamics(s, 4, cfg);
    CHECK(n.vx == doctest::Approx(4.5));
    CHECK(n.vy == doctest::Approx(0.0));
}

TEST_CASE("ball reflects specularly off the walls") {
    BallConfig cfg;
    BallState s;
    s.x = 29.8;
    s.y = 16.0;
    s.vx = 1.0;
    s.vy = 0.0;
    // Euler would give x = 30.8, past the wall at 30: reflect to 29.2
    auto n = BouncingBallEnv::step_dynamics(s, 4, cfg);
    CHECK(n.x == doctest::Approx(29.2));
    CHECK(n.vx == doctest::Approx(-1.0));

    s.x = 16.0;
    s.y = 2.5;
    s.vx = 0.0;
    s.vy = -1.5;
    // y -> 1.0, below the wall at 2: reflect to 3.0
    n = BouncingBallEnv::step_dynamics(s, 4, cfg);
    CHECK(n.y == doctest::Approx(3.0));
    CHECK(n.vy == doctest::Approx(1.5));
}

TEST_CASE("ball reaching the target pays the success reward and terminates") {
    BouncingBallEnv env;
    env.reset(3);
    BallState s;
    s.x = 5.0;
    s.y = 24.5;
    s.vx = 0.0;
    s.vy = 0.5;  // null step lands exactly on the target
    env.set_state(s);
    JointAction a;
    a.control = 4;
    a.acquisition = FeatureMask(4);
    const auto r = env.step(a);
    CHECK(r.reward == doctest::Approx(1.0));
    CHECK(r.terminal);

    // Just outside the threshold: no reward.
    env.reset(4);
    s.x = 5.0;
    s.y = 23.4;
    s.vx = 0.0;
    s.vy = 0.5;  // lands at 23.9, |23.9 - 25| > 1
    env.set_state(s);
    const auto r2 = env.step(a);
    CHECK(r2.reward == doctest::Approx(0.0));
    CHECK_FALSE(r2.terminal);
}

TEST_CASE("ball fuzz: containment, caps, reward logic over long rollouts") {
    BallConfig cfg;
    CostModel cost;
    cost.unit_cost = 0.01;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        BouncingBallEnv env(cfg, cost);
        Rng rng(derive_seed(seed, "ball_fuzz"));
        env.reset(seed);
        int steps_taken = 0;
        while (steps_taken < 10000) {
            JointAction a;
            a.control = static_cast<int>(rng.uniform_int(5));
            a.acquisition = random_mask(rng, 4);
            const auto r = env.step(a);
            ++steps_taken;
            const auto& s = env.state();
            // containment: the center never leaves [radius, box - radius]
            REQUIRE(s.x >= cfg.ball_radius);
            REQUIRE(s.x <= cfg.box_size - cfg.ball_radius);
            REQUIRE(s.y >= cfg.ball_radius);
            REQUIRE(s.y <= cfg.box_size - cfg.ball_radius);
            // velocity caps
            REQUIRE(std::abs(s.vx) <= cfg.max_speed + 1e-12);
            REQUIRE(std::abs(s.vy) <= cfg.max_speed + 1e-12);
            // reward exactly when inside the target box
            const bool at_target = std::abs(s.x - cfg.target_x) <= cfg.target_threshold &&
                                   std::abs(s.y - cfg.target_y) <= cfg.target_threshold;
            REQUIRE(r.reward == (at_target ? cfg.reward_success : 0.0));
            if (at_target) REQUIRE(r.terminal);
            // cost follows the acquisition count
            REQUIRE(r.cost == doctest::Approx(cost.unit_cost * a.acquisition.count()));
            // masked observation honors the mask
            for (size_t i = 0; i < r.obs.mask.size(); ++i) {
                if (!r.obs.mask[i]) REQUIRE(r.obs.observed[i] == 0.0f);
            }
            if (r.terminal) {
                REQUIRE((at_target || s.step_count >= cfg.max_steps));
                env.reset(derive_seed(seed, "ball_fuzz_reset", steps_taken));
            }
        }
    }
}

TEST_CASE("ball episodes are deterministic given the seed") {
    BouncingBallEnv a, b;
    a.reset(123);
    b.reset(123);
    Rng rng(9);
    for (int t = 0; t < 50; ++t) {
        JointAction act;
        act.control = static_cast<int>(rng.uniform_int(5));
        act.acquisition = random_mask(rng, 4);
        const auto ra = a.step(act);
        const auto rb = b.step(act);
        REQUIRE(ra.reward == rb.reward);
        REQUIRE(ra.terminal == rb.terminal);
        REQUIRE(ra.obs.full == rb.obs.full);
        if (ra.terminal) break;
    }
}
