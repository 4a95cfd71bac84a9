#pragma once

#include <string>
#include <vector>

#include "afa/core/rng.hpp"
#include "afa/core/types.hpp"

namespace afa {

struct VitalSpec {
    std::string name;
    int levels = 0;
    int normal_level = 0;
};

// Tabular dynamics for the sepsis simulator, loaded from a versioned parameter
// file. Transition rows are conditional distributions over the next level of
// one vital given (current level, treatment statuses in effect, diabetic).
struct SepsisDynamics {
    std::string version;
    std::vector<VitalSpec> vitals;                  // heart_rate, sys_bp, percoxyg, glucose
    double p_diabetic = 0.0;
    std::vector<std::vector<double>> initial_probs; // per vital, over levels
    bool reject_terminal_initial = true;
    // [vital][treatment_key][level] -> distribution over next levels, where
    // treatment_key = abx | vent<<1 | vaso<<2 | diabetic<<3.
    std::vector<std::vector<std::vector<std::vector<double>>>> transitions;
    int mortality_min_abnormal = 0;

    static constexpr int kTreatmentKeys = 16;
    static int treatment_key(bool abx, bool vent, bool vaso, bool diabetic) {
        return (abx ? 1 : 0) | (vent ? 2 : 0) | (vaso ? 4 : 0) | (diabetic ? 8 : 0);
    }

    int n_vitals() const { return static_cast<int>(vitals.size()); }
    void validate() const;

    // Parses and validates a dynamics file; rejects non-stochastic rows with an
    // error naming the offending row.
    static SepsisDynamics load(const std::string& path);
};

struct SepsisState {
    std::vector<int> levels;         // one level per vital
    bool abx_on = false, vent_on = false, vaso_on = false;
    bool diabetic = false;
    int step_count = 0;
};

enum class SepsisOutcome { none, discharge, mortality, timeout };
const char* to_string(SepsisOutcome outcome);

// 8-feature sepsis treatment task. Observation layout: 4 measurement vitals
// (level / (levels-1)), then abx, vent, vaso, diabetic. The four measurements
// are the acquirable features; treatments and the diabetes flag are free.
// Control actions are the 8 treatment subsets (bit 0: abx, 1: vent, 2: vaso).
class SepsisEnv {
public:
    SepsisEnv(SepsisDynamics dynamics, const CostModel& cost = {}, int max_steps = 30);

    static EnvDescriptor make_descriptor(const SepsisDynamics& dynamics, int max_steps = 30);

    const EnvDescriptor& descriptor() const { return desc_; }
    const SepsisDynamics& dynamics() const { return dyn_; }
    const SepsisState& state() const { return state_; }

    MaskedObservation reset(uint64_t seed);
    StepResult step(const JointAction& action);

    // Pure transition core: applies the decoded treatment subset and samples
    // each vital's next level from its table row.
    static SepsisState transition(const SepsisState& s, int control,
                                  const SepsisDynamics& dyn, Rng& rng);

    static SepsisOutcome classify(const SepsisState& s, const SepsisDynamics& dyn, int max_steps);
    static ObsVec encode_state(const SepsisState& s, const SepsisDynamics& dyn);

    // Test hook: forces the current state (episode bookkeeping untouched).
    void set_state(const SepsisState& s) { state_ = s; done_ = false; }

private:
    MaskedObservation observe(const FeatureMask& acquisition) const;

    SepsisDynamics dyn_;
    CostModel cost_;
    int max_steps_;
    EnvDescriptor desc_;
    SepsisState state_;
    Rng rng_;
    bool done_ = true;
};

}  // namespace afa
