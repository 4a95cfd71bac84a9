#include "afa/envs/sepsis.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "afa/core/errors.hpp"

namespace afa {

using nlohmann::json;

namespace {
constexpr double kRowSumTolerance = 1e-9;

std::string row_name(const std::string& vital, int level, int key) {
    std::ostringstream os;
    os << vital << " level=" << level << " abx=" << (key & 1) << " vent=" << ((key >> 1) & 1)
       << " vaso=" << ((key >> 2) & 1) << " diabetic=" << ((key >> 3) & 1);
    return os.str();
}

int count_abnormal(const SepsisState& s, const SepsisDynamics& dyn) {
    int n = 0;
    for (int v = 0; v < dyn.n_vitals(); ++v) {
        if (s.levels[v] != dyn.vitals[v].normal_level) ++n;
    }
    return n;
}
}  // namespace

void SepsisDynamics::validate() const {
    if (vitals.empty()) throw ValidationError("sepsis dynamics: no vitals defined");
    if (p_diabetic < 0.0 || p_diabetic > 1.0)
        throw ValidationError("sepsis dynamics: p_diabetic out of [0,1]");
    if (initial_probs.size() != vitals.size())
        throw ValidationError("sepsis dynamics: initial distribution missing a vital");
    if (transitions.size() != vitals.size())
        throw ValidationError("sepsis dynamics: transition tables missing a vital");
    for (size_t v = 0; v < vitals.size(); ++v) {
        const int levels = vitals[v].levels;
        if (levels < 2) throw ValidationError("sepsis dynamics: vital needs >= 2 levels");
        if (vitals[v].normal_level < 0 || vitals[v].normal_level >= levels)
            throw ValidationError("sepsis dynamics: normal level out of range for " + vitals[v].name);
        auto check_row = [&](const std::vector<double>& row, const std::string& name) {
            if (static_cast<int>(row.size()) != levels)
                throw ValidationError("sepsis dynamics: row has wrong arity: " + name);
            double sum = 0.0;
            for (double p : row) {
                if (p < 0.0) throw ValidationError("sepsis dynamics: negative probability in " + name);
                sum += p;
            }
            if (std::abs(sum - 1.0) > kRowSumTolerance)
                throw ValidationError("sepsis dynamics: row does not sum to 1: " + name);
        };
        check_row(initial_probs[v], "initial " + vitals[v].name);
        if (static_cast<int>(transitions[v].size()) != kTreatmentKeys)
            throw ValidationError("sepsis dynamics: missing treatment combinations for " + vitals[v].name);
        for (int key = 0; key < kTreatmentKeys; ++key) {
            if (static_cast<int>(transitions[v][key].size()) != levels)
                throw ValidationError("sepsis dynamics: missing level rows for " + vitals[v].name);
            for (int level = 0; level < levels; ++level) {
                check_row(transitions[v][key][level], row_name(vitals[v].name, level, key));
            }
        }
    }
    if (mortality_min_abnormal < 1)
        throw ValidationError("sepsis dynamics: mortality_min_abnormal must be >= 1");
}

SepsisDynamics SepsisDynamics::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("sepsis dynamics: cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ValidationError("sepsis dynamics: malformed file " + path + ": " + e.what());
    }
    SepsisDynamics dyn;
    try {
        dyn.version = doc.at("version").get<std::string>();
        for (const auto& v : doc.at("vitals")) {
            dyn.vitals.push_back({v.at("name").get<std::string>(), v.at("levels").get<int>(),
                                  v.at("normal_level").get<int>()});
        }
        const auto& init = doc.at("initial");
        dyn.p_diabetic = init.at("p_diabetic").get<double>();
        dyn.reject_terminal_initial = init.value("reject_terminal", true);
        for (const auto& v : dyn.vitals) {
            dyn.initial_probs.push_back(init.at("vital_probs").at(v.name).get<std::vector<double>>());
        }
        dyn.transitions.assign(dyn.vitals.size(), {});
        const auto& tables = doc.at("transitions");
        for (size_t vi = 0; vi < dyn.vitals.size(); ++vi) {
            const auto& spec = dyn.vitals[vi];
            auto& table = dyn.transitions[vi];
            table.assign(kTreatmentKeys, std::vector<std::vector<double>>(spec.levels));
            std::vector<std::vector<uint8_t>> seen(kTreatmentKeys, std::vector<uint8_t>(spec.levels, 0));
            for (const auto& row : tables.at(spec.name)) {
                const int level = row.at("level").get<int>();
                const int key = treatment_key(row.at("abx").get<int>() != 0, row.at("vent").get<int>() != 0,
                                              row.at("vaso").get<int>() != 0, row.at("diabetic").get<int>() != 0);
                if (level < 0 || level >= spec.levels)
                    throw ValidationError("sepsis dynamics: level out of range in " + spec.name);
                if (seen[key][level])
                    throw ValidationError("sepsis dynamics: duplicate row " + row_name(spec.name, level, key));
                seen[key][level] = 1;
                table[key][level] = row.at("probs").get<std::vector<double>>();
            }
            for (int key = 0; key < kTreatmentKeys; ++key) {
                for (int level = 0; level < spec.levels; ++level) {
                    if (!seen[key][level])
                        throw ValidationError("sepsis dynamics: missing row " + row_name(spec.name, level, key));
                }
            }
        }
        dyn.mortality_min_abnormal = doc.at("outcome").at("mortality_min_abnormal").get<int>();
    } catch (const json::exception& e) {
        throw ValidationError("sepsis dynamics: schema error in " + path + ": " + e.what());
    }
    dyn.validate();
    return dyn;
}

const char* to_string(SepsisOutcome outcome) {
    switch (outcome) {
        case SepsisOutcome::discharge: return "discharge";
        case SepsisOutcome::mortality: return "mortality";
        case SepsisOutcome::timeout: return "timeout";
        default: return "none";
    }
}

SepsisEnv::SepsisEnv(SepsisDynamics dynamics, const CostModel& cost, int max_steps)
    : dyn_(std::move(dynamics)), cost_(cost), max_steps_(max_steps),
      desc_(make_descriptor(dyn_, max_steps)) {
    dyn_.validate();
    cost_.validate();
    desc_.validate();
}

EnvDescriptor SepsisEnv::make_descriptor(const SepsisDynamics& dynamics, int max_steps) {
    EnvDescriptor d;
    d.name = "sepsis";
    d.n_features = dynamics.n_vitals();
    d.obs_shape = {dynamics.n_vitals() + 4};  // vitals + abx, vent, vaso, diabetic
    d.n_control_actions = 8;                  // subsets of the 3 treatments
    d.max_steps = max_steps;
    d.feature_group_map.clear();
    for (int v = 0; v < dynamics.n_vitals(); ++v) d.feature_group_map.push_back({v});
    return d;
}

MaskedObservation SepsisEnv::reset(uint64_t seed) {
    rng_.reseed(seed);
    while (true) {
        state_ = SepsisState{};
        state_.diabetic = rng_.bernoulli(dyn_.p_diabetic);
        state_.levels.resize(dyn_.n_vitals());
        for (int v = 0; v < dyn_.n_vitals(); ++v) {
            state_.levels[v] = rng_.categorical(dyn_.initial_probs[v].data(),
                                                static_cast<int>(dyn_.initial_probs[v].size()));
        }
        if (!dyn_.reject_terminal_initial) break;
        const auto outcome = classify(state_, dyn_, max_steps_);
        if (outcome == SepsisOutcome::none) break;
    }
    done_ = false;
    return observe(FeatureMask(desc_.n_features, false));
}

SepsisState SepsisEnv::transition(const SepsisState& s, int control,
                                  const SepsisDynamics& dyn, Rng& rng) {
    require(control >= 0 && control < 8, "sepsis: control index out of range");
    SepsisState n = s;
    n.abx_on = (control & 1) != 0;
    n.vent_on = (control & 2) != 0;
    n.vaso_on = (control & 4) != 0;
    const int key = SepsisDynamics::treatment_key(n.abx_on, n.vent_on, n.vaso_on, n.diabetic);
    for (int v = 0; v < dyn.n_vitals(); ++v) {
        const auto& row = dyn.transitions[v][key][s.levels[v]];
        n.levels[v] = rng.categorical(row.data(), static_cast<int>(row.size()));
    }
    n.step_count = s.step_count + 1;
    return n;
}

SepsisOutcome SepsisEnv::classify(const SepsisState& s, const SepsisDynamics& dyn, int max_steps) {
    if (count_abnormal(s, dyn) == 0) return SepsisOutcome::discharge;
    if (count_abnormal(s, dyn) >= dyn.mortality_min_abnormal) return SepsisOutcome::mortality;
    if (s.step_count >= max_steps) return SepsisOutcome::timeout;
    return SepsisOutcome::none;
}

StepResult SepsisEnv::step(const JointAction& action) {
    require(!done_, "sepsis: step called on a finished episode");
    require(action.acquisition.size() == desc_.n_features,
            "sepsis: acquisition mask length mismatch");
    state_ = transition(state_, action.control, dyn_, rng_);

    StepResult result;
    const auto outcome = classify(state_, dyn_, max_steps_);
    switch (outcome) {
        case SepsisOutcome::discharge: result.reward = 1.0; result.terminal = true; break;
        case SepsisOutcome::mortality: result.reward = -1.0; result.terminal = true; break;
        case SepsisOutcome::timeout: result.terminal = true; break;
        case SepsisOutcome::none: break;
    }
    result.cost = acquisition_cost(action.acquisition, cost_);
    result.obs = observe(action.acquisition);
    result.info["outcome"] = to_string(outcome);
    done_ = result.terminal;
    return result;
}

ObsVec SepsisEnv::encode_state(const SepsisState& s, const SepsisDynamics& dyn) {
    ObsVec x = ObsVec::Zero(dyn.n_vitals() + 4);
    for (int v = 0; v < dyn.n_vitals(); ++v) {
        x[v] = static_cast<float>(s.levels[v]) / static_cast<float>(dyn.vitals[v].levels - 1);
    }
    x[dyn.n_vitals() + 0] = s.abx_on ? 1.0f : 0.0f;
    x[dyn.n_vitals() + 1] = s.vent_on ? 1.0f : 0.0f;
    x[dyn.n_vitals() + 2] = s.vaso_on ? 1.0f : 0.0f;
    x[dyn.n_vitals() + 3] = s.diabetic ? 1.0f : 0.0f;
    return x;
}

MaskedObservation SepsisEnv::observe(const FeatureMask& acquisition) const {
    MaskedObservation obs;
    obs.full = encode_state(state_, dyn_);
    obs.mask = expand_mask(acquisition, desc_);
    obs.observed = ObsVec::Zero(obs.full.size());
    for (Eigen::Index i = 0; i < obs.full.size(); ++i) {
        if (obs.mask[i]) obs.observed[i] = obs.full[i];
    }
    return obs;
}

}  // namespace afa
