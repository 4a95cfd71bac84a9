#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace afa {

using ObsVec = Eigen::VectorXf;

// Static description of an environment: feature-acquisition groups, raw
// observation layout and action-space sizes shared by every other module.
struct EnvDescriptor {
    std::string name;
    int n_features = 0;            // number of acquirable feature groups
    std::vector<int> obs_shape;    // raw observation shape, e.g. {32, 32} or {8}
    int n_control_actions = 0;
    int max_steps = 0;
    // group index -> raw observation indices revealed by acquiring that group.
    // Groups must be disjoint; raw indices outside every group are always observed.
    std::vector<std::vector<int>> feature_group_map;

    int obs_dim() const;
    void validate() const;
};

struct FeatureMask {
    std::vector<uint8_t> bits;

    FeatureMask() = default;
    explicit FeatureMask(int n, bool value = false) : bits(n, value ? 1 : 0) {}

    int size() const { return static_cast<int>(bits.size()); }
    int count() const;
    bool operator==(const FeatureMask& o) const { return bits == o.bits; }
};

struct JointAction {
    int control = 0;
    FeatureMask acquisition;
};

// Observation as seen through an acquisition mask. `full` is only populated by
// privileged producers (dataset generation); policies must consume `observed`
// plus `mask` only.
struct MaskedObservation {
    ObsVec full;                 // empty unless the producer has privileged access
    ObsVec observed;             // entries at mask==0 are zero and carry no meaning
    std::vector<uint8_t> mask;   // raw-index visibility

    bool has_full() const { return full.size() > 0; }
    void validate() const;
};

struct StepResult {
    MaskedObservation obs;   // observation of the next state, filtered by this
                             // step's acquisition
    double reward = 0.0;
    double cost = 0.0;
    bool terminal = false;
    std::map<std::string, std::string> info;
};

// Uniform per-feature acquisition cost and discount. A per-feature cost vector
// is left as an extension point; everything in this artifact uses the uniform
// model.
struct CostModel {
    double unit_cost = 0.0;
    double discount = 0.99;

    void validate() const;
};

// One recorded episode. All sequences share length T. Stored in 32-bit floats
// and 8-bit booleans so the on-disk dataset format round-trips bit-exactly.
struct TrajectoryRecord {
    int length = 0;                       // T
    Eigen::MatrixXf observations;         // T x obs_dim, full feature tensors
    std::vector<uint8_t> masks;           // T * obs_dim, raw-index visibility
    std::vector<int32_t> controls;        // T
    std::vector<uint8_t> acquisitions;    // T * n_features
    std::vector<float> rewards;           // T
    std::vector<float> costs;             // T
    bool terminal_flag = false;
    std::vector<uint8_t> supervision;     // obs_dim; which raw entries may be
                                          // used as reconstruction targets

    uint8_t mask_at(int t, int raw) const { return masks[static_cast<size_t>(t) * observations.cols() + raw]; }
    uint8_t acquisition_at(int t, int feature, int n_features) const {
        return acquisitions[static_cast<size_t>(t) * n_features + feature];
    }
    void validate(const EnvDescriptor& desc, const CostModel& cm) const;
};

// --- Operations ------------------------------------------------------------

// Total acquisition cost of one mask: unit_cost * |selected features|.
double acquisition_cost(const FeatureMask& mask, const CostModel& cm);

// Expands a feature-group mask to raw-index visibility. Raw indices outside
// every group are always observed.
std::vector<uint8_t> expand_mask(const FeatureMask& mask, const EnvDescriptor& desc);

// Cost-adjusted discounted returns G_t = sum_k gamma^k (r_{t+k} - cost_{t+k}),
// returned for every t.
std::vector<double> discounted_return(const std::vector<double>& rewards,
                                      const std::vector<double>& costs,
                                      const CostModel& cm);

// Encodes a joint action as one-hot(control) ++ acquisition bits; the action
// input format shared by the filter and dataset pipelines.
Eigen::VectorXd encode_action(const JointAction& action, const EnvDescriptor& desc);
inline int action_encoding_dim(const EnvDescriptor& desc) {
    return desc.n_control_actions + desc.n_features;
}

}  // namespace afa
