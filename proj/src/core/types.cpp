#include "afa/core/types.hpp"

#include <algorithm>
#include <cmath>

#include "afa/core/errors.hpp"

namespace afa {

int EnvDescriptor::obs_dim() const {
    int d = 1;
    for (int s : obs_shape) d *= s;
    return d;
}

void EnvDescriptor::validate() const {
    require(n_features >= 1, "EnvDescriptor: n_features must be >= 1");
    require(max_steps >= 1, "EnvDescriptor: max_steps must be >= 1");
    require(n_control_actions >= 1, "EnvDescriptor: n_control_actions must be >= 1");
    require(static_cast<int>(feature_group_map.size()) == n_features,
            "EnvDescriptor: feature_group_map must have one entry per feature");
    std::vector<uint8_t> seen(obs_dim(), 0);
    for (const auto& group : feature_group_map) {
        for (int raw : group) {
            require(raw >= 0 && raw < obs_dim(), "EnvDescriptor: raw index out of range");
            require(!seen[raw], "EnvDescriptor: feature groups must be disjoint");
            seen[raw] = 1;
        }
    }
}

int FeatureMask::count() const {
    return static_cast<int>(std::count(bits.begin(), bits.end(), uint8_t{1}));
}

void MaskedObservation::validate() const {
    require(observed.size() == static_cast<Eigen::Index>(mask.size()),
            "MaskedObservation: observed/mask size mismatch");
    if (has_full()) {
        require(full.size() == observed.size(), "MaskedObservation: full/observed size mismatch");
        for (Eigen::Index i = 0; i < observed.size(); ++i) {
            if (mask[i]) {
                require(observed[i] == full[i],
                        "MaskedObservation: observed must agree with full where visible");
            }
        }
    }
}

void CostModel::validate() const {
    require(unit_cost >= 0.0, "CostModel: unit_cost must be >= 0");
    require(discount >= 0.0 && discount < 1.0, "CostModel: discount must be in [0, 1)");
}

void TrajectoryRecord::validate(const EnvDescriptor& desc, const CostModel& cm) const {
    const int T = length;
    const size_t dim = static_cast<size_t>(desc.obs_dim());
    require(T >= 1 && T <= desc.max_steps, "TrajectoryRecord: length out of range");
    require(observations.rows() == T && observations.cols() == desc.obs_dim(),
            "TrajectoryRecord: observations shape mismatch");
    require(masks.size() == static_cast<size_t>(T) * dim, "TrajectoryRecord: masks size mismatch");
    require(controls.size() == static_cast<size_t>(T), "TrajectoryRecord: controls size mismatch");
    require(acquisitions.size() == static_cast<size_t>(T) * desc.n_features,
            "TrajectoryRecord: acquisitions size mismatch");
    require(rewards.size() == static_cast<size_t>(T), "TrajectoryRecord: rewards size mismatch");
    require(costs.size() == static_cast<size_t>(T), "TrajectoryRecord: costs size mismatch");
    require(supervision.empty() || supervision.size() == dim,
            "TrajectoryRecord: supervision size mismatch");
    for (int t = 0; t < T; ++t) {
        require(controls[t] >= 0 && controls[t] < desc.n_control_actions,
                "TrajectoryRecord: control index out of range");
        int acquired = 0;
        for (int f = 0; f < desc.n_features; ++f) acquired += acquisition_at(t, f, desc.n_features);
        const double expected = cm.unit_cost * acquired;
        require(std::abs(static_cast<double>(costs[t]) - expected) <= 1e-6,
                "TrajectoryRecord: cost inconsistent with acquisitions");
    }
}

double acquisition_cost(const FeatureMask& mask, const CostModel& cm) {
    return cm.unit_cost * mask.count();
}

std::vector<uint8_t> expand_mask(const FeatureMask& mask, const EnvDescriptor& desc) {
    require(mask.size() == desc.n_features, "expand_mask: mask length != n_features");
    std::vector<uint8_t> raw(desc.obs_dim(), 1);
    for (const auto& group : desc.feature_group_map) {
        for (int idx : group) raw[idx] = 0;
    }
    for (int f = 0; f < desc.n_features; ++f) {
        if (!mask.bits[f]) continue;
        for (int idx : desc.feature_group_map[f]) raw[idx] = 1;
    }
    return raw;
}

std::vector<double> discounted_return(const std::vector<double>& rewards,
                                      const std::vector<double>& costs,
                                      const CostModel& cm) {
    require(rewards.size() == costs.size(), "discounted_return: length mismatch");
    std::vector<double> returns(rewards.size(), 0.0);
    double acc = 0.0;
    for (int t = static_cast<int>(rewards.size()) - 1; t >= 0; --t) {
        acc = (rewards[t] - costs[t]) + cm.discount * acc;
        returns[t] = acc;
    }
    return returns;
}

Eigen::VectorXd encode_action(const JointAction& action, const EnvDescriptor& desc) {
    require(action.control >= 0 && action.control < desc.n_control_actions,
            "encode_action: control index out of range");
    require(action.acquisition.size() == desc.n_features,
            "encode_action: acquisition mask length mismatch");
    Eigen::VectorXd enc = Eigen::VectorXd::Zero(action_encoding_dim(desc));
    enc[action.control] = 1.0;
    for (int f = 0; f < desc.n_features; ++f) {
        enc[desc.n_control_actions + f] = action.acquisition.bits[f] ? 1.0 : 0.0;
    }
    return enc;
}

}  // namespace afa
