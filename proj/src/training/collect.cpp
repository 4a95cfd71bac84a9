#include "afa/training/collect.hpp"

#include <cmath>
#include <filesystem>
#include <memory>
#include <thread>
#include <vector>

#include "afa/core/errors.hpp"
#include "afa/io/checkpoint.hpp"
#include "afa/io/dataset.hpp"
#include "afa/io/metrics.hpp"
#include "afa/models/policy.hpp"
#include "afa/models/vae.hpp"
#include "afa/training/env_factory.hpp"
#include "afa/training/resolve.hpp"

namespace afa::training {

namespace {

// One full episode under either the random policy or the collection policy.
TrajectoryRecord roll_trajectory(Env& env, const PolicyNet* policy, double fill_value,
                                 double supervision_fraction, uint64_t seed) {
    const EnvDescriptor& desc = env.descriptor();
    const int dim = desc.obs_dim();
    const int nf = desc.n_features;
    Rng act_rng(derive_seed(seed, "act"));

    std::vector<float> observations;
    TrajectoryRecord r;
    r.masks.clear();
    MaskedObservation obs = env.reset(seed);
    PolicyState pstate;
    if (policy) pstate = policy->initial_state();

    bool terminal = false;
    int T = 0;
    while (!terminal) {
        require(obs.has_full(), "collect: env must expose full observations");
        for (int d = 0; d < dim; ++d) observations.push_back(obs.full[d]);
        r.masks.insert(r.masks.end(), obs.mask.begin(), obs.mask.end());

        JointAction action;
        action.acquisition = FeatureMask(nf);
        if (policy) {
            const Eigen::RowVectorXd imputed = zero_impute(obs, ImputerConfig{fill_value});
            const ActResult ar = policy->act(imputed.transpose(), pstate, act_rng);
            action = ar.action;
            pstate = ar.state;
        } else {
            action.control = static_cast<int>(act_rng.uniform_int(desc.n_control_actions));
            for (int f = 0; f < nf; ++f) action.acquisition.bits[f] = act_rng.bernoulli(0.5);
        }

        const StepResult sr = env.step(action);
        r.controls.push_back(action.control);
        for (int f = 0; f < nf; ++f)
            r.acquisitions.push_back(action.acquisition.bits[f]);
        r.rewards.push_back(static_cast<float>(sr.reward));
        r.costs.push_back(static_cast<float>(sr.cost));
        terminal = sr.terminal;
        obs = sr.obs;
        ++T;
    }
    r.length = T;
    r.observations = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                                                    Eigen::RowMajor>>(observations.data(), T, dim);
    r.terminal_flag = terminal;

    // Separate stream: trajectories are identical across supervision fractions.
    Rng sup_rng(derive_seed(seed, "supervision"));
    r.supervision.resize(dim);
    for (int d = 0; d < dim; ++d)
        r.supervision[d] = sup_rng.bernoulli(supervision_fraction) ? 1 : 0;
    return r;
}

std::vector<TrajectoryRecord> roll_split(const io::ExperimentConfig& cfg, const PolicyNet* policy,
                                         double fill_value, const std::string& stream, int total,
                                         int n_random) {
    std::vector<TrajectoryRecord> records(total);
    const int n_threads =
        std::max(1, std::min<int>(cfg.rl.workers, std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int w = 0; w < n_threads; ++w) {
        pool.emplace_back([&, w] {
            std::unique_ptr<Env> env = make_env(cfg);
            for (int i = w; i < total; i += n_threads) {
                const uint64_t seed = derive_seed(cfg.master_seed, stream, i);
                const PolicyNet* source = i < n_random ? nullptr : policy;
                records[i] = roll_trajectory(*env, source, fill_value,
                                             cfg.dataset.supervision_fraction, seed);
            }
        });
    }
    for (auto& t : pool) t.join();
    return records;
}

}  // namespace

CollectResult collect_dataset(const io::ExperimentConfig& cfg) {
    cfg.validate();
    const ResolvedModel resolved = resolve_model(cfg);
    const std::unique_ptr<Env> probe = make_env(cfg);
    const EnvDescriptor& desc = probe->descriptor();
    const CostModel cm = make_cost_model(cfg);

    const int n_train = cfg.dataset.train_trajectories;
    const int n_test = cfg.dataset.test_trajectories;
    const double fraction = cfg.dataset.random_only ? 1.0 : cfg.dataset.random_fraction;
    const int n_random_train = static_cast<int>(std::llround(fraction * n_train));
    const int n_random_test = static_cast<int>(std::llround(fraction * n_test));

    std::unique_ptr<PolicyNet> policy;
    std::string generator = "random";
    if (n_random_train < n_train || n_random_test < n_test) {
        if (cfg.dataset.collect_policy_checkpoint.empty())
            throw ValidationError(
                "collect: the non-random share needs dataset.collect_policy_checkpoint, or set "
                "dataset.random_only=true");
        io::ExperimentConfig e2e_cfg = cfg;
        e2e_cfg.model.kind = "end_to_end";
        policy = std::make_unique<PolicyNet>(make_policy_spec(e2e_cfg), /*init_seed=*/0);
        const nlohmann::json meta =
            io::load_checkpoint(cfg.dataset.collect_policy_checkpoint, policy->params());
        std::string policy_id = "e2e";
        if (meta.contains("config_hash")) policy_id += ":" + meta["config_hash"].get<std::string>();
        if (meta.contains("env") && meta["env"].get<std::string>() != cfg.env.name)
            throw ValidationError("collect: checkpoint was trained on env " +
                                  meta["env"].get<std::string>() + " but config selects " +
                                  cfg.env.name);
        generator = "mixed(random_fraction=" + io::format_double(fraction) +
                    ", policy=" + policy_id + ")";
    }

    io::DatasetMeta meta;
    meta.env_version = probe->version();
    meta.generator = generator;
    meta.config_hash = cfg.config_hash();
    meta.seed = cfg.master_seed;

    CollectResult result;
    result.train_dir = (std::filesystem::path(cfg.dataset.dir) / "train").string();
    result.test_dir = (std::filesystem::path(cfg.dataset.dir) / "test").string();
    result.n_random_train = n_random_train;
    result.n_policy_train = n_train - n_random_train;
    result.n_random_test = n_random_test;
    result.n_policy_test = n_test - n_random_test;

    const std::vector<TrajectoryRecord> train = roll_split(
        cfg, policy.get(), resolved.fill_value, "collect/train", n_train, n_random_train);
    io::write_dataset(result.train_dir, desc, cm, train, meta);
    const std::vector<TrajectoryRecord> test = roll_split(
        cfg, policy.get(), resolved.fill_value, "collect/test", n_test, n_random_test);
    io::write_dataset(result.test_dir, desc, cm, test, meta);
    return result;
}

}  // namespace afa::training
