#include "afa/io/config.hpp"

#include <algorithm>
#include <fstream>

#include "afa/core/errors.hpp"
#include "afa/io/dataset.hpp"

namespace afa::io {

using nlohmann::json;

namespace {

// Strict field-by-field reader: every key in the object must be consumed by
// exactly one registered field, otherwise the dotted path is reported.
class StrictObject {
public:
    StrictObject(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
        if (!j.is_object())
            throw ValidationError("config: " + (prefix_.empty() ? "root" : prefix_) +
                                  " must be an object");
    }

    template <typename T>
    void field(const char* key, T& out) {
        auto it = j_.find(key);
        if (it == j_.end()) return;  // keep the default
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            throw ValidationError("config: wrong type for key " + path(key));
        }
        seen_.push_back(key);
    }

    // Recurses into a sub-object; `fn` receives a StrictObject for it.
    template <typename Fn>
    void section(const char* key, Fn&& fn) {
        auto it = j_.find(key);
        if (it == j_.end()) return;
        StrictObject sub(*it, path(key));
        fn(sub);
        sub.finish();
        seen_.push_back(key);
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
                throw ValidationError("config: unknown key " + path(key.c_str()));
        }
    }

private:
    std::string path(const char* key) const {
        return prefix_.empty() ? std::string(key) : prefix_ + "." + key;
    }

    const json& j_;
    std::string prefix_;
    std::vector<std::string> seen_;
};

}  // namespace

void ExperimentConfig::validate() const {
    auto check = [](bool ok, const std::string& msg) {
        if (!ok) throw ValidationError("config: " + msg);
    };
    check(env.name == "bouncing_ball" || env.name == "sepsis",
          "env.name must be bouncing_ball or sepsis");
    check(env.unit_cost >= 0.0, "env.unit_cost must be >= 0");
    check(env.discount >= 0.0 && env.discount < 1.0, "env.discount must be in [0, 1)");
    check(env.max_steps >= 0, "env.max_steps must be >= 0");
    check(model.kind == "seq_po_vae" || model.kind == "nonseq_zi_partial" ||
              model.kind == "nonseq_zi_full" || model.kind == "end_to_end",
          "model.kind must be one of seq_po_vae, nonseq_zi_partial, nonseq_zi_full, "
          "end_to_end");
    check(model.d_z >= 0, "model.d_z must be >= 0");
    check(dataset.train_trajectories >= 1, "dataset.train_trajectories must be >= 1");
    check(dataset.test_trajectories >= 1, "dataset.test_trajectories must be >= 1");
    check(dataset.random_fraction >= 0.0 && dataset.random_fraction <= 1.0,
          "dataset.random_fraction must be in [0, 1]");
    check(dataset.supervision_fraction >= 0.0 && dataset.supervision_fraction <= 1.0,
          "dataset.supervision_fraction must be in [0, 1]");
    check(vae.learning_rate >= 0.0, "vae.learning_rate must be >= 0");
    check(vae.batch_size >= 1, "vae.batch_size must be >= 1");
    check(vae.epochs >= 1, "vae.epochs must be >= 1");
    check(vae.grad_clip >= 0.0, "vae.grad_clip must be >= 0");
    check(rl.learning_rate > 0.0, "rl.learning_rate must be > 0");
    check(rl.workers >= 1, "rl.workers must be >= 1");
    check(rl.rollout_length >= 1, "rl.rollout_length must be >= 1");
    check(rl.entropy_coef >= 0.0, "rl.entropy_coef must be >= 0");
    check(rl.value_coef >= 0.0, "rl.value_coef must be >= 0");
    check(rl.total_env_steps >= 1, "rl.total_env_steps must be >= 1");
    check(rl.eval_interval >= 1, "rl.eval_interval must be >= 1");
    check(rl.eval_episodes >= 1, "rl.eval_episodes must be >= 1");
    check(rl.grad_clip >= 0.0, "rl.grad_clip must be >= 0");
    check(!eval.costs.empty(), "eval.costs must be nonempty");
    for (double c : eval.costs) check(c >= 0.0, "eval.costs entries must be >= 0");
    for (double p : eval.random_probs)
        check(p >= 0.0 && p <= 1.0, "eval.random_probs entries must be in [0, 1]");
}

json ExperimentConfig::to_json() const {
    return json{
        {"master_seed", master_seed},
        {"output_dir", output_dir},
        {"env",
         {{"name", env.name},
          {"unit_cost", env.unit_cost},
          {"discount", env.discount},
          {"max_steps", env.max_steps},
          {"dynamics_file", env.dynamics_file}}},
        {"model", {{"kind", model.kind}, {"d_z", model.d_z}, {"beta", model.beta}}},
        {"dataset",
         {{"dir", dataset.dir},
          {"train_trajectories", dataset.train_trajectories},
          {"test_trajectories", dataset.test_trajectories},
          {"random_fraction", dataset.random_fraction},
          {"random_only", dataset.random_only},
          {"collect_policy_checkpoint", dataset.collect_policy_checkpoint},
          {"supervision_fraction", dataset.supervision_fraction}}},
        {"vae",
         {{"learning_rate", vae.learning_rate},
          {"batch_size", vae.batch_size},
          {"epochs", vae.epochs},
          {"grad_clip", vae.grad_clip}}},
        {"rl",
         {{"learning_rate", rl.learning_rate},
          {"workers", rl.workers},
          {"rollout_length", rl.rollout_length},
          {"entropy_coef", rl.entropy_coef},
          {"value_coef", rl.value_coef},
          {"total_env_steps", rl.total_env_steps},
          {"eval_interval", rl.eval_interval},
          {"eval_episodes", rl.eval_episodes},
          {"serialized_updates", rl.serialized_updates},
          {"grad_clip", rl.grad_clip}}},
        {"eval", {{"costs", eval.costs}, {"random_probs", eval.random_probs}}}};
}

std::string ExperimentConfig::config_hash() const {
    json j = to_json();
    j.erase("output_dir");
    const std::string canon = j.dump();
    return fnv_hex(fnv1a64(canon.data(), canon.size()));
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig cfg;
    StrictObject root(j, "");
    root.field("master_seed", cfg.master_seed);
    root.field("output_dir", cfg.output_dir);
    root.section("env", [&](StrictObject& o) {
        o.field("name", cfg.env.name);
        o.field("unit_cost", cfg.env.unit_cost);
        o.field("discount", cfg.env.discount);
        o.field("max_steps", cfg.env.max_steps);
        o.field("dynamics_file", cfg.env.dynamics_file);
    });
    root.section("model", [&](StrictObject& o) {
        o.field("kind", cfg.model.kind);
        o.field("d_z", cfg.model.d_z);
        o.field("beta", cfg.model.beta);
    });
    root.section("dataset", [&](StrictObject& o) {
        o.field("dir", cfg.dataset.dir);
        o.field("train_trajectories", cfg.dataset.train_trajectories);
        o.field("test_trajectories", cfg.dataset.test_trajectories);
        o.field("random_fraction", cfg.dataset.random_fraction);
        o.field("random_only", cfg.dataset.random_only);
        o.field("collect_policy_checkpoint", cfg.dataset.collect_policy_checkpoint);
        o.field("supervision_fraction", cfg.dataset.supervision_fraction);
    });
    root.section("vae", [&](StrictObject& o) {
        o.field("learning_rate", cfg.vae.learning_rate);
        o.field("batch_size", cfg.vae.batch_size);
        o.field("epochs", cfg.vae.epochs);
        o.field("grad_clip", cfg.vae.grad_clip);
    });
    root.section("rl", [&](StrictObject& o) {
        o.field("learning_rate", cfg.rl.learning_rate);
        o.field("workers", cfg.rl.workers);
        o.field("rollout_length", cfg.rl.rollout_length);
        o.field("entropy_coef", cfg.rl.entropy_coef);
        o.field("value_coef", cfg.rl.value_coef);
        o.field("total_env_steps", cfg.rl.total_env_steps);
        o.field("eval_interval", cfg.rl.eval_interval);
        o.field("eval_episodes", cfg.rl.eval_episodes);
        o.field("serialized_updates", cfg.rl.serialized_updates);
        o.field("grad_clip", cfg.rl.grad_clip);
    });
    root.section("eval", [&](StrictObject& o) {
        o.field("costs", cfg.eval.costs);
        o.field("random_probs", cfg.eval.random_probs);
    });
    root.finish();
    cfg.validate();
    return cfg;
}

void apply_override(json& j, const std::string& assignment) {
    const size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ValidationError("config: override must look like key.path=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);

    json* node = &j;
    size_t start = 0;
    while (true) {
        const size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (key.empty())
            throw ValidationError("config: empty key segment in override: " + assignment);
        if (dot == std::string::npos) {
            json value;
            try {
                value = json::parse(text);
            } catch (const json::exception&) {
                value = text;  // unquoted strings pass through verbatim
            }
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        if (!node->is_object() && !node->is_null())
            throw ValidationError("config: override path crosses a scalar: " + assignment);
        start = dot + 1;
    }
}

ExperimentConfig ExperimentConfig::load(const std::string& path,
                                        const std::vector<std::string>& overrides) {
    std::ifstream f(path);
    if (!f) throw ValidationError("config: cannot open " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ValidationError("config: malformed JSON in " + path + ": " + e.what());
    }
    for (const std::string& o : overrides) apply_override(j, o);
    return from_json(j);
}

ExperimentConfig ExperimentConfig::from_defaults(const std::string& env_name,
                                                 const std::vector<std::string>& overrides) {
    ExperimentConfig base;
    base.env.name = env_name;
    if (env_name == "bouncing_ball") base.env.dynamics_file = "";
    json j = base.to_json();
    for (const std::string& o : overrides) apply_override(j, o);
    return from_json(j);
}

}  // namespace afa::io
