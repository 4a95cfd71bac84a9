#include "afa/training/rl_train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <mutex>
#include <thread>
#include <vector>

#include "afa/core/errors.hpp"
#include "afa/io/checkpoint.hpp"
#include "afa/io/dataset.hpp"
#include "afa/io/metrics.hpp"
#include "afa/nn/layers.hpp"
#include "afa/training/resolve.hpp"

namespace afa::training {

FeaturePipeline::FeaturePipeline(const Vae* vae, double fill_value, const EnvDescriptor& desc)
    : vae_(vae), fill_(fill_value), desc_(desc) {
    if (vae_ && vae_->spec().sequential) tracker_.emplace(*vae_);
}

void FeaturePipeline::reset() {
    if (tracker_) tracker_->reset();
}

Eigen::VectorXd FeaturePipeline::features(const MaskedObservation& obs,
                                          const JointAction* prev_action) {
    if (!vae_) return zero_impute(obs, ImputerConfig{fill_}).transpose();
    if (!tracker_) return nonseq_belief(*vae_, obs);
    const Eigen::VectorXd enc = prev_action
                                    ? encode_action(*prev_action, desc_)
                                    : Eigen::VectorXd::Zero(action_encoding_dim(desc_));
    return tracker_->update(obs, enc);
}

namespace {

void overwrite_acquisition(JointAction& action, double p, Rng& rng) {
    for (size_t j = 0; j < action.acquisition.bits.size(); ++j)
        action.acquisition.bits[j] = rng.bernoulli(p) ? 1 : 0;
}

struct Moments {
    double sum = 0.0, sum_sq = 0.0;
    int n = 0;
    void add(double x) {
        sum += x;
        sum_sq += x * x;
        ++n;
    }
    double mean() const { return n ? sum / n : 0.0; }
    double stderr_() const {
        if (n < 2) return 0.0;
        const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1));
        return std::sqrt(var / n);
    }
};

}  // namespace

EvalSummary evaluate_policy(const PolicyNet& net, const Vae* vae, const io::ExperimentConfig& cfg,
                            const EvalOptions& opts) {
    require(opts.episodes > 0, "evaluate_policy: episodes must be positive");
    const ResolvedModel resolved = resolve_model(cfg);
    std::unique_ptr<Env> env = make_env(cfg);
    FeaturePipeline pipeline(vae, resolved.fill_value, env->descriptor());

    Moments reward, adjusted, acquisitions;
    EvalSummary out;
    out.episodes = opts.episodes;
    long total_length = 0;
    int discharges = 0, mortalities = 0;
    for (int i = 0; i < opts.episodes; ++i) {
        Rng aux(derive_seed(opts.seed, "eval-aux", i));
        MaskedObservation obs = env->reset(derive_seed(opts.seed, "eval-ep", i));
        pipeline.reset();
        PolicyState ps = net.initial_state();
        JointAction prev;
        bool have_prev = false;
        double ep_reward = 0.0, ep_cost = 0.0;
        long ep_bits = 0;
        while (true) {
            const Eigen::VectorXd f = pipeline.features(obs, have_prev ? &prev : nullptr);
            ActResult ar = opts.greedy ? net.act_greedy(f, ps) : net.act(f, ps, aux);
            if (opts.random_acquisition_p)
                overwrite_acquisition(ar.action, *opts.random_acquisition_p, aux);
            const StepResult sr = env->step(ar.action);
            ep_reward += sr.reward;
            ep_cost += sr.cost;
            ep_bits += ar.action.acquisition.count();
            ++total_length;
            ps = ar.state;
            prev = ar.action;
            have_prev = true;
            obs = sr.obs;
            if (sr.terminal) {
                const auto it = sr.info.find("outcome");
                if (it != sr.info.end()) {
                    if (it->second == "discharge") ++discharges;
                    if (it->second == "mortality") ++mortalities;
                }
                break;
            }
        }
        reward.add(ep_reward);
        adjusted.add(ep_reward - ep_cost);
        acquisitions.add(static_cast<double>(ep_bits));
        out.total_cost += ep_cost;
        out.total_acquired_bits += ep_bits;
    }
    out.mean_task_reward = reward.mean();
    out.stderr_task_reward = reward.stderr_();
    out.mean_cost_adjusted_return = adjusted.mean();
    out.stderr_cost_adjusted_return = adjusted.stderr_();
    out.mean_acquisitions = acquisitions.mean();
    out.stderr_acquisitions = acquisitions.stderr_();
    out.discharge_rate = static_cast<double>(discharges) / opts.episodes;
    out.mortality_rate = static_cast<double>(mortalities) / opts.episodes;
    out.mean_length = static_cast<double>(total_length) / opts.episodes;
    return out;
}

std::vector<CostPhase> e2e_warmup_schedule(long total_env_steps) {
    require(total_env_steps > 0, "e2e_warmup_schedule: total steps must be positive");
    const long cut = (total_env_steps * 4) / 5;
    return {{cut, 0.01}, {total_env_steps, 0.02}};
}

namespace {

// Per-worker acting state. Rollouts resume mid-episode; `features` always
// holds the policy input for the step about to be taken.
struct WorkerCtx {
    std::unique_ptr<Env> env;
    std::unique_ptr<FeaturePipeline> pipeline;
    PolicyState pstate;
    Rng act_rng{0};
    Rng randacq_rng{0};
    uint64_t episode_count = 0;
    MaskedObservation obs;
    Eigen::VectorXd features;
    JointAction prev_action;
    bool needs_reset = true;

    // Accumulated over the whole run, summed across workers at the end.
    double cost_charged = 0.0;
    long bits_acquired = 0;
    long episodes_finished = 0;
};

struct RoundStats {
    long steps = 0;
};

void start_episode(WorkerCtx& ctx, uint64_t master_seed, int worker, const PolicyNet& net) {
    const uint64_t ep = (static_cast<uint64_t>(worker) << 32) | ctx.episode_count++;
    ctx.obs = ctx.env->reset(derive_seed(master_seed, "worker-ep", ep));
    ctx.pipeline->reset();
    ctx.pstate = net.initial_state();
    ctx.features = ctx.pipeline->features(ctx.obs, nullptr);
    ctx.needs_reset = false;
}

Rollout collect_rollout(WorkerCtx& ctx, uint64_t master_seed, int worker, const PolicyNet& net,
                        const JointTrainOptions& opts, int rollout_length, RoundStats& stats) {
    if (ctx.needs_reset) start_episode(ctx, master_seed, worker, net);
    Rollout r;
    r.initial_state = ctx.pstate;
    for (int k = 0; k < rollout_length; ++k) {
        ActResult ar = net.act(ctx.features, ctx.pstate, ctx.act_rng);
        if (opts.random_acquisition_p)
            overwrite_acquisition(ar.action, *opts.random_acquisition_p, ctx.randacq_rng);
        const StepResult sr = ctx.env->step(ar.action);
        Transition tr;
        tr.features = ctx.features;
        tr.action = ar.action;
        tr.reward = sr.reward;
        tr.cost = sr.cost;
        tr.log_prob = ar.log_prob;
        tr.value = ar.value;
        tr.terminal = sr.terminal;
        r.steps.push_back(std::move(tr));
        ctx.cost_charged += sr.cost;
        ctx.bits_acquired += ar.action.acquisition.count();
        ++stats.steps;
        ctx.pstate = ar.state;
        ctx.prev_action = ar.action;
        if (sr.terminal) {
            ++ctx.episodes_finished;
            start_episode(ctx, master_seed, worker, net);
            return r;
        }
        ctx.obs = sr.obs;
        ctx.features = ctx.pipeline->features(ctx.obs, &ctx.prev_action);
    }
    r.bootstrap_value = net.evaluate(ctx.features, ctx.pstate).value;
    return r;
}

size_t phase_index(const std::vector<CostPhase>& schedule, long env_steps) {
    for (size_t i = 0; i + 1 < schedule.size(); ++i)
        if (env_steps < schedule[i].until_env_step) return i;
    return schedule.size() - 1;
}

uint64_t file_fnv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IntegrityError("cannot read " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    return io::fnv1a64(bytes.data(), bytes.size());
}

}  // namespace

JointTrainResult train_joint(const io::ExperimentConfig& cfg, const JointTrainOptions& opts) {
    cfg.validate();
    const ResolvedModel resolved = resolve_model(cfg);
    if (opts.random_acquisition_p) {
        const double p = *opts.random_acquisition_p;
        require(p >= 0.0 && p <= 1.0, "train_joint: random_acquisition_p outside [0, 1]");
    }

    // Filter weights. End-to-end agents act on the raw observation and must
    // not be given a checkpoint; belief-driven agents require one.
    std::unique_ptr<Vae> vae;
    std::string vae_hash;
    if (resolved.end_to_end) {
        if (!opts.vae_checkpoint.empty())
            throw ValidationError(
                "train_joint: model.kind end_to_end does not take a vae checkpoint");
    } else {
        if (opts.vae_checkpoint.empty())
            throw ValidationError("train_joint: model.kind " + cfg.model.kind +
                                  " needs a pre-trained vae checkpoint");
        vae = std::make_unique<Vae>(resolved.vae_spec, derive_seed(cfg.master_seed, "vae-init"));
        const nlohmann::json meta = io::load_checkpoint(opts.vae_checkpoint, vae->params());
        if (meta.contains("env") && meta["env"].get<std::string>() != cfg.env.name)
            throw ValidationError("train_joint: vae checkpoint was trained on env " +
                                  meta["env"].get<std::string>() + " but config selects " +
                                  cfg.env.name);
        vae_hash = io::fnv_hex(file_fnv(opts.vae_checkpoint));
    }

    PolicyNet net(make_policy_spec(cfg), derive_seed(cfg.master_seed, "policy-init"));
    nn::Adam adam(net.params(), cfg.rl.learning_rate);
    const CostModel cm = make_cost_model(cfg);
    A3cHyper hyper;
    hyper.value_coef = cfg.rl.value_coef;
    hyper.entropy_coef = cfg.rl.entropy_coef;
    hyper.train_acquisition = !opts.random_acquisition_p.has_value();

    std::vector<CostPhase> schedule = opts.cost_schedule;
    if (schedule.empty()) schedule = {{cfg.rl.total_env_steps, cfg.env.unit_cost}};
    for (size_t i = 0; i < schedule.size(); ++i) {
        require(schedule[i].unit_cost >= 0.0, "train_joint: negative unit cost in schedule");
        require(i == 0 || schedule[i - 1].until_env_step < schedule[i].until_env_step,
                "train_joint: cost schedule steps must be strictly increasing");
    }

    const int workers = std::max(1, std::min(cfg.rl.workers, 64));
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const int threads = std::min<int>(workers, static_cast<int>(hw));

    std::vector<WorkerCtx> ctxs(workers);
    size_t phase = phase_index(schedule, 0);
    auto build_envs = [&](size_t ph) {
        for (int w = 0; w < workers; ++w) {
            ctxs[w].env = make_env(cfg, schedule[ph].unit_cost);
            ctxs[w].pipeline = std::make_unique<FeaturePipeline>(vae.get(), resolved.fill_value,
                                                                 ctxs[w].env->descriptor());
            ctxs[w].needs_reset = true;
        }
    };
    build_envs(phase);
    for (int w = 0; w < workers; ++w) {
        ctxs[w].act_rng = Rng(derive_seed(cfg.master_seed, "worker-act", w));
        ctxs[w].randacq_rng = Rng(derive_seed(cfg.master_seed, "worker-rand-acq", w));
    }
    const std::string env_version = ctxs[0].env->version();

    std::filesystem::create_directories(cfg.output_dir);
    JointTrainResult result;
    result.checkpoint_path = (std::filesystem::path(cfg.output_dir) / "policy.chkp").string();
    result.metrics_path = (std::filesystem::path(cfg.output_dir) / "metrics.csv").string();
    io::MetricsWriter metrics(result.metrics_path, opts.deterministic_timing);

    const uint64_t eval_seed = derive_seed(cfg.master_seed, "eval");
    EvalOptions eval_opts;
    eval_opts.episodes = cfg.rl.eval_episodes;
    eval_opts.seed = eval_seed;
    eval_opts.greedy = true;
    eval_opts.random_acquisition_p = opts.random_acquisition_p;
    auto run_eval = [&](long env_steps, long updates) {
        result.final_eval = evaluate_policy(net, vae.get(), cfg, eval_opts);
        io::MetricsRow row;
        row.env_steps = env_steps;
        row.updates = updates;
        row.mean_task_reward = result.final_eval.mean_task_reward;
        row.mean_cost_adjusted_return = result.final_eval.mean_cost_adjusted_return;
        row.mean_episodic_acquisitions = result.final_eval.mean_acquisitions;
        row.discharge_rate = result.final_eval.discharge_rate;
        row.mortality_rate = result.final_eval.mortality_rate;
        metrics.append(row);
        if (opts.log)
            *opts.log << "rl steps " << env_steps << "/" << cfg.rl.total_env_steps << " reward "
                      << io::format_double(result.final_eval.mean_task_reward) << " acq "
                      << io::format_double(result.final_eval.mean_acquisitions) << "\n";
    };

    long env_steps = 0;
    run_eval(0, 0);
    long last_eval_steps = 0;
    long next_eval = cfg.rl.eval_interval;

    std::vector<Rollout> rollouts(workers);
    std::vector<RoundStats> stats(workers);
    while (env_steps < cfg.rl.total_env_steps) {
        const size_t ph = phase_index(schedule, env_steps);
        if (ph != phase) {
            phase = ph;
            build_envs(phase);
            if (opts.log)
                *opts.log << "rl cost phase -> " << io::format_double(schedule[phase].unit_cost)
                          << " at step " << env_steps << "\n";
        }

        std::vector<int> order;
        order.reserve(workers);
        if (cfg.rl.serialized_updates) {
            for (int w = 0; w < workers; ++w) order.push_back(w);
        }
        std::mutex order_mu;
        std::atomic<int> next_worker{0};
        auto work = [&]() {
            while (true) {
                const int w = next_worker.fetch_add(1);
                if (w >= workers) break;
                stats[w] = RoundStats{};
                rollouts[w] = collect_rollout(ctxs[w], cfg.master_seed, w, net, opts,
                                              cfg.rl.rollout_length, stats[w]);
                if (!cfg.rl.serialized_updates) {
                    std::lock_guard<std::mutex> lock(order_mu);
                    order.push_back(w);
                }
            }
        };
        if (threads > 1) {
            std::vector<std::thread> pool;
            pool.reserve(threads);
            for (int t = 0; t < threads; ++t) pool.emplace_back(work);
            for (auto& th : pool) th.join();
        } else {
            work();
        }

        for (int w : order) {
            Graph g;
            A3cDiagnostics diag;
            const Var loss = a3c_loss(g, net, rollouts[w], cm, hyper, &diag);
            if (!std::isfinite(diag.loss))
                throw IntegrityError("train_joint: non-finite loss at update " +
                                     std::to_string(adam.step_count() + 1) + " (worker " +
                                     std::to_string(w) + ")");
            g.backward(loss);
            adam.step(cfg.rl.grad_clip);
        }
        for (int w = 0; w < workers; ++w) env_steps += stats[w].steps;

        if (env_steps >= next_eval) {
            run_eval(env_steps, adam.step_count());
            last_eval_steps = env_steps;
            next_eval = (env_steps / cfg.rl.eval_interval + 1) * cfg.rl.eval_interval;
        }
    }
    if (env_steps != last_eval_steps) {
        run_eval(env_steps, adam.step_count());
        last_eval_steps = env_steps;
    }

    result.env_steps = env_steps;
    result.updates = adam.step_count();
    for (const WorkerCtx& ctx : ctxs) {
        result.total_cost_charged += ctx.cost_charged;
        result.total_bits_acquired += ctx.bits_acquired;
    }

    nlohmann::json meta = resolved_meta(cfg);
    meta["stage"] = "policy";
    meta["config"] = cfg.to_json();
    meta["env_version"] = env_version;
    meta["vae_checkpoint_hash"] = vae_hash;
    meta["env_steps"] = result.env_steps;
    meta["updates"] = result.updates;
    if (opts.random_acquisition_p) meta["random_acquisition_p"] = *opts.random_acquisition_p;
    if (schedule.size() > 1) {
        nlohmann::json phases = nlohmann::json::array();
        for (const CostPhase& p : schedule)
            phases.push_back({{"until_env_step", p.until_env_step}, {"unit_cost", p.unit_cost}});
        meta["cost_schedule"] = phases;
    }
    io::save_checkpoint(result.checkpoint_path, net.params(), meta);
    return result;
}

}  // namespace afa::training
