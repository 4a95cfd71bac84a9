#include "afa/training/vae_train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <ostream>
#include <vector>

#include "afa/core/errors.hpp"
#include "afa/io/checkpoint.hpp"
#include "afa/io/dataset.hpp"
#include "afa/io/metrics.hpp"
#include "afa/models/vae.hpp"
#include "afa/training/resolve.hpp"

namespace afa::training {

namespace {

std::vector<const TrajectoryRecord*> batch_view(const std::vector<TrajectoryRecord>& records,
                                                const std::vector<int>& order, size_t begin,
                                                size_t end) {
    std::vector<const TrajectoryRecord*> batch;
    batch.reserve(end - begin);
    for (size_t i = begin; i < end; ++i) batch.push_back(&records[order[i]]);
    return batch;
}

// Dataset-wide diagnostics without gradients, averaged with the same per-unit
// weights the objective uses.
ElboDiagnostics eval_split(const Vae& vae, const EnvDescriptor& desc,
                           const std::vector<TrajectoryRecord>& records, SupervisionPolicy sup,
                           int batch_size, Rng& rng) {
    ElboDiagnostics total;
    double weight = 0.0;
    std::vector<int> order(records.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    const auto stride = static_cast<size_t>(batch_size);
    for (size_t at = 0; at < records.size(); at += stride) {
        const size_t end = std::min(records.size(), at + stride);
        const auto batch = batch_view(records, order, at, end);
        Graph g(false);
        ElboDiagnostics diag;
        elbo_loss(g, vae, desc, batch, sup, rng, &diag);
        total.loss += diag.loss * diag.n_units;
        total.recon_observed += diag.recon_observed * diag.n_units;
        total.recon_unobserved += diag.recon_unobserved * diag.n_units;
        total.kl += diag.kl * diag.n_units;
        weight += diag.n_units;
    }
    require(weight > 0, "vae training: empty evaluation split");
    total.loss /= weight;
    total.recon_observed /= weight;
    total.recon_unobserved /= weight;
    total.kl /= weight;
    total.n_units = static_cast<int>(weight);
    return total;
}

}  // namespace

VaeTrainResult pretrain_vae(const io::ExperimentConfig& cfg, std::ostream* log) {
    cfg.validate();
    const ResolvedModel resolved = resolve_model(cfg);
    if (resolved.end_to_end)
        throw ValidationError("vae training: model.kind end_to_end has no pre-training stage");

    const io::Dataset train = io::read_dataset(
        (std::filesystem::path(cfg.dataset.dir) / "train").string());
    const io::Dataset test = io::read_dataset(
        (std::filesystem::path(cfg.dataset.dir) / "test").string());
    if (train.desc.obs_dim() != resolved.vae_spec.obs_dim)
        throw ValidationError("vae training: dataset observation width " +
                              std::to_string(train.desc.obs_dim()) +
                              " does not match the model's " +
                              std::to_string(resolved.vae_spec.obs_dim));
    if (train.desc.name != cfg.env.name)
        throw ValidationError("vae training: dataset was collected on env " + train.desc.name +
                              " but config selects " + cfg.env.name);

    Vae vae(resolved.vae_spec, derive_seed(cfg.master_seed, "vae-init"));
    nn::Adam adam(vae.params(), resolved.vae_learning_rate);

    std::filesystem::create_directories(cfg.output_dir);
    VaeTrainResult result;
    result.checkpoint_path = (std::filesystem::path(cfg.output_dir) / "vae.chkp").string();
    result.metrics_path = (std::filesystem::path(cfg.output_dir) / "vae_metrics.csv").string();

    std::ofstream metrics(result.metrics_path, std::ios::trunc);
    if (!metrics) throw IntegrityError("vae training: cannot open " + result.metrics_path);
    metrics << "epoch,train_loss,train_recon_observed,train_recon_unobserved,train_kl,"
               "test_loss,test_recon_observed,test_recon_unobserved,test_kl\n";

    result.best_test_unobserved = std::numeric_limits<double>::infinity();
    std::vector<int> order(train.records.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = 1; epoch <= cfg.vae.epochs; ++epoch) {
        Rng epoch_rng(derive_seed(cfg.master_seed, "vae-epoch", epoch));
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[epoch_rng.uniform_int(i)]);

        int batch_index = 0;
        const auto stride = static_cast<size_t>(cfg.vae.batch_size);
        for (size_t at = 0; at < order.size(); at += stride, ++batch_index) {
            const size_t end = std::min(order.size(), at + stride);
            const auto batch = batch_view(train.records, order, at, end);
            Graph g;
            ElboDiagnostics diag;
            const Var loss =
                elbo_loss(g, vae, train.desc, batch, resolved.supervision, epoch_rng, &diag);
            if (!std::isfinite(diag.loss))
                throw IntegrityError("vae training: non-finite loss at epoch " +
                                     std::to_string(epoch) + ", batch " +
                                     std::to_string(batch_index) + " (first trajectory index " +
                                     std::to_string(order[at]) + ")");
            g.backward(loss);
            adam.step(cfg.vae.grad_clip);
        }

        // Objective under the training supervision; unobserved error always
        // over the full complement so partial/stored modes stay comparable.
        Rng eval_rng(derive_seed(cfg.master_seed, "vae-eval", epoch));
        const ElboDiagnostics train_obj = eval_split(vae, train.desc, train.records,
                                                     resolved.supervision, cfg.vae.batch_size,
                                                     eval_rng);
        const ElboDiagnostics train_full = eval_split(vae, train.desc, train.records,
                                                      SupervisionPolicy::full,
                                                      cfg.vae.batch_size, eval_rng);
        const ElboDiagnostics test_obj = eval_split(vae, test.desc, test.records,
                                                    resolved.supervision, cfg.vae.batch_size,
                                                    eval_rng);
        const ElboDiagnostics test_full = eval_split(vae, test.desc, test.records,
                                                     SupervisionPolicy::full, cfg.vae.batch_size,
                                                     eval_rng);
        metrics << epoch << ',' << io::format_double(train_obj.loss) << ','
                << io::format_double(train_obj.recon_observed) << ','
                << io::format_double(train_full.recon_unobserved) << ','
                << io::format_double(train_obj.kl) << ',' << io::format_double(test_obj.loss)
                << ',' << io::format_double(test_obj.recon_observed) << ','
                << io::format_double(test_full.recon_unobserved) << ','
                << io::format_double(test_obj.kl) << '\n';
        metrics.flush();
        result.train_loss_per_epoch.push_back(train_obj.loss);

        if (test_full.recon_unobserved < result.best_test_unobserved) {
            result.best_test_unobserved = test_full.recon_unobserved;
            result.best_epoch = epoch;
            nlohmann::json meta = resolved_meta(cfg);
            meta["stage"] = "vae";
            meta["config"] = cfg.to_json();
            meta["env_version"] = train.meta.env_version;
            meta["dataset_config_hash"] = train.meta.config_hash;
            meta["epoch"] = epoch;
            meta["test_recon_unobserved"] = test_full.recon_unobserved;
            io::save_checkpoint(result.checkpoint_path, vae.params(), meta);
        }
        if (log)
            *log << "vae epoch " << epoch << "/" << cfg.vae.epochs << " train_loss="
                 << io::format_double(train_obj.loss) << " test_unobserved="
                 << io::format_double(test_full.recon_unobserved) << "\n";
    }
    return result;
}

}  // namespace afa::training
