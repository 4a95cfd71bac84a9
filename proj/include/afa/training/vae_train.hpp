#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "afa/io/config.hpp"

namespace afa::training {

struct VaeTrainResult {
    std::string checkpoint_path;  // best-by-test-unobserved snapshot
    std::string metrics_path;     // per-epoch loss decomposition CSV
    int best_epoch = -1;          // 1-based
    double best_test_unobserved = 0.0;
    std::vector<double> train_loss_per_epoch;  // objective under the training supervision
};

// Offline likelihood pre-training: minimizes the negative supervised ELBO by
// Adam over shuffled trajectory minibatches. Per epoch, both splits are
// re-evaluated without gradients and a CSV row records the objective, the
// observed/unobserved reconstruction errors and the KL term; unobserved error
// is always measured over every unobserved entry, even in modes that never
// train on them. The checkpoint keeps the epoch with the lowest test
// unobserved reconstruction error. A non-finite loss aborts immediately,
// naming the epoch and batch. `log`, when given, receives one progress line
// per epoch.
VaeTrainResult pretrain_vae(const io::ExperimentConfig& cfg, std::ostream* log = nullptr);

}  // namespace afa::training
