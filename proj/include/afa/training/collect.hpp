#pragma once

#include <string>

#include "afa/io/config.hpp"

namespace afa::training {

struct CollectResult {
    std::string train_dir;
    std::string test_dir;
    int n_random_train = 0, n_policy_train = 0;
    int n_random_test = 0, n_policy_test = 0;
};

// Rolls out the configured number of train/test trajectories and writes both
// splits as dataset directories under `cfg.dataset.dir`. A `random_fraction`
// share of each split comes from the uniform-random policy (control uniform,
// each feature acquired with probability 1/2); the remainder is sampled from
// the end-to-end policy checkpoint named in the config. Records store the
// full observations next to the masks actually used, plus per-trajectory
// supervision bits drawn with probability `supervision_fraction` from a
// dedicated seed stream, so datasets differing only in that fraction contain
// identical trajectories. Fully deterministic in the master seed: per-index
// seed derivation makes the trajectory blob byte-identical across runs and
// thread counts (the manifest also records the config hash, which naturally
// tracks any config difference such as the worker count).
CollectResult collect_dataset(const io::ExperimentConfig& cfg);

}  // namespace afa::training
