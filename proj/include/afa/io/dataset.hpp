#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "afa/core/types.hpp"

namespace afa::io {

// FNV-1a 64-bit hash, the integrity primitive for every on-disk artifact.
uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 14695981039346656037ULL);
std::string fnv_hex(uint64_t h);

// Provenance recorded in the dataset manifest.
struct DatasetMeta {
    std::string env_version;  // dynamics/parameter file version ("" if none)
    std::string generator;    // how the trajectories were produced
    std::string config_hash;  // experiment config that built the dataset
    uint64_t seed = 0;
};

struct Dataset {
    EnvDescriptor desc;
    CostModel cost;
    DatasetMeta meta;
    std::vector<TrajectoryRecord> records;
};

// Writes `manifest.json` + `data.bin` into `dir` (created if missing). The
// blob is one contiguous run of little-endian 32-bit floats and 8-bit flags;
// the manifest stores the descriptor, per-trajectory byte offsets and an
// FNV-1a checksum of the blob. Every record is validated before writing.
void write_dataset(const std::string& dir, const EnvDescriptor& desc, const CostModel& cm,
                   const std::vector<TrajectoryRecord>& records, const DatasetMeta& meta);

// Reconstructs the records bit-exactly. Manifest/blob inconsistencies
// (truncation, checksum mismatch, shapes that disagree with the offsets)
// raise IntegrityError naming the trajectory index where possible; no partial
// records are ever returned.
Dataset read_dataset(const std::string& dir);

}  // namespace afa::io
