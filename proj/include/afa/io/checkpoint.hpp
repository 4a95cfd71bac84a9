#pragma once

#include <string>

#include <json.hpp>

#include "afa/nn/tape.hpp"

namespace afa::io {

// Single-file named-tensor container:
//   bytes 0..7   magic "AFACHKP1"
//   bytes 8..15  little-endian u64 header length H
//   H bytes      JSON header: tensor table (name, rows, cols, offset),
//                data-section byte count + FNV-1a checksum, and the caller's
//                `meta` block verbatim (config snapshot, versions, ...)
//   rest         all tensors back to back, row-major little-endian f32
// The file is fully parseable from the header alone, without executing any
// model code.
void save_checkpoint(const std::string& path, const nn::ParameterSet& params,
                     const nlohmann::json& meta);

// Loads tensor values into a layout-identical parameter set (same names and
// shapes, any order); verifies the data checksum first and rejects any
// mismatch with IntegrityError. Returns the stored meta block.
nlohmann::json load_checkpoint(const std::string& path, nn::ParameterSet& params);

// Reads only the meta block (for version and hash inspection).
nlohmann::json read_checkpoint_meta(const std::string& path);

}  // namespace afa::io
