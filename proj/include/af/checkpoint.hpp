/// @file checkpoint.hpp
/// @brief Binary checkpoint format.
///
/// Layout: magic "LASR", format version u32, record count u32, then per
/// record: name length u32, name bytes, dtype tag u8 (0 = f32), rank u32,
/// extents u32 each, i64 step, f32 lr_scale, then three little-endian f32
/// payloads (value, adam m, adam v).
#pragma once

#include <string>

#include "af/optim.hpp"

namespace af {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ParamStore& store, const std::string& path);
ParamStore load_checkpoint(const std::string& path);

/// FNV-1a over every parameter payload, in name order. Used by the training
/// loops to assert that frozen stages stay byte-identical.
std::uint64_t store_checksum(const ParamStore& store);

}  // namespace af
