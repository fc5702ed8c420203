#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "cris/model.hpp"

namespace cris {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout, little endian: "CRIS", u32 version, u32 JSON length, JSON bytes,
/// u32 tensor count, then per tensor: u16 name length, name, u8 rank,
/// u32 dims, f64 data. The JSON holds the run config and the vocabulary.
std::vector<std::uint8_t> encode_checkpoint(const CrisModel& model);
std::unique_ptr<CrisModel> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const CrisModel& model, const std::filesystem::path& path);
std::unique_ptr<CrisModel> load_checkpoint(const std::filesystem::path& path);

}  // namespace cris
