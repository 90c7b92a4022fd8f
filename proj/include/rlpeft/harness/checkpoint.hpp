// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "rlpeft/harness/config.hpp"
#include "rlpeft/policy/policy.hpp"

namespace rlpeft::harness {

// Layout (all integers little-endian):
//   "PERL" | u32 version | u32 tensor count
//   per tensor: u32 name length | name | u64 rows | u64 cols | u64 offset | u32 flags
//   u64 payload bytes | payload (f64 little-endian, row-major)
//   u64 config length | config JSON
// Offsets are relative to the payload start; flag bit 0 marks trainable tensors.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ManifestEntry {
  std::string name;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::uint64_t offset = 0;
  std::uint32_t flags = 0;
};

struct CheckpointData {
  std::vector<ManifestEntry> manifest;
  std::vector<double> payload;
  std::string config_json;
};

/// Tensors in a fixed order, including AdaLoRA masks as 0/1 columns.
CheckpointData snapshot(const policy::PolicyNet& net, const ExperimentConfig& cfg);

std::string encode(const CheckpointData& data);
/// Throws FormatError on bad magic, version, truncation, overlapping or
/// out-of-range offsets, or trailing bytes.
CheckpointData decode(const std::string& bytes);

void save_checkpoint(const policy::PolicyNet& net, const ExperimentConfig& cfg,
                     const std::filesystem::path& path);

struct LoadedCheckpoint {
  ExperimentConfig config;
  std::unique_ptr<policy::PolicyNet> net;
};

/// Rebuilds the net described by the config echo and fills every tensor.
/// Throws FormatError if the manifest does not match that net.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);
LoadedCheckpoint restore(const CheckpointData& data);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace rlpeft::harness
