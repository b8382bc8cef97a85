#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace oandet {

// Checkpoint container: little-endian binary, integrity-checked.
//
//   magic "OANCKPT1"
//   u32 entry count
//   per entry: u16 name length, name bytes (UTF-8),
//              u8 rank, rank * u32 dims,
//              prod(dims) * f32 values
//   u64 FNV-1a of every preceding byte
struct CheckpointEntry {
    std::string name;
    std::vector<int> dims;
    std::vector<float> values;
};

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t seed = kFnvOffset);

void write_checkpoint(const std::string& path,
                      const std::vector<CheckpointEntry>& entries);

// Throws IoError on missing/truncated/corrupt files (bad magic or checksum).
std::vector<CheckpointEntry> read_checkpoint(const std::string& path);

// The stored trailing checksum, for cheap equality checks between runs.
std::uint64_t checkpoint_checksum(const std::string& path);

const CheckpointEntry* find_entry(const std::vector<CheckpointEntry>& entries,
                                  const std::string& name);

} // namespace oandet
