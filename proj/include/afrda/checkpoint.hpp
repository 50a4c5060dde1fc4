#pragma once

// Binary checkpoint layout (all integers and reals little-endian):
//
//   "AFRD"  u32 version  u32 count
//   count x { u16 name_len, name bytes, u8 rank, rank x u32 dim, f64 payload }
//   u64 iteration  u32 rng_len  rng state text

#include "afrda/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace afrda {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
    std::string name;
    Tensor value;

    friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct CheckpointData {
    std::vector<NamedTensor> tensors;
    std::uint64_t iteration = 0;
    std::string rng_state;

    const Tensor* find(const std::string& name) const;

    friend bool operator==(const CheckpointData&, const CheckpointData&) = default;
};

/// Raised for any malformed checkpoint; `field()` names the part that failed.
class CorruptCheckpoint : public std::runtime_error {
public:
    CorruptCheckpoint(std::string field, const std::string& detail);
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

std::string encode_checkpoint(const CheckpointData& data);
CheckpointData decode_checkpoint(const std::string& bytes);

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::filesystem::path& path);

}  // namespace afrda
