#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mygo/model.hpp"

namespace mygo {

struct NamedTensor {
    std::string name;
    Shape shape;
    std::vector<float> values;

    bool operator==(const NamedTensor&) const = default;
};

/// Binary layout (little-endian):
///   "MYGO", u32 version = 1, u32 tensor count, then per tensor:
///   u16 name length, name bytes, u8 rank, u64 per dim, f32 payload;
///   optimizer block: u32 tensor count + tensors as above, u64 step, u64 epoch;
///   u32 rng blob length + blob; u32 config echo length + UTF-8 text.
struct Checkpoint {
    std::vector<NamedTensor> params;
    std::vector<NamedTensor> optimizer;
    std::uint64_t step = 0;
    std::uint64_t epoch = 0;
    std::vector<std::uint8_t> rng_state;
    std::string config_echo;

    bool operator==(const Checkpoint&) const = default;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::vector<std::uint8_t> bytes, const std::string& what = "checkpoint");
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::vector<NamedTensor> export_params(const ModelParams<float>& params);
/// Copies values into `params`; throws DataError on a name or shape mismatch.
void import_params(const std::vector<NamedTensor>& tensors, ModelParams<float>& params);

}  // namespace mygo
