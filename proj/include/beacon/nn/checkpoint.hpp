#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "beacon/nn/tensor.hpp"

namespace beacon::nn {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// "BEACONCK" checkpoint: u16 version, u32 block count, then per block
/// u16 name length, name bytes, u8 rank, u32 dims, f32 payload; CRC32 of the
/// blocks as trailer. Parameters are narrowed to f32.
std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> blocks);
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> blocks);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

/// Round every entry through f32, matching what a save/load cycle produces.
void round_to_f32(Tensor& t);

/// Finds a block by name; throws FormatError when missing or misshaped.
const Tensor& find_block(std::span<const NamedTensor> blocks, const std::string& name,
                         const std::vector<std::size_t>& shape);

}  // namespace beacon::nn
