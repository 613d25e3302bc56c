#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bprg/model.hpp"
#include "bprg/sparsity.hpp"

namespace bprg {

// Binary checkpoint, little-endian throughout:
//
//   "BPRG"  u32 version (= 1)  u32 param_count
//   per parameter:  u16 name_len, name, u8 ndim, u32 dims[ndim], f32 values[n]
//   per prunable slot:  mask bits packed LSB-first (ceil(n/8) bytes),
//                       u8 graveyard_flag, f32 graveyard[n] when the flag is 1
//
// The graveyard flag is 1 exactly when the slot has a pruned position, and
// graveyard entries at active positions are 0, so save/load/save is
// byte-identical.
//
// The file stores no layer list. Loading rebuilds it from the parameter
// names and shapes: a 2-d weight is dense, a 4-d weight conv3x3, and
// parameter-free layer slots become relu, except the one right before a dense
// layer that follows a conv layer (or precedes the first parameterised
// layer), which becomes flatten.
constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model<float> model;
  MaskSet<float> masks;
};

std::vector<std::uint8_t> encode_checkpoint(const Model<float>& model, const MaskSet<float>& masks);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model, const MaskSet<float>& masks);
// Throws FormatError on bad magic, version mismatch, truncation or
// inconsistent contents.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Layer list implied by an ordered parameter list (see above).
std::vector<LayerSpec> infer_layers(const std::vector<Parameter<float>>& params);

}  // namespace bprg
