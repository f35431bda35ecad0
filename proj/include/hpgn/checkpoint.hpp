#pragma once

// Versioned binary checkpoint container. All integers and floats little-endian.
//
//   "HPGNCKPT"                      8-byte magic
//   u32 version
//   u64 config hash                 FNV-1a of the canonical config text
//   u32 length, bytes               canonical config text
//   u64 step
//   u32 length, bytes               data RNG state (std::mt19937_64 text form)
//   u64 adam step
//   u32 record count, then records:
//     u8 kind (0 parameter, 1 Adam first moment, 2 Adam second moment)
//     u32 length, bytes             name
//     u32 rank, u64 dims[rank]
//     f32 data[numel]

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hpgn/config.hpp"
#include "hpgn/model.hpp"
#include "hpgn/optim.hpp"

namespace hpgn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<float> data;

  friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  TrainConfig config;
  std::uint64_t step = 0;
  std::string rng_state;
  std::vector<NamedArray> params;
  std::uint64_t adam_step = 0;
  std::vector<NamedArray> adam_m;
  std::vector<NamedArray> adam_v;
};

std::string encode_checkpoint(const Checkpoint& checkpoint);
/// Throws IncompatibleCheckpoint on a version mismatch and IoError on corrupt input.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint snapshot(const TrainConfig& config, std::uint64_t step, const HpgnModel<float>& model,
                    const Adam<float>& optimizer, const Rng& rng);

/// Rebuilds the model; throws IncompatibleCheckpoint if names or shapes disagree
/// with what the stored configuration builds.
HpgnModel<float> restore_model(const Checkpoint& checkpoint);
Adam<float> restore_optimizer(const Checkpoint& checkpoint, const ParamSet<float>& params);
Rng restore_rng(const Checkpoint& checkpoint);

}  // namespace hpgn
