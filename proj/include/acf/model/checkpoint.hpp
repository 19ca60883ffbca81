#ifndef ACF_MODEL_CHECKPOINT_HPP_
#define ACF_MODEL_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "acf/model/config.hpp"
#include "acf/model/network.hpp"

namespace acf {

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/**
 * Everything needed to resume or evaluate a model.
 *
 * Binary layout (all integers little-endian):
 *   8 bytes  magic "ACFCKPT\0"
 *   u32      format version (1)
 *   u64      config text length, then the canonical config text
 *   u64      epoch counter
 *   u64      optimizer step count
 *   u32      tensor count, then per tensor:
 *              u32 name length, name bytes,
 *              u32 rank, u64 per dimension,
 *              float32 values (IEEE-754, little-endian)
 *
 * Parameter tensors carry their own names; optimizer accumulators are stored
 * as "<name>.rms" and batch-norm running statistics under their buffer names.
 */
struct Checkpoint {
  ModelConfig config;
  std::uint64_t epoch = 0;
  std::uint64_t optimizer_steps = 0;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(std::string_view name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename Real>
Checkpoint make_checkpoint(Network<Real>& net, std::uint64_t epoch);

// Copies parameters, optimizer state and buffers into a network built from
// ckpt.config. Throws on a missing tensor or a shape mismatch.
template <typename Real>
void restore_checkpoint(Network<Real>& net, const Checkpoint& ckpt);

}  // namespace acf

#endif  // ACF_MODEL_CHECKPOINT_HPP_
