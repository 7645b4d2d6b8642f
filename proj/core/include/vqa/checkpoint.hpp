#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "vqa/tensor.hpp"

namespace vqa {

inline constexpr char kCheckpointMagic[4] = {'V', 'Q', 'A', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { kIo, kBadMagic, kBadVersion, kTruncated, kMismatch };

  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Layout, all little-endian: "VQAC", u32 version, u32 tensor count, then per
/// tensor u16 name length, name bytes, u8 rank, u32 dims, f32 values.
void save_checkpoint(std::ostream& out, const NamedTensors<float>& tensors);
void save_checkpoint(const std::filesystem::path& path, const NamedTensors<float>& tensors);
NamedTensors<float> load_checkpoint(std::istream& in);
NamedTensors<float> load_checkpoint(const std::filesystem::path& path);

// Copies values into `target` by name. Every target tensor must be present
// with the same shape and no extra names are allowed (kMismatch otherwise).
template <typename T>
void assign_state(const NamedTensors<T>& target, const NamedTensors<float>& source);

}  // namespace vqa
