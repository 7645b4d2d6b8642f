#include "vqa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>

namespace vqa {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename U>
void put(std::ostream& out, U value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename U>
U get(std::istream& in, const char* what) {
  U value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) {
    throw CheckpointError(CheckpointError::Kind::kTruncated, std::string("truncated checkpoint while reading ") + what);
  }
  return value;
}

}  // namespace

void save_checkpoint(std::ostream& out, const NamedTensors<float>& tensors) {
  out.write(kCheckpointMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw CheckpointError(CheckpointError::Kind::kIo, "tensor name too long: " + name);
    }
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
  }
  if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "checkpoint write failed");
}

void save_checkpoint(const std::filesystem::path& path, const NamedTensors<float>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "cannot write " + path.string());
  save_checkpoint(out, tensors);
}

NamedTensors<float> load_checkpoint(std::istream& in) {
  char magic[4] = {};
  if (!in.read(magic, 4)) throw CheckpointError(CheckpointError::Kind::kTruncated, "truncated checkpoint header");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw CheckpointError(CheckpointError::Kind::kBadMagic, "bad magic: not a checkpoint file");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointError::Kind::kBadVersion, "unsupported checkpoint version " +
                                                                  std::to_string(version) + " (expected " +
                                                                  std::to_string(kCheckpointVersion) + ")");
  }
  const auto count = get<std::uint32_t>(in, "tensor count");
  NamedTensors<float> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint16_t>(in, "name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) {
      throw CheckpointError(CheckpointError::Kind::kTruncated, "truncated checkpoint in tensor name");
    }
    const auto rank = get<std::uint8_t>(in, "rank");
    Shape shape;
    for (std::uint8_t d = 0; d < rank; ++d) shape.push_back(get<std::uint32_t>(in, "dimensions"));
    std::vector<float> values(shape_numel(shape));
    if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)))) {
      throw CheckpointError(CheckpointError::Kind::kTruncated, "truncated checkpoint in values of " + name);
    }
    try {
      out.emplace_back(std::move(name), Tensor<float>(std::move(shape), std::move(values)));
    } catch (const std::invalid_argument& e) {
      throw CheckpointError(CheckpointError::Kind::kMismatch, e.what());
    }
  }
  return out;
}

NamedTensors<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::kIo, "cannot read " + path.string());
  return load_checkpoint(in);
}

template <typename T>
void assign_state(const NamedTensors<T>& target, const NamedTensors<float>& source) {
  std::map<std::string, const Tensor<float>*> by_name;
  for (const auto& [name, t] : source) by_name[name] = &t;
  if (by_name.size() != target.size() || source.size() != target.size()) {
    throw CheckpointError(CheckpointError::Kind::kMismatch, "checkpoint holds " + std::to_string(source.size()) +
                                                                " tensors, model expects " +
                                                                std::to_string(target.size()));
  }
  for (const auto& [name, t] : target) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError(CheckpointError::Kind::kMismatch, "checkpoint lacks " + name);
    if (it->second->shape() != t.shape()) {
      throw CheckpointError(CheckpointError::Kind::kMismatch, name + ": checkpoint shape " +
                                                                  shape_str(it->second->shape()) + ", model " +
                                                                  shape_str(t.shape()));
    }
    auto dst = t.node().data.data();
    const auto src = it->second->data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<T>(src[i]);
  }
}

template void assign_state(const NamedTensors<float>&, const NamedTensors<float>&);
template void assign_state(const NamedTensors<double>&, const NamedTensors<float>&);

}  // namespace vqa
