#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "htr/model/model.hpp"

namespace htr::model {

/// Flat little-endian container: header (magic, version, seed, spec text) followed by
/// one record per registry entry (name, dtype, trainable flag, shape, raw buffer).
/// Identical parameters always serialize to identical bytes.
struct CheckpointHeader {
  std::uint32_t version = 1;
  std::uint64_t seed = 0;
  ModelSpec spec;
};

template <typename T>
std::vector<std::uint8_t> serialize_checkpoint(const Model<T>& model, std::uint64_t seed);

/// Reads the header only.
CheckpointHeader read_checkpoint_header(std::span<const std::uint8_t> bytes);

/// Overwrites model values from a checkpoint; names, shapes and dtype must match.
template <typename T>
CheckpointHeader deserialize_checkpoint(std::span<const std::uint8_t> bytes, Model<T>& model);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Model<T>& model, std::uint64_t seed);

template <typename T>
CheckpointHeader load_checkpoint(const std::filesystem::path& path, Model<T>& model);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace htr::model
