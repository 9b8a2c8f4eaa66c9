#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "htr/data/image.hpp"

namespace htr::data {

enum class Split { train, val, test };

std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

struct LineSample {
  std::string id;
  std::filesystem::path image_path;  // absolute, or relative to the manifest directory
  std::string text;                  // UTF-8, display order
  std::string language;
  Split split = Split::train;
};

/// A line dataset read from a tab-separated manifest with the header
/// `id  image  text  language  split`. Images are decoded lazily and cached.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::string name, std::filesystem::path root, std::vector<LineSample> samples);

  const std::string& name() const noexcept { return name_; }
  const std::filesystem::path& root() const noexcept { return root_; }
  const std::vector<LineSample>& samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  const LineSample& operator[](std::size_t i) const { return samples_[i]; }

  /// Indices of samples in `split`, ordered by id.
  std::vector<std::size_t> split_indices(Split split) const;
  std::vector<std::string> texts(Split split) const;

  /// Decodes (once) and returns the raster of sample i.
  const GrayImage& image(std::size_t i) const;
  /// Decodes every image now; useful before handing the dataset to worker threads.
  void preload() const;
  /// Installs an in-memory raster, bypassing the file (used by generators and tests).
  void set_image(std::size_t i, GrayImage image);

 private:
  std::string name_;
  std::filesystem::path root_;
  std::vector<LineSample> samples_;
  mutable std::vector<std::optional<GrayImage>> images_;
};

inline constexpr const char* kManifestName = "manifest.tsv";

/// Reads `dir/manifest.tsv`. The dataset name defaults to the directory name.
Dataset load_dataset(const std::filesystem::path& dir, std::string name = {});
std::vector<LineSample> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<LineSample>& samples);

}  // namespace htr::data
