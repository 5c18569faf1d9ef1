// SPDX-License-Identifier: Apache-2.0
// Reader for the big-endian IDX container used by the MNIST distribution.
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace lrpolicy {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;  ///< count * rows * cols
};

/// Throws ParseError on a missing file, wrong magic, or a payload whose
/// length disagrees with the header dimensions.
IdxImages read_idx_images(const std::filesystem::path &path);
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path &path);

/// Writers, mainly for fixtures.
void write_idx_images(const std::filesystem::path &path, const IdxImages &images);
void write_idx_labels(const std::filesystem::path &path, const std::vector<std::uint8_t> &labels);

} // namespace lrpolicy
