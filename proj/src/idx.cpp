// SPDX-License-Identifier: Apache-2.0
#include "lrpolicy/idx.hpp"

#include <array>
#include <fstream>
#include <iterator>

#include "lrpolicy/error.hpp"

namespace lrpolicy {

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open IDX file " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<std::uint8_t> &buf, std::size_t offset) {
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void put_be32(std::ofstream &out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                              static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), b.size());
}

void check_header(const std::vector<std::uint8_t> &buf, std::size_t header_len,
                  std::uint32_t magic, const std::filesystem::path &path) {
  if (buf.size() < header_len) {
    throw ParseError("corrupt IDX header in " + path.string() + ": file is " +
                     std::to_string(buf.size()) + " bytes");
  }
  if (be32(buf, 0) != magic) {
    throw ParseError("corrupt IDX header in " + path.string() + ": bad magic number");
  }
}

} // namespace

IdxImages read_idx_images(const std::filesystem::path &path) {
  const auto buf = slurp(path);
  check_header(buf, 16, kIdxImagesMagic, path);
  IdxImages out;
  out.count = be32(buf, 4);
  out.rows = be32(buf, 8);
  out.cols = be32(buf, 12);
  const std::uint64_t expected = std::uint64_t{out.count} * out.rows * out.cols;
  if (buf.size() - 16 != expected) {
    throw ParseError("corrupt IDX length in " + path.string() + ": expected " +
                     std::to_string(expected) + " pixel bytes, found " +
                     std::to_string(buf.size() - 16));
  }
  out.pixels.assign(buf.begin() + 16, buf.end());
  return out;
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path &path) {
  const auto buf = slurp(path);
  check_header(buf, 8, kIdxLabelsMagic, path);
  const std::uint32_t count = be32(buf, 4);
  if (buf.size() - 8 != count) {
    throw ParseError("corrupt IDX length in " + path.string() + ": expected " +
                     std::to_string(count) + " labels, found " + std::to_string(buf.size() - 8));
  }
  return {buf.begin() + 8, buf.end()};
}

void write_idx_images(const std::filesystem::path &path, const IdxImages &images) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  put_be32(out, kIdxImagesMagic);
  put_be32(out, images.count);
  put_be32(out, images.rows);
  put_be32(out, images.cols);
  out.write(reinterpret_cast<const char *>(images.pixels.data()),
            static_cast<std::streamsize>(images.pixels.size()));
}

void write_idx_labels(const std::filesystem::path &path, const std::vector<std::uint8_t> &labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  put_be32(out, kIdxLabelsMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char *>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

} // namespace lrpolicy
