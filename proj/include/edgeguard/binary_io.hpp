#pragma once

// Little-endian primitive encoding shared by the feature-matrix and model containers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edgeguard/error.hpp"

namespace edgeguard::binary {

static_assert(std::endian::native == std::endian::little,
              "binary containers are written in host order; big-endian hosts need byte swaps");

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    buffer_.insert(buffer_.end(), p, p + n);
  }
  void u8(std::uint8_t v) { buffer_.push_back(v); }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64s(std::span<const double> v) { bytes(v.data(), v.size_bytes()); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  const std::vector<unsigned char>& buffer() const noexcept { return buffer_; }

 private:
  std::vector<unsigned char> buffer_;
};

class Reader {
 public:
  Reader(std::span<const unsigned char> data, std::string context)
      : data_(data), context_(std::move(context)) {}

  void bytes(void* out, std::size_t n) {
    if (n > data_.size() - pos_) {
      throw FormatError(context_ + ": truncated at byte " + std::to_string(pos_));
    }
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, sizeof v);
    return v;
  }
  void f64s(std::span<double> out) { bytes(out.data(), out.size_bytes()); }
  std::string str() {
    const auto n = u32();
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  std::span<const unsigned char> data_;
  std::string context_;
  std::size_t pos_ = 0;
};

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::span<const unsigned char> data,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<unsigned char> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const unsigned char> data);

}  // namespace edgeguard::binary
