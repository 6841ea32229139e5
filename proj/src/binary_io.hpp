#pragma once

// Little-endian encode/decode helpers for the checkpoint and ECGB1 formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace mcma::binio {

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  template <typename T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }

  const std::vector<std::uint8_t>& data() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  std::size_t remaining() const { return size_ - pos_; }
  bool can_read(std::size_t n) const { return remaining() >= n; }

  // Callers check can_read() first; these assume enough bytes are present.
  void bytes(void* out, std::size_t n) {
    std::memcpy(out, data_ + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T uint() {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(data_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

/// Whole-file helpers; both throw IoError.
std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace mcma::binio
