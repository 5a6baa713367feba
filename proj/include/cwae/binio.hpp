#pragma once

// Little-endian byte buffers for the dataset and checkpoint files.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "cwae/error.hpp"

namespace cwae {

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
        std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
      }
    }
    buf_.append(reinterpret_cast<const char*>(bytes), sizeof(T));
  }

  void put_raw(std::string_view bytes) { buf_.append(bytes); }

  /// u64 length then the bytes.
  void put_string(std::string_view s) {
    put<std::uint64_t>(s.size());
    buf_.append(s);
  }

  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes, std::string what = "file")
      : bytes_(bytes), what_(std::move(what)) {}

  template <typename T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    need(sizeof(T));
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
        std::swap(raw[i], raw[sizeof(T) - 1 - i]);
      }
    }
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::string_view get_raw(std::size_t n) {
    need(n);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::string get_string() {
    const auto n = get<std::uint64_t>();
    return std::string(get_raw(static_cast<std::size_t>(n)));
  }

  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > bytes_.size() - pos_) {
      throw CorruptFileError(what_ + ": truncated or corrupt (needed " + std::to_string(n) +
                             " more bytes at offset " + std::to_string(pos_) + ")");
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

}  // namespace cwae
