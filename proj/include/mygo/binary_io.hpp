#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mygo/errors.hpp"

namespace mygo {

/// Little-endian byte buffer builder.
class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }
    void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

    const std::vector<std::uint8_t>& bytes() const { return bytes_; }
    void write_file(const std::filesystem::path& path) const;

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked little-endian reader; throws DataError on truncation.
class ByteReader {
public:
    explicit ByteReader(std::vector<std::uint8_t> bytes, std::string what)
        : bytes_(std::move(bytes)), what_(std::move(what)) {}
    static ByteReader from_file(const std::filesystem::path& path);

    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(get(4))); }
    std::string raw(std::size_t n);

    std::size_t remaining() const { return bytes_.size() - pos_; }
    const std::string& what() const { return what_; }

private:
    std::uint64_t get(int n);
    std::vector<std::uint8_t> bytes_;
    std::string what_;
    std::size_t pos_ = 0;
};

}  // namespace mygo
