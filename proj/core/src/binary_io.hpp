#pragma once

// Internal little-endian stream helpers shared by the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "equss/errors.hpp"

namespace equss::detail {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts need byte swaps");

class Reader {
public:
    Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw FormatError("cannot open '" + path + "'", 0);
    }

    void raw(void* dst, std::size_t n, const char* what) {
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw FormatError("truncated file '" + path_ + "' while reading " + what, offset_);
        offset_ += n;
    }

    std::uint32_t u32(const char* what) {
        std::uint32_t v;
        raw(&v, sizeof v, what);
        return v;
    }

    std::uint8_t u8(const char* what) {
        std::uint8_t v;
        raw(&v, sizeof v, what);
        return v;
    }

    void expect_magic(const char magic[4]) {
        char buf[4];
        raw(buf, 4, "magic");
        if (std::memcmp(buf, magic, 4) != 0)
            throw FormatError("bad magic in '" + path_ + "', expected '" +
                                  std::string(magic, 4) + "'",
                              0);
    }

    std::size_t offset() const { return offset_; }

private:
    std::string path_;
    std::ifstream in_;
    std::size_t offset_ = 0;
};

class Writer {
public:
    Writer(const std::string& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw FormatError("cannot open '" + path + "' for writing", 0);
    }

    void raw(const void* src, std::size_t n) {
        out_.write(reinterpret_cast<const char*>(src), static_cast<std::streamsize>(n));
    }

    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void u8(std::uint8_t v) { raw(&v, sizeof v); }
    void f32(float v) { raw(&v, sizeof v); }
    void magic(const char m[4]) { raw(m, 4); }

    void close() {
        out_.close();
        if (!out_) throw FormatError("write failed for '" + path_ + "'", 0);
    }

private:
    std::string path_;
    std::ofstream out_;
};

}  // namespace equss::detail
