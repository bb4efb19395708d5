// Copyright 2026 The tabscout Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tabscout/error.hpp"

namespace tabscout::detail {

// Little-endian encoding independent of host byte order.
class BinaryWriter {
public:
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void i64(std::int64_t v) { put(static_cast<std::uint64_t>(v), 8); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.append(s);
    }
    void raw(std::string_view bytes) { buf_.append(bytes); }

    const std::string& bytes() const { return buf_; }

    void write_to(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
        out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
        if (!out) throw Error(ErrorCode::kIoError, "short write to " + path.string());
    }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    std::string buf_;
};

class BinaryReader {
public:
    BinaryReader(std::string bytes, ErrorCode corrupt) : buf_(std::move(bytes)), corrupt_(corrupt) {}

    static BinaryReader from_file(const std::filesystem::path& path, ErrorCode corrupt) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        return BinaryReader(ss.str(), corrupt);
    }

    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    std::int64_t i64() { return static_cast<std::int64_t>(get(8)); }
    double f64() { return std::bit_cast<double>(get(8)); }
    std::string str() {
        auto n = u32();
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::string raw(std::size_t n) {
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t offset() const { return pos_; }
    bool at_end() const { return pos_ == buf_.size(); }
    std::size_t remaining() const { return buf_.size() - pos_; }

    [[noreturn]] void fail(const std::string& what) const {
        throw Error(corrupt_, what + " at offset " + std::to_string(pos_));
    }

private:
    void need(std::size_t n) const {
        if (buf_.size() - pos_ < n) {
            throw Error(corrupt_, "unexpected end of file at offset " + std::to_string(pos_) + " (need " +
                                      std::to_string(n) + " bytes, have " + std::to_string(buf_.size() - pos_) + ")");
        }
    }
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::string buf_;
    std::size_t pos_ = 0;
    ErrorCode corrupt_;
};

}  // namespace tabscout::detail
