// Copyright 2026 The TaskMesh Authors
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

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "taskmesh/common.hpp"

namespace taskmesh {

using Bytes = std::vector<std::byte>;

/// Wire frame. Layout, all integers little-endian:
///
///   offset size field
///        0    4 magic "TMF1"
///        4    1 version (1)
///        5    2 origin
///        7    8 tag
///       15    2 channel
///       17    1 etype
///       18    4 payload_len
///       22    n payload
struct Frame {
  std::uint16_t origin = 0;
  std::uint64_t tag = 0;
  std::uint16_t channel = 0;
  std::uint8_t etype = 0;
  Bytes payload;

  friend bool operator==(const Frame&, const Frame&) = default;
};

inline constexpr std::array<char, 4> kFrameMagic{'T', 'M', 'F', '1'};
inline constexpr std::uint8_t kFrameVersion = 1;
inline constexpr std::size_t kFrameHeaderSize = 22;
inline constexpr std::size_t kDefaultMaxFrame = 64u << 20;

struct FrameHeader {
  std::uint16_t origin = 0;
  std::uint64_t tag = 0;
  std::uint16_t channel = 0;
  std::uint8_t etype = 0;
  std::uint32_t payload_len = 0;
};

void encode_header(const Frame& frame, std::span<std::byte, kFrameHeaderSize> out);
Bytes encode_frame(const Frame& frame);

/// Throws Error(FrameError) on bad magic/version or a payload larger than `max_frame`.
FrameHeader decode_header(std::span<const std::byte> bytes, std::size_t max_frame = kDefaultMaxFrame);

/// Decodes exactly one frame occupying all of `bytes`.
Frame decode_frame(std::span<const std::byte> bytes, std::size_t max_frame = kDefaultMaxFrame);

/// Reads the next frame of a capture stream; nullopt at clean end of stream.
std::optional<Frame> read_frame(std::istream& is, std::size_t max_frame = kDefaultMaxFrame);
void write_frame(std::ostream& os, const Frame& frame);

/// Little-endian field writer/reader for payloads.
class ByteWriter {
 public:
  ByteWriter& u8(std::uint8_t v);
  ByteWriter& u16(std::uint16_t v);
  ByteWriter& u32(std::uint32_t v);
  ByteWriter& u64(std::uint64_t v);
  ByteWriter& f64(double v);
  ByteWriter& bytes(std::span<const std::byte> b);
  ByteWriter& str(std::string_view s);

  Bytes take() { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  Bytes buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> data) : data_(data) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::span<const std::byte> bytes(std::size_t n);
  std::string str();

  std::span<const std::byte> rest() const { return data_.subspan(pos_); }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const;

  std::span<const std::byte> data_;
  std::size_t pos_ = 0;
};

/// 64-bit FNV-1a; used for payload checksums.
std::uint64_t checksum(std::span<const std::byte> data, std::uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace taskmesh
