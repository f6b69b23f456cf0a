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

#include "taskmesh/frame.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

namespace taskmesh {

namespace {

template <typename T>
void put_le(std::byte* out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out[i] = static_cast<std::byte>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  }
}

template <typename T>
T get_le(const std::byte* in) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(in[i])) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace

void encode_header(const Frame& f, std::span<std::byte, kFrameHeaderSize> out) {
  std::byte* p = out.data();
  std::memcpy(p, kFrameMagic.data(), 4);
  p[4] = static_cast<std::byte>(kFrameVersion);
  put_le<std::uint16_t>(p + 5, f.origin);
  put_le<std::uint64_t>(p + 7, f.tag);
  put_le<std::uint16_t>(p + 15, f.channel);
  p[17] = static_cast<std::byte>(f.etype);
  put_le<std::uint32_t>(p + 18, static_cast<std::uint32_t>(f.payload.size()));
}

Bytes encode_frame(const Frame& f) {
  if (f.payload.size() > 0xffffffffull) throw Error(ErrorCode::FrameError, "payload too large");
  Bytes out(kFrameHeaderSize + f.payload.size());
  encode_header(f, std::span<std::byte, kFrameHeaderSize>(out.data(), kFrameHeaderSize));
  if (!f.payload.empty()) std::memcpy(out.data() + kFrameHeaderSize, f.payload.data(), f.payload.size());
  return out;
}

FrameHeader decode_header(std::span<const std::byte> bytes, std::size_t max_frame) {
  if (bytes.size() < kFrameHeaderSize) throw Error(ErrorCode::FrameError, "short header");
  const std::byte* p = bytes.data();
  if (std::memcmp(p, kFrameMagic.data(), 4) != 0) throw Error(ErrorCode::FrameError, "bad magic");
  if (std::to_integer<std::uint8_t>(p[4]) != kFrameVersion) {
    throw Error(ErrorCode::FrameError, "unsupported version");
  }
  FrameHeader h;
  h.origin = get_le<std::uint16_t>(p + 5);
  h.tag = get_le<std::uint64_t>(p + 7);
  h.channel = get_le<std::uint16_t>(p + 15);
  h.etype = std::to_integer<std::uint8_t>(p[17]);
  h.payload_len = get_le<std::uint32_t>(p + 18);
  if (kFrameHeaderSize + static_cast<std::size_t>(h.payload_len) > max_frame) {
    throw Error(ErrorCode::FrameError, "frame exceeds maximum size");
  }
  return h;
}

Frame decode_frame(std::span<const std::byte> bytes, std::size_t max_frame) {
  FrameHeader h = decode_header(bytes, max_frame);
  if (bytes.size() != kFrameHeaderSize + h.payload_len) {
    throw Error(ErrorCode::FrameError, "payload_len does not match frame size");
  }
  Frame f{h.origin, h.tag, h.channel, h.etype, {}};
  f.payload.assign(bytes.begin() + kFrameHeaderSize, bytes.end());
  return f;
}

std::optional<Frame> read_frame(std::istream& is, std::size_t max_frame) {
  std::array<std::byte, kFrameHeaderSize> hdr{};
  is.read(reinterpret_cast<char*>(hdr.data()), hdr.size());
  if (is.gcount() == 0 && is.eof()) return std::nullopt;
  if (static_cast<std::size_t>(is.gcount()) != hdr.size()) {
    throw Error(ErrorCode::FrameError, "truncated frame header");
  }
  FrameHeader h = decode_header(hdr, max_frame);
  Frame f{h.origin, h.tag, h.channel, h.etype, Bytes(h.payload_len)};
  is.read(reinterpret_cast<char*>(f.payload.data()), h.payload_len);
  if (static_cast<std::size_t>(is.gcount()) != h.payload_len) {
    throw Error(ErrorCode::FrameError, "truncated frame payload");
  }
  return f;
}

void write_frame(std::ostream& os, const Frame& frame) {
  std::array<std::byte, kFrameHeaderSize> hdr{};
  encode_header(frame, hdr);
  os.write(reinterpret_cast<const char*>(hdr.data()), hdr.size());
  os.write(reinterpret_cast<const char*>(frame.payload.data()),
           static_cast<std::streamsize>(frame.payload.size()));
}

// ---------------------------------------------------------------------------

ByteWriter& ByteWriter::u8(std::uint8_t v) {
  buf_.push_back(static_cast<std::byte>(v));
  return *this;
}

#define TASKMESH_PUT(T)                                 \
  do {                                                  \
    const auto at = buf_.size();                        \
    buf_.resize(at + sizeof(T));                        \
    put_le<T>(buf_.data() + at, v);                     \
  } while (0)

ByteWriter& ByteWriter::u16(std::uint16_t v) { TASKMESH_PUT(std::uint16_t); return *this; }
ByteWriter& ByteWriter::u32(std::uint32_t v) { TASKMESH_PUT(std::uint32_t); return *this; }
ByteWriter& ByteWriter::u64(std::uint64_t v) { TASKMESH_PUT(std::uint64_t); return *this; }

#undef TASKMESH_PUT

ByteWriter& ByteWriter::f64(double v) { return u64(std::bit_cast<std::uint64_t>(v)); }

ByteWriter& ByteWriter::bytes(std::span<const std::byte> b) {
  buf_.insert(buf_.end(), b.begin(), b.end());
  return *this;
}

ByteWriter& ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  return bytes(std::as_bytes(std::span<const char>(s.data(), s.size())));
}

void ByteReader::need(std::size_t n) const {
  if (data_.size() - pos_ < n) throw Error(ErrorCode::FrameError, "payload truncated");
}

std::uint8_t ByteReader::u8() {
  need(1);
  return std::to_integer<std::uint8_t>(data_[pos_++]);
}

std::uint16_t ByteReader::u16() {
  need(2);
  auto v = get_le<std::uint16_t>(data_.data() + pos_);
  pos_ += 2;
  return v;
}

std::uint32_t ByteReader::u32() {
  need(4);
  auto v = get_le<std::uint32_t>(data_.data() + pos_);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  auto v = get_le<std::uint64_t>(data_.data() + pos_);
  pos_ += 8;
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::span<const std::byte> ByteReader::bytes(std::size_t n) {
  need(n);
  auto s = data_.subspan(pos_, n);
  pos_ += n;
  return s;
}

std::string ByteReader::str() {
  auto n = u32();
  auto b = bytes(n);
  return std::string(reinterpret_cast<const char*>(b.data()), b.size());
}

std::uint64_t checksum(std::span<const std::byte> data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::byte b : data) {
    h ^= std::to_integer<std::uint8_t>(b);
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace taskmesh
