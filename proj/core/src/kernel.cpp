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

#include "taskmesh/kernel.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>

namespace taskmesh {

void BufferStore::put(BufferId id, Bytes data) {
  std::lock_guard lk(mu_);
  data_[id] = std::move(data);
}

std::optional<Bytes> BufferStore::get(BufferId id) const {
  std::lock_guard lk(mu_);
  auto it = data_.find(id);
  if (it == data_.end()) return std::nullopt;
  return it->second;
}

bool BufferStore::contains(BufferId id) const {
  std::lock_guard lk(mu_);
  return data_.count(id) != 0;
}

bool BufferStore::erase(BufferId id) {
  std::lock_guard lk(mu_);
  return data_.erase(id) != 0;
}

std::size_t BufferStore::size() const {
  std::lock_guard lk(mu_);
  return data_.size();
}

std::map<BufferId, Bytes> BufferStore::snapshot() const {
  std::lock_guard lk(mu_);
  return data_;
}

namespace {

std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

void fill(std::byte* out, std::size_t n, std::uint64_t seed) {
  std::uint64_t s = seed;
  std::size_t i = 0;
  while (i < n) {
    std::uint64_t v = splitmix(s);
    std::size_t k = std::min<std::size_t>(8, n - i);
    std::memcpy(out + i, &v, k);
    i += k;
  }
}

}  // namespace

Bytes initial_content(BufferId id, std::uint64_t size) {
  Bytes b(size);
  fill(b.data(), b.size(), 0x5eed0000ull + id.value());
  return b;
}

std::uint64_t busy_loop(std::uint64_t iterations) {
  std::uint64_t x = 0x2545f4914f6cdd1dull;
  for (std::uint64_t i = 0; i < iterations; ++i) {
    x ^= x << 13;
    x ^= x >> 7;
    x ^= x << 17;
    asm volatile("" : "+r"(x));
  }
  return x;
}

double calibrate_iterations_per_us(Micros sample_us) {
  using clock = std::chrono::steady_clock;
  std::uint64_t n = 1 << 16;
  for (;;) {
    auto t0 = clock::now();
    busy_loop(n);
    double us = std::chrono::duration<double, std::micro>(clock::now() - t0).count();
    if (us >= sample_us || n > (1ull << 40)) return static_cast<double>(n) / std::max(us, 1e-3);
    n = us < 1 ? n * 16 : static_cast<std::uint64_t>(static_cast<double>(n) * std::min(16.0, 1.2 * sample_us / us));
  }
}

Bytes ExecuteArgs::encode() const {
  ByteWriter w;
  w.u32(task.value()).u64(kernel.iterations).u64(kernel.output_bytes);
  w.u32(static_cast<std::uint32_t>(deps.size()));
  for (const auto& d : deps) {
    w.u32(d.buffer.value()).u8(static_cast<std::uint8_t>(d.direction)).u64(d.size);
  }
  return w.take();
}

ExecuteArgs ExecuteArgs::decode(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  ExecuteArgs a;
  a.task = TaskId(r.u32());
  a.kernel.iterations = r.u64();
  a.kernel.output_bytes = r.u64();
  std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    ExecuteDep d;
    d.buffer = BufferId(r.u32());
    std::uint8_t dir = r.u8();
    if (dir > 2) throw Error(ErrorCode::FrameError, "bad dependency direction");
    d.direction = static_cast<DepDirection>(dir);
    d.size = r.u64();
    a.deps.push_back(d);
  }
  return a;
}

ExecuteArgs ExecuteArgs::from_task(const TaskGraph& graph, const Task& task) {
  ExecuteArgs a;
  a.task = task.id;
  a.kernel = task.payload;
  for (const auto& d : task.deps) {
    a.deps.push_back({d.buffer, d.direction, graph.buffer(d.buffer).size_bytes});
  }
  return a;
}

void apply_kernel(const ExecuteArgs& args, std::map<BufferId, Bytes>& buffers) {
  std::uint64_t h = checksum({}, 0xcbf29ce484222325ull ^ (args.task.value() * 0x100000001b3ull));
  for (const auto& d : args.deps) {
    if (!reads(d.direction)) continue;
    auto it = buffers.find(d.buffer);
    if (it == buffers.end()) {
      throw Error(ErrorCode::MissingBuffer, "task " + std::to_string(args.task.value()) +
                                                " needs buffer " + std::to_string(d.buffer.value()));
    }
    h = checksum(it->second, h ^ d.buffer.value());
  }
  for (const auto& d : args.deps) {
    if (!writes(d.direction)) continue;
    Bytes& out = buffers[d.buffer];
    if (out.size() != d.size) out.resize(d.size);
    std::size_t n = args.kernel.output_bytes == 0 ? out.size()
                                                  : std::min<std::size_t>(out.size(), args.kernel.output_bytes);
    fill(out.data(), n, h ^ (static_cast<std::uint64_t>(d.buffer.value()) * 0x9e3779b97f4a7c15ull));
  }
}

Micros run_kernel(const ExecuteArgs& args, BufferStore& store, bool spin) {
  auto t0 = std::chrono::steady_clock::now();
  store.with_lock([&](std::map<BufferId, Bytes>& m) { apply_kernel(args, m); });
  if (spin) busy_loop(args.kernel.iterations);
  return std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count();
}

std::map<BufferId, Bytes> serial_reference(const TaskGraph& graph) {
  std::map<BufferId, Bytes> m;
  for (const Buffer& b : graph.buffers()) m[b.id] = initial_content(b.id, b.size_bytes);
  for (const Task& t : graph.tasks()) {
    if (!is_compute_task(t.kind)) continue;
    apply_kernel(ExecuteArgs::from_task(graph, t), m);
  }
  return m;
}

}  // namespace taskmesh
