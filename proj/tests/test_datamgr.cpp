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

#include <doctest.h>

#include <map>
#include <set>

#include "support.hpp"
#include "taskmesh/datamgr.hpp"

using namespace taskmesh;

namespace {

/// Hand-made schedule: node per task, est = task id.
Schedule place(const TaskGraph& g, std::vector<NodeId> nodes) {
  Schedule s;
  s.assignment = std::move(nodes);
  for (std::size_t i = 0; i < g.task_count(); ++i) {
    s.est.push_back(static_cast<Micros>(i));
    s.eft.push_back(static_cast<Micros>(i) + 1);
  }
  return s;
}

TransferAction fwd(std::uint32_t b, NodeId src, NodeId dst) {
  return {ActionKind::Forward, BufferId{b}, src, dst};
}
TransferAction rm(std::uint32_t b, NodeId dst) { return {ActionKind::Remove, BufferId{b}, kHeadNode, dst}; }

/// Versioned copies per node. A copy is valid when its version is the buffer's latest.
struct CopyModel {
  std::map<std::uint32_t, std::map<NodeId, int>> copies;
  std::map<std::uint32_t, int> latest;

  void init(std::uint32_t b) {
    if (latest.count(b)) return;
    latest[b] = 0;
    copies[b][kHeadNode] = 0;
  }
  bool valid(std::uint32_t b, NodeId n) {
    auto it = copies[b].find(n);
    return it != copies[b].end() && it->second == latest[b];
  }
  void apply(const TransferPlan& plan) {
    for (const auto& a : plan) {
      const auto b = a.buffer.value();
      init(b);
      switch (a.kind) {
        case ActionKind::Alloc: break;
        case ActionKind::Forward:
          REQUIRE(valid(b, a.src));
          CHECK(a.src != a.dst);
          copies[b][a.dst] = latest[b];
          break;
        case ActionKind::Retrieve:
          REQUIRE(valid(b, a.src));
          copies[b][kHeadNode] = latest[b];
          break;
        case ActionKind::Remove:
          REQUIRE(copies[b].count(a.dst) == 1);
          CHECK(a.dst != kHeadNode);
          copies[b].erase(a.dst);
          break;
      }
    }
  }
  void write(std::uint32_t b, NodeId n) {
    init(b);
    copies[b][n] = ++latest[b];
  }
  std::vector<NodeId> valid_workers(std::uint32_t b) {
    std::vector<NodeId> out;
    for (auto [n, v] : copies[b]) {
      if (n != kHeadNode && v == latest[b]) out.push_back(n);
    }
    return out;
  }
  std::size_t worker_copies(std::uint32_t b) {
    std::size_t k = 0;
    for (auto [n, v] : copies[b]) k += n != kHeadNode;
    return k;
  }
};

}  // namespace

TEST_SUITE("datamgr") {

TEST_CASE("offload chain walkthrough") {
  auto l = tmtest::offload_chain();
  auto g = derive_edges(l.program);
  auto s = place(g, {1, 1, 2, 2});
  DataManager dm(g, s);

  auto enter = dm.on_enter_data(l.a, l.enter);
  CHECK(enter == TransferPlan{{ActionKind::Alloc, l.a, kHeadNode, 1}, fwd(0, kHeadNode, 1)});
  CHECK(dm.state(l.a).fresh == 1);

  CHECK(dm.before_execute(g.task(l.foo), 1).empty());
  CHECK(dm.after_execute(g.task(l.foo), 1).empty());
  CHECK(dm.state(l.a).locations == std::vector<NodeId>{1});
  CHECK_FALSE(dm.state(l.a).on_head);

  // bar pulls from worker 1, not from the head.
  CHECK(dm.before_execute(g.task(l.bar), 2) == TransferPlan{fwd(0, 1, 2)});
  CHECK(dm.after_execute(g.task(l.bar), 2) == TransferPlan{rm(0, 1)});
  CHECK(dm.state(l.a).locations == std::vector<NodeId>{2});
  CHECK(dm.state(l.a).fresh == 2);

  auto exit = dm.on_exit_data(l.a, true);
  CHECK(exit == TransferPlan{{ActionKind::Retrieve, l.a, 2, kHeadNode}, rm(0, 2)});
  CHECK(dm.state(l.a).locations.empty());
  CHECK(dm.state(l.a).on_head);
}

TEST_CASE("unused buffer registers on the head only") {
  Program p;
  auto a = p.add_buffer(8);
  auto e = p.add_enter_data(a);
  p.seal();
  auto g = derive_edges(p);
  auto s = place(g, {0});
  DataManager dm(g, s);
  CHECK(dm.on_enter_data(a, e) == TransferPlan{{ActionKind::Alloc, a, kHeadNode, kHeadNode}});
  CHECK(dm.state(a).registered);
  CHECK(dm.state(a).locations.empty());
  CHECK(dm.on_exit_data(a, true).empty());
}

TEST_CASE("first user on node 2 of 4") {
  Program p;
  auto a = p.add_buffer(8);
  auto e = p.add_enter_data(a);
  p.add_task(TaskKind::TargetTask, {{a, DepDirection::In}}, 1);
  p.add_task(TaskKind::TargetTask, {{a, DepDirection::In}}, 1);
  p.seal();
  auto g = derive_edges(p);
  auto s = place(g, {3, 3, 2});
  s.est = {0, 50, 10};
  DataManager dm(g, s);
  auto plan = dm.on_enter_data(a, e);
  CHECK(plan == TransferPlan{{ActionKind::Alloc, a, kHeadNode, 2}, fwd(0, kHeadNode, 2)});
  CHECK(dm.state(a).locations == std::vector<NodeId>{2});
}

TEST_CASE("three inputs from three nodes") {
  Program p;
  std::vector<BufferId> bs;
  for (int i = 0; i < 3; ++i) bs.push_back(p.add_buffer(8));
  for (int i = 0; i < 3; ++i) p.add_task(TaskKind::TargetTask, {{bs[i], DepDirection::Out}}, 1);
  auto reader = p.add_task(TaskKind::TargetTask,
                           {{bs[0], DepDirection::In}, {bs[1], DepDirection::In}, {bs[2], DepDirection::In}}, 1);
  p.seal();
  auto g = derive_edges(p);
  auto s = place(g, {1, 2, 3, 4});
  DataManager dm(g, s);
  for (std::uint32_t i = 0; i < 3; ++i) {
    dm.before_execute(g.tasks()[i], static_cast<NodeId>(i + 1));
    dm.after_execute(g.tasks()[i], static_cast<NodeId>(i + 1));
  }
  auto plan = dm.before_execute(g.task(reader), 4);
  CHECK(plan == TransferPlan{fwd(0, 1, 4), fwd(1, 2, 4), fwd(2, 3, 4)});
  CHECK(dm.before_execute(g.task(reader), 4).empty());
}

TEST_CASE("readers keep every copy") {
  Program p;
  auto a = p.add_buffer(8);
  for (int i = 0; i < 3; ++i) p.add_task(TaskKind::TargetTask, {{a, DepDirection::In}}, 1);
  p.seal();
  auto g = derive_edges(p);
  auto s = place(g, {1, 2, 3});
  DataManager dm(g, s);
  for (std::uint32_t i = 0; i < 3; ++i) {
    auto before = dm.before_execute(g.tasks()[i], static_cast<NodeId>(i + 1));
    CHECK(before == TransferPlan{fwd(0, kHeadNode, static_cast<NodeId>(i + 1))});
    CHECK(dm.after_execute(g.tasks()[i], static_cast<NodeId>(i + 1)).empty());
  }
  CHECK(dm.state(a).locations == std::vector<NodeId>{1, 2, 3});
  CHECK(dm.state(a).on_head);
}

TEST_CASE("second writer leaves one copy") {
  Program p;
  auto a = p.add_buffer(8);
  p.add_task(TaskKind::TargetTask, {{a, DepDirection::InOut}}, 1);
  p.add_task(TaskKind::TargetTask, {{a, DepDirection::In}}, 1);
  p.add_task(TaskKind::TargetTask, {{a, DepDirection::InOut}}, 1);
  p.seal();
  auto g = derive_edges(p);
  auto s = place(g, {1, 2, 3});
  DataManager dm(g, s);
  for (std::uint32_t i = 0; i < 3; ++i) {
    dm.before_execute(g.tasks()[i], s.assignment[i]);
    auto after = dm.after_execute(g.tasks()[i], s.assignment[i]);
    if (i == 2) CHECK(after == TransferPlan{rm(0, 1), rm(0, 2)});
  }
  CHECK(dm.state(a).locations == std::vector<NodeId>{3});
  CHECK(dm.state(a).fresh == 3);
}

TEST_CASE("exit without release keeps copies") {
  Program p;
  auto a = p.add_buffer(8);
  p.add_task(TaskKind::TargetTask, {{a, DepDirection::InOut}}, 1);
  p.seal();
  auto g = derive_edges(p);
  auto s = place(g, {2});
  DataManager dm(g, s);
  dm.before_execute(g.tasks()[0], 2);
  dm.after_execute(g.tasks()[0], 2);
  CHECK(dm.on_exit_data(a, false) == TransferPlan{{ActionKind::Retrieve, a, 2, kHeadNode}});
  CHECK(dm.state(a).locations == std::vector<NodeId>{2});
  CHECK(dm.state(a).on_head);
  CHECK(dm.on_exit_data(a, false).empty());
}

TEST_CASE("exit of an unregistered buffer") {
  Program p;
  auto a = p.add_buffer(8);
  p.seal();
  auto g = derive_edges(p);
  Schedule s;
  DataManager dm(g, s);
  try {
    dm.on_exit_data(a, true);
    FAIL("expected Unregistered");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Unregistered);
  }
}

TEST_CASE("random programs against the copy model") {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 300; ++trial) {
    tmtest::RandomProgramOptions opt;
    opt.max_tasks = 12;
    opt.max_buffers = 4;
    auto p = tmtest::random_program(rng, opt);
    auto g = derive_edges(p);
    const NodeId workers = static_cast<NodeId>(1 + trial % 4);
    std::vector<NodeId> nodes;
    for (const Task& t : g.tasks()) {
      nodes.push_back(t.kind == TaskKind::HostTask
                          ? kHeadNode
                          : static_cast<NodeId>(std::uniform_int_distribution<int>(1, workers)(rng)));
    }
    auto s = place(g, nodes);
    DataManager dm(g, s);
    CopyModel m;
    for (std::uint32_t b = 0; b < g.buffers().size(); ++b) m.init(b);

    for (const Task& t : g.tasks()) {
      const NodeId node = nodes[t.id.value()];
      if (t.kind == TaskKind::TargetDataEnter) {
        const auto b = t.deps[0].buffer.value();
        // Re-entering drops what the directory knew; model it as a fresh head copy.
        m.copies[b].clear();
        m.copies[b][kHeadNode] = ++m.latest[b];
        m.apply(dm.on_enter_data(t.deps[0].buffer, t.id));
        continue;
      }
      if (t.kind == TaskKind::TargetDataExit) {
        const auto b = t.deps[0].buffer;
        if (!dm.state(b).registered) continue;
        m.apply(dm.on_exit_data(b, t.release));
        CHECK(m.valid(b.value(), kHeadNode));
        if (t.release) CHECK(m.worker_copies(b.value()) == 0);
        continue;
      }
      auto before = dm.before_execute(t, node);
      m.apply(before);
      for (const auto& d : t.deps) CHECK(m.valid(d.buffer.value(), node));
      auto after = dm.after_execute(t, node);
      for (const auto& d : t.deps) {
        if (writes(d.direction)) m.write(d.buffer.value(), node);
      }
      m.apply(after);
      for (const auto& d : t.deps) {
        const auto b = d.buffer.value();
        const auto& st = dm.state(d.buffer);
        CHECK(st.locations == m.valid_workers(b));
        CHECK(st.on_head == m.valid(b, kHeadNode));
        CHECK(st.holds(st.fresh));
        if (writes(d.direction)) {
          CHECK(st.holder_count() == 1);
          CHECK(m.worker_copies(b) == (node == kHeadNode ? 0u : 1u));
        }
      }
    }
  }
}

}  // TEST_SUITE
