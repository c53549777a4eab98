#include <algorithm>
#include <deque>
#include <filesystem>

#include "doctest.h"
#include "echo/error.hpp"
#include "echo/index/hnsw.hpp"
#include "support/random_data.hpp"

using namespace echo;
using testing::make_entry;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected echo::Error");
  return ErrorCode::kInvalidArgument;
}

void check_structure(const HnswIndex& index) {
  const auto& p = index.params();
  for (EntryId id : index.ids()) {
    for (int layer = 0; layer <= index.level(id); ++layer) {
      const auto links = index.neighbors(id, layer);
      CHECK(links.size() <= (layer == 0 ? p.m0 : p.m));
      for (EntryId other : links) {
        CHECK(other != id);
        REQUIRE(index.level(other) >= layer);
        const auto back = index.neighbors(other, layer);
        CHECK(std::find(back.begin(), back.end(), id) != back.end());
      }
    }
  }
}

std::size_t reachable_at_layer0(const HnswIndex& index) {
  std::unordered_map<EntryId, bool> seen;
  std::deque<EntryId> queue{*index.entry_point()};
  seen[*index.entry_point()] = true;
  while (!queue.empty()) {
    const EntryId id = queue.front();
    queue.pop_front();
    for (EntryId n : index.neighbors(id, 0)) {
      if (!seen[n]) {
        seen[n] = true;
        queue.push_back(n);
      }
    }
  }
  return seen.size();
}

}  // namespace

TEST_CASE("params validation") {
  HnswParams p;
  CHECK_NOTHROW(p.validate());
  p.m = 1;
  CHECK(code_of([&] { p.validate(); }) == ErrorCode::kInvalidArgument);
  p = HnswParams::for_m(8);
  CHECK(p.m0 == 16);
  CHECK(p.level_multiplier == doctest::Approx(1.0 / std::log(8.0)));
  p.ef_construction = 4;
  CHECK(code_of([&] { p.validate(); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("default params") {
  const HnswParams p;
  CHECK(p.m == 16);
  CHECK(p.m0 == 32);
  CHECK(p.ef_construction == 200);
  CHECK(p.ef_search == 100);
  CHECK(p.level_multiplier == doctest::Approx(1.0 / std::log(16.0)));
}

TEST_CASE("build over an empty memory fails") {
  VectorMemory memory(4);
  CHECK(code_of([&] { HnswIndex::build(memory); }) == ErrorCode::kEmptyMemory);
  HnswIndex empty(memory);
  CHECK(code_of([&] { empty.search(Embedding({1, 0, 0, 0}), 1); }) == ErrorCode::kEmptyIndex);
}

TEST_CASE("singleton graph") {
  VectorMemory memory(3);
  memory.insert(make_entry(7, {1, 2, 3}));
  const auto index = HnswIndex::build(memory);
  CHECK(index.entry_point() == std::optional<EntryId>(7));
  CHECK(index.level(7) >= 0);
  for (int l = 0; l <= index.level(7); ++l) CHECK(index.neighbors(7, l).empty());
  const auto r = index.search(Embedding({-1, 0, 0}), 1);
  REQUIRE(r.size() == 1);
  CHECK(r[0].id == 7);
}

TEST_CASE("incremental insert errors") {
  VectorMemory memory(2);
  memory.insert(make_entry(0, {1, 0}));
  memory.insert(make_entry(1, {0, 1}));
  HnswIndex index(memory);
  index.insert(0);
  CHECK(index.entry_point() == std::optional<EntryId>(0));
  CHECK(code_of([&] { index.insert(0); }) == ErrorCode::kAlreadyIndexed);
  CHECK(code_of([&] { index.insert(42); }) == ErrorCode::kUnknownEntry);
  index.insert(1);
  CHECK(index.size() == 2);
  CHECK(code_of([&] { index.search(Embedding({1, 0, 0}), 1); }) == ErrorCode::kDimensionMismatch);
}

TEST_CASE("levels follow floor(-ln u * mult) with a seeded engine") {
  // Replays the level draw independently from the engine's raw output.
  testing::Rng rng(20);
  auto memory = testing::random_memory(rng, 300, 8);
  HnswParams p = HnswParams::for_m(4);
  p.ef_construction = 16;
  p.rng_seed = 99;
  const auto index = HnswIndex::build(memory, p);
  std::mt19937_64 engine(99);
  int top = -1;
  for (EntryId id = 0; id < 300; ++id) {
    const double u = double((engine() >> 11) + 1) * 0x1.0p-53;
    const int level = int(std::floor(-std::log(u) * p.level_multiplier));
    CHECK(index.level(id) == level);
    top = std::max(top, level);
  }
  CHECK(index.max_level() == top);
  CHECK(index.level(*index.entry_point()) == top);
}

TEST_CASE("after inserting 100 points every list respects its cap and links are symmetric") {
  testing::Rng rng(21);
  auto memory = testing::random_memory(rng, 100, 16);
  HnswParams p = HnswParams::for_m(4);  // small caps so pruning actually runs
  p.ef_construction = 20;
  HnswIndex index(memory, p);
  for (EntryId id = 0; id < 100; ++id) {
    index.insert(id);
    if (id % 25 == 24) check_structure(index);
  }
  check_structure(index);
}

TEST_CASE("same seed and insertion order give a byte-identical graph") {
  testing::Rng rng(22);
  auto memory = testing::random_memory(rng, 1000, 32);
  HnswParams p;
  p.ef_construction = 64;
  const auto a = HnswIndex::build(memory, p);
  const auto b = HnswIndex::build(memory, p);
  CHECK(a == b);
  CHECK(encode_index(a) == encode_index(b));
  const Embedding q(rng.gaussian_vector(32));
  CHECK(a.search(q, 10) == b.search(q, 10));

  p.rng_seed += 1;
  const auto c = HnswIndex::build(memory, p);
  CHECK_FALSE(encode_index(a) == encode_index(c));
}

TEST_CASE("10k unit vectors d=128: every node has a layer-0 link and is reachable") {
  testing::Rng rng(23);
  VectorMemory memory(128);
  for (EntryId i = 0; i < 10000; ++i) memory.insert(make_entry(i, rng.unit_vector(128)));
  const auto index = HnswIndex::build(memory);
  for (EntryId id : index.ids()) CHECK(!index.neighbors(id, 0).empty());
  CHECK(reachable_at_layer0(index) == 10000);
}

TEST_CASE("ef = N reproduces brute force on 100 random vectors") {
  testing::Rng rng(24);
  auto memory = testing::random_memory(rng, 100, 24);
  const auto index = HnswIndex::build(memory);
  for (int q = 0; q < 20; ++q) {
    const Embedding query(rng.gaussian_vector(24));
    CHECK(index.search(query, 10, 100) == memory.brute_force_top_k(query, 10));
    CHECK(index.search(query, 100, 100) == memory.brute_force_top_k(query, 100));
  }
}

TEST_CASE("property: ef >= N matches the oracle exactly across seeds") {
  testing::Rng rng(25);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(256);
    const std::size_t dim = std::vector<std::size_t>{2, 8, 64}[rng.below(3)];
    auto memory = testing::random_memory(rng, n, dim, rng.below(2) == 0);
    HnswParams p = HnswParams::for_m(2 + rng.below(15));
    p.ef_construction = std::max<std::size_t>(p.m, 10 + rng.below(100));
    p.rng_seed = rng.below(1u << 30);
    const auto index = HnswIndex::build(memory, p);
    for (int q = 0; q < 5; ++q) {
      const Embedding query(rng.gaussian_vector(dim));
      const std::size_t k = 1 + rng.below(n);
      CHECK(index.search(query, k, n) == memory.brute_force_top_k(query, k));
    }
  }
}

TEST_CASE("filter is applied to the final pool before truncation") {
  testing::Rng rng(26);
  auto memory = testing::random_memory(rng, 64, 8);
  const auto index = HnswIndex::build(memory);
  auto even = [](const EntryInfo& e) { return e.id % 2 == 0; };
  const Embedding query(rng.gaussian_vector(8));
  const auto got = index.search(query, 5, 64, even);
  CHECK(got == memory.brute_force_top_k(query, 5, even));
  for (auto& s : got) CHECK(s.id % 2 == 0);
}

TEST_CASE("recall is non-decreasing in ef on average") {
  testing::Rng rng(27);
  VectorMemory memory(32);
  for (EntryId i = 0; i < 3000; ++i) memory.insert(make_entry(i, rng.unit_vector(32)));
  HnswParams p = HnswParams::for_m(8);
  p.ef_construction = 60;
  const auto index = HnswIndex::build(memory, p);
  std::vector<Embedding> queries;
  for (int q = 0; q < 100; ++q) queries.emplace_back(rng.unit_vector(32));
  double previous = 0.0;
  for (std::size_t ef : {10u, 20u, 40u, 80u, 160u}) {
    double total = 0;
    for (const auto& q : queries) total += testing::recall(memory.brute_force_top_k(q, 10), index.search(q, 10, ef));
    const double mean = total / queries.size();
    CAPTURE(ef);
    CHECK(mean >= previous - 0.02);
    previous = mean;
  }
}

TEST_CASE("index save/load round-trip and validation") {
  testing::Rng rng(28);
  auto memory = testing::random_memory(rng, 200, 16);
  const auto index = HnswIndex::build(memory);
  const auto path = (std::filesystem::temp_directory_path() / "echo_hnsw_test.idx").string();
  save_index(index, path);
  const auto loaded = load_index(path, memory);
  CHECK(loaded == index);
  CHECK(encode_index(loaded) == encode_index(index));
  std::filesystem::remove(path);

  auto bytes = encode_index(index);
  bytes[bytes.size() / 2] ^= std::byte{0x10};
  CHECK(code_of([&] { decode_index(bytes, memory); }) == ErrorCode::kCorruptFile);

  auto other = testing::random_memory(rng, 200, 16);
  CHECK(code_of([&] { decode_index(encode_index(index), other); }) == ErrorCode::kIndexMemoryMismatch);
}

TEST_CASE("a loaded index continues inserting exactly like the original") {
  testing::Rng rng(29);
  VectorMemory memory(8);
  for (EntryId i = 0; i < 80; ++i) memory.insert(make_entry(i, rng.gaussian_vector(8)));
  HnswIndex original(memory);
  for (EntryId i = 0; i < 60; ++i) original.insert(i);
  auto partial_memory_crc_guard = encode_index(original);
  // The sidecar is bound to the memory's full vector CRC, so rebuild the same partial
  // index over the same memory and compare continued insertion.
  auto resumed = decode_index(partial_memory_crc_guard, memory);
  for (EntryId i = 60; i < 80; ++i) {
    original.insert(i);
    resumed.insert(i);
  }
  CHECK(resumed == original);
}
