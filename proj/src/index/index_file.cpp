// ECHOIDX file layout (little-endian):
//
//   char[8]  "ECHOIDX\0"
//   u32      format version
//   u32      vector CRC of the memory the index was built against
//   u64      memory entry count
//   u64 m, m0, ef_construction, ef_search
//   f64      level_multiplier
//   u64      rng_seed, level draws consumed
//   u64      node count
//   i32      max level
//   u64      entry-point ordinal
//   per node, in insertion order:
//     u64 entry id, i32 level, then per layer 0..level: u32 count, u64 neighbor entry ids
//   u32      CRC-32 of every preceding byte

#include <cstring>

#include "echo/error.hpp"
#include "echo/index/hnsw.hpp"
#include "echo/util/binary_io.hpp"
#include "echo/util/codec.hpp"

namespace echo {

namespace {
constexpr char kMagic[8] = {'E', 'C', 'H', 'O', 'I', 'D', 'X', '\0'};
}  // namespace

class IndexFileCodec {
 public:
  static std::vector<std::byte> encode(const HnswIndex& index) {
    util::ByteWriter out;
    out.put_bytes(std::as_bytes(std::span(kMagic)));
    out.put<std::uint32_t>(kIndexFormatVersion);
    out.put<std::uint32_t>(index.memory_->vector_crc());
    out.put<std::uint64_t>(index.memory_->size());
    const HnswParams& p = index.params_;
    out.put<std::uint64_t>(p.m);
    out.put<std::uint64_t>(p.m0);
    out.put<std::uint64_t>(p.ef_construction);
    out.put<std::uint64_t>(p.ef_search);
    out.put<double>(p.level_multiplier);
    out.put<std::uint64_t>(p.rng_seed);
    out.put<std::uint64_t>(index.rng_draws_);
    out.put<std::uint64_t>(index.nodes_.size());
    out.put<std::int32_t>(index.max_level_);
    out.put<std::uint64_t>(index.entry_);
    for (const auto& node : index.nodes_) {
      out.put<std::uint64_t>(node.id);
      out.put<std::int32_t>(node.level);
      for (const auto& layer : node.links) {
        out.put<std::uint32_t>(static_cast<std::uint32_t>(layer.size()));
        for (std::uint32_t n : layer) out.put<std::uint64_t>(index.nodes_[n].id);
      }
    }
    out.put<std::uint32_t>(util::crc32(out.bytes()));
    return std::move(out.bytes());
  }

  static HnswIndex decode(std::span<const std::byte> bytes, const VectorMemory& memory) {
    if (bytes.size() < sizeof(kMagic) + 4) throw Error(ErrorCode::kCorruptFile, "index file too short");
    const auto body = bytes.first(bytes.size() - 4);
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + body.size(), 4);
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw Error(ErrorCode::kCorruptFile, "not an ECHOIDX file");
    if (util::crc32(body) != stored_crc) throw Error(ErrorCode::kCorruptFile, "index checksum mismatch");

    util::ByteReader in(body);
    in.get_bytes(sizeof(kMagic));
    const auto version = in.get<std::uint32_t>();
    if (version != kIndexFormatVersion) {
      throw Error(ErrorCode::kFormatVersionMismatch, "unsupported index file version " + std::to_string(version));
    }
    const auto memory_crc = in.get<std::uint32_t>();
    const auto memory_size = in.get<std::uint64_t>();
    if (memory_crc != memory.vector_crc() || memory_size != memory.size()) {
      throw Error(ErrorCode::kIndexMemoryMismatch, "index was built against a different memory");
    }

    HnswParams p;
    p.m = in.get<std::uint64_t>();
    p.m0 = in.get<std::uint64_t>();
    p.ef_construction = in.get<std::uint64_t>();
    p.ef_search = in.get<std::uint64_t>();
    p.level_multiplier = in.get<double>();
    p.rng_seed = in.get<std::uint64_t>();
    HnswIndex index(memory, p);
    index.rng_draws_ = in.get<std::uint64_t>();
    index.rng_.discard(index.rng_draws_);

    const auto count = in.get<std::uint64_t>();
    index.max_level_ = in.get<std::int32_t>();
    const auto entry = in.get<std::uint64_t>();
    if (count > memory.size() || (count > 0 && entry >= count)) throw Error(ErrorCode::kCorruptFile, "bad node count");

    std::vector<std::vector<std::vector<EntryId>>> raw_links(count);
    index.nodes_.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      const auto id = in.get<std::uint64_t>();
      const auto level = in.get<std::int32_t>();
      const auto row = memory.row_of(id);
      if (!row || level < 0 || level > index.max_level_ || index.node_by_id_.contains(id)) {
        throw Error(ErrorCode::kCorruptFile, "bad node record " + std::to_string(i));
      }
      raw_links[i].resize(static_cast<std::size_t>(level) + 1);
      for (auto& layer : raw_links[i]) {
        const auto n = in.get<std::uint32_t>();
        layer.reserve(n);
        for (std::uint32_t j = 0; j < n; ++j) layer.push_back(in.get<std::uint64_t>());
      }
      index.node_by_id_.emplace(id, static_cast<std::uint32_t>(i));
      index.nodes_.push_back({id, static_cast<std::uint32_t>(*row), level, {}});
    }
    if (in.remaining() != 0) throw Error(ErrorCode::kCorruptFile, "trailing bytes in index file");

    for (std::uint64_t i = 0; i < count; ++i) {
      auto& node = index.nodes_[i];
      node.links.resize(raw_links[i].size());
      for (std::size_t layer = 0; layer < raw_links[i].size(); ++layer) {
        for (EntryId nid : raw_links[i][layer]) {
          auto it = index.node_by_id_.find(nid);
          if (it == index.node_by_id_.end()) throw Error(ErrorCode::kCorruptFile, "dangling link");
          node.links[layer].push_back(it->second);
        }
      }
    }
    index.entry_ = static_cast<std::uint32_t>(entry);
    return index;
  }
};

std::vector<std::byte> encode_index(const HnswIndex& index) { return IndexFileCodec::encode(index); }

HnswIndex decode_index(std::span<const std::byte> bytes, const VectorMemory& memory) {
  return IndexFileCodec::decode(bytes, memory);
}

void save_index(const HnswIndex& index, const std::string& path) { util::write_file(path, encode_index(index)); }

HnswIndex load_index(const std::string& path, const VectorMemory& memory) {
  return decode_index(util::read_file(path), memory);
}

}  // namespace echo
