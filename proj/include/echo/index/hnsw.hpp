#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "echo/memory/vector_memory.hpp"

namespace echo {

struct HnswParams {
  std::size_t m = 16;                // link cap on layers > 0, and links chosen per insert
  std::size_t m0 = 32;               // link cap on layer 0
  std::size_t ef_construction = 200;
  std::size_t ef_search = 100;
  double level_multiplier = 1.0 / std::log(16.0);
  std::uint64_t rng_seed = 0x5eed;

  // m0 = 2m and level_multiplier = 1/ln(m), everything else default.
  static HnswParams for_m(std::size_t m);

  void validate() const;  // throws kInvalidArgument
  friend bool operator==(const HnswParams&, const HnswParams&) = default;
};

// Hierarchical navigable small-world graph over the rows of a VectorMemory.
// The index references vectors by row and never copies them, so the memory
// must outlive the index and must not be replaced while the index is in use.
//
// Links are kept symmetric on every layer: pruning an overfull list removes the
// edge from both endpoints.
class HnswIndex {
 public:
  explicit HnswIndex(const VectorMemory& memory, HnswParams params = {});

  // One node per memory entry, inserted in row order. Throws kEmptyMemory.
  static HnswIndex build(const VectorMemory& memory, HnswParams params = {});

  // Adds an entry that already lives in the backing memory.
  // Throws kUnknownEntry or kAlreadyIndexed.
  void insert(EntryId id);

  // Top-k by cosine with a beam of width max(ef, k) at layer 0. The filter is
  // applied to the final beam before truncation, so a selective filter can
  // return fewer than k results. ef defaults to params().ef_search.
  std::vector<ScoredId> search(const Embedding& query, std::size_t k, std::optional<std::size_t> ef = std::nullopt,
                               const EntryFilter& filter = {}) const;

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  bool contains(EntryId id) const { return node_by_id_.contains(id); }
  const HnswParams& params() const { return params_; }
  const VectorMemory& memory() const { return *memory_; }

  std::optional<EntryId> entry_point() const;
  int max_level() const { return max_level_; }
  int level(EntryId id) const;
  std::vector<EntryId> neighbors(EntryId id, int layer) const;
  // Entry ids in insertion order.
  std::vector<EntryId> ids() const;

  friend bool operator==(const HnswIndex& a, const HnswIndex& b);

 private:
  friend class IndexFileCodec;

  struct Node {
    EntryId id;
    std::uint32_t row;
    int level;
    std::vector<std::vector<std::uint32_t>> links;  // links[layer] holds node ordinals
  };

  struct Candidate {
    double score;
    EntryId id;
    std::uint32_t node;
  };

  int draw_level();
  std::vector<Candidate> search_layer(const PreparedQuery& query, const std::vector<Candidate>& entry_points,
                                      std::size_t ef, int layer) const;
  Candidate greedy_descend(const PreparedQuery& query, Candidate start, int from_layer, int to_layer) const;
  Candidate make_candidate(const PreparedQuery& query, std::uint32_t node) const;
  void link(std::uint32_t a, std::uint32_t b, int layer);
  void unlink(std::uint32_t a, std::uint32_t b, int layer);
  void prune(std::uint32_t node, int layer);
  std::size_t cap(int layer) const { return layer == 0 ? params_.m0 : params_.m; }

  const VectorMemory* memory_;
  HnswParams params_;
  std::mt19937_64 rng_;
  std::uint64_t rng_draws_ = 0;
  std::vector<Node> nodes_;
  std::unordered_map<EntryId, std::uint32_t> node_by_id_;
  std::uint32_t entry_ = 0;
  int max_level_ = -1;
};

inline constexpr std::uint32_t kIndexFormatVersion = 1;

// ECHOIDX sidecar. decode_index verifies its own checksum (kCorruptFile) and
// that the memory's vector CRC matches the one recorded at save time
// (kIndexMemoryMismatch).
std::vector<std::byte> encode_index(const HnswIndex& index);
HnswIndex decode_index(std::span<const std::byte> bytes, const VectorMemory& memory);

void save_index(const HnswIndex& index, const std::string& path);
HnswIndex load_index(const std::string& path, const VectorMemory& memory);

}  // namespace echo
