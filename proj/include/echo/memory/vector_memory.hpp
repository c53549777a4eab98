#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "echo/memory/embedding.hpp"

namespace echo {

using EntryId = std::uint64_t;

enum class Modality { kImage, kText };
enum class Label { kNormal, kAnomalous, kUnknown };

std::string_view to_string(Modality m);
std::string_view to_string(Label l);
Modality parse_modality(std::string_view text);  // throws kParseError
Label parse_label(std::string_view text);        // throws kParseError

// Everything stored about an entry except its vector.
struct EntryInfo {
  EntryId id = 0;
  std::string class_name;
  Modality modality = Modality::kImage;
  Label label = Label::kUnknown;
  std::string source_uri;
  std::map<std::string, std::string> meta;

  friend bool operator==(const EntryInfo&, const EntryInfo&) = default;
};

struct MemoryEntry : EntryInfo {
  Embedding embedding;

  friend bool operator==(const MemoryEntry&, const MemoryEntry&) = default;
};

struct ScoredId {
  EntryId id = 0;
  double score = 0.0;

  friend bool operator==(const ScoredId&, const ScoredId&) = default;
};

// Descending score, ascending id on ties. Every ranked list in the library uses this order.
inline bool ranks_before(const ScoredId& a, const ScoredId& b) {
  return a.score != b.score ? a.score > b.score : a.id < b.id;
}

using EntryFilter = std::function<bool(const EntryInfo&)>;

// A query vector prepared for scoring against one memory's stored rows.
struct PreparedQuery {
  std::vector<float> values;
  double inv_norm = 1.0;  // 1 / |query| when the memory is not normalized
};

// Memory M: embeddings with class/modality/label metadata in one contiguous
// row-major float buffer. Rows are append-only, so a row index stays valid for
// the life of the memory.
class VectorMemory {
 public:
  static constexpr std::size_t kDefaultDim = 512;

  explicit VectorMemory(std::size_t dim = kDefaultDim, bool normalized = true);

  // Stores entry under entry.id. In a normalized memory the stored vector is the
  // unit-length copy of the input.
  EntryId insert(MemoryEntry entry);
  // Smallest id strictly greater than every stored id (0 when empty).
  EntryId next_id() const { return next_id_; }

  std::size_t dim() const { return dim_; }
  bool normalized() const { return normalized_; }
  std::size_t size() const { return infos_.size(); }
  bool empty() const { return infos_.empty(); }

  bool contains(EntryId id) const { return row_by_id_.contains(id); }
  std::optional<std::size_t> row_of(EntryId id) const;
  const EntryInfo& info(EntryId id) const;  // throws kUnknownEntry
  MemoryEntry entry(EntryId id) const;      // throws kUnknownEntry

  const EntryInfo& info_at(std::size_t row) const { return infos_[row]; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }
  std::span<const EntryInfo> infos() const { return infos_; }

  // Row indices in ascending id order.
  std::vector<std::size_t> rows_by_id() const;

  PreparedQuery prepare(const Embedding& query) const;
  // Prepared form of a stored row, used when the row itself is the query.
  PreparedQuery prepare_row(std::size_t row) const;
  double score_row(const PreparedQuery& query, std::size_t row) const;

  // Exact cosine top-k over entries passing filter (all entries when filter is empty).
  std::vector<ScoredId> brute_force_top_k(const Embedding& query, std::size_t k,
                                          const EntryFilter& filter = {}) const;

  // CRC-32 of the vector section as written to disk (rows in id order).
  std::uint32_t vector_crc() const;

  // Entry-for-entry equality in id order, comparing vectors bitwise.
  friend bool operator==(const VectorMemory& a, const VectorMemory& b);

 private:
  friend class MemoryFileCodec;
  void append_row(EntryInfo info, std::span<const float> stored);

  std::size_t dim_;
  bool normalized_;
  std::vector<EntryInfo> infos_;
  std::vector<float> data_;
  std::vector<float> norms_;  // per-row L2 norm; all 1 in a normalized memory
  std::unordered_map<EntryId, std::size_t> row_by_id_;
  EntryId next_id_ = 0;
};

inline constexpr std::uint32_t kMemoryFormatVersion = 1;

struct MemoryLoadOptions {
  // Reject any file whose version differs from this one.
  std::optional<std::uint32_t> required_version;
  // Reject files whose dim differs (kDimensionMismatch).
  std::optional<std::size_t> expected_dim;
};

std::vector<std::byte> encode_memory(const VectorMemory& memory);
VectorMemory decode_memory(std::span<const std::byte> bytes, const MemoryLoadOptions& options = {});

void save_memory(const VectorMemory& memory, const std::string& path);
VectorMemory load_memory(const std::string& path, const MemoryLoadOptions& options = {});

}  // namespace echo
