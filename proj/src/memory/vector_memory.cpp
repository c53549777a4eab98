#include "echo/memory/vector_memory.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "echo/error.hpp"
#include "echo/simd/kernels.hpp"
#include "echo/util/codec.hpp"

namespace echo {

std::string_view to_string(Modality m) { return m == Modality::kImage ? "image" : "text"; }

std::string_view to_string(Label l) {
  switch (l) {
    case Label::kNormal: return "normal";
    case Label::kAnomalous: return "anomalous";
    case Label::kUnknown: return "unknown";
  }
  return "unknown";
}

Modality parse_modality(std::string_view text) {
  if (text == "image") return Modality::kImage;
  if (text == "text") return Modality::kText;
  throw Error(ErrorCode::kParseError, "unknown modality '" + std::string(text) + "'");
}

Label parse_label(std::string_view text) {
  if (text == "normal") return Label::kNormal;
  if (text == "anomalous") return Label::kAnomalous;
  if (text == "unknown") return Label::kUnknown;
  throw Error(ErrorCode::kParseError, "unknown label '" + std::string(text) + "'");
}

VectorMemory::VectorMemory(std::size_t dim, bool normalized) : dim_(dim), normalized_(normalized) {
  if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "memory dim must be positive");
}

EntryId VectorMemory::insert(MemoryEntry entry) {
  if (entry.embedding.dim() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch, "entry dim " + std::to_string(entry.embedding.dim()) +
                                                   " vs memory dim " + std::to_string(dim_));
  }
  if (contains(entry.id)) throw Error(ErrorCode::kDuplicateId, "id " + std::to_string(entry.id));
  if (entry.class_name.empty()) throw Error(ErrorCode::kInvalidArgument, "class_name must be non-empty");
  const double norm = entry.embedding.norm();
  if (norm == 0.0) throw Error(ErrorCode::kZeroNormVector, "id " + std::to_string(entry.id));

  const EntryId id = entry.id;
  // Vectors already unit-length to float precision are stored untouched, so
  // exporter output keeps its exact bits through ingestion.
  if (normalized_ && std::fabs(norm - 1.0) > 1e-7) {
    const Embedding unit = entry.embedding.normalized();
    append_row(std::move(entry), unit.values());
  } else {
    const Embedding raw = std::move(entry.embedding);
    append_row(std::move(entry), raw.values());
  }
  return id;
}

void VectorMemory::append_row(EntryInfo info, std::span<const float> stored) {
  double sum = 0.0;
  for (float v : stored) sum += double(v) * double(v);
  norms_.push_back(normalized_ ? 1.0f : static_cast<float>(std::sqrt(sum)));
  data_.insert(data_.end(), stored.begin(), stored.end());
  row_by_id_.emplace(info.id, infos_.size());
  next_id_ = std::max(next_id_, info.id + 1);
  infos_.push_back(std::move(info));
}

std::optional<std::size_t> VectorMemory::row_of(EntryId id) const {
  auto it = row_by_id_.find(id);
  if (it == row_by_id_.end()) return std::nullopt;
  return it->second;
}

const EntryInfo& VectorMemory::info(EntryId id) const {
  auto row = row_of(id);
  if (!row) throw Error(ErrorCode::kUnknownEntry, "id " + std::to_string(id));
  return infos_[*row];
}

MemoryEntry VectorMemory::entry(EntryId id) const {
  auto r = row_of(id);
  if (!r) throw Error(ErrorCode::kUnknownEntry, "id " + std::to_string(id));
  MemoryEntry out;
  static_cast<EntryInfo&>(out) = infos_[*r];
  const auto values = row(*r);
  out.embedding = Embedding(std::vector<float>(values.begin(), values.end()));
  return out;
}

std::vector<std::size_t> VectorMemory::rows_by_id() const {
  std::vector<std::size_t> rows(infos_.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) { return infos_[a].id < infos_[b].id; });
  return rows;
}

PreparedQuery VectorMemory::prepare(const Embedding& query) const {
  if (query.dim() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "query dim " + std::to_string(query.dim()) + " vs memory dim " + std::to_string(dim_));
  }
  PreparedQuery out;
  if (normalized_) {
    const Embedding unit = query.normalized();
    out.values.assign(unit.values().begin(), unit.values().end());
  } else {
    const double n = query.norm();
    if (n == 0.0) throw Error(ErrorCode::kZeroNormVector, "query has zero norm");
    out.values.assign(query.values().begin(), query.values().end());
    out.inv_norm = 1.0 / n;
  }
  return out;
}

PreparedQuery VectorMemory::prepare_row(std::size_t r) const {
  PreparedQuery out;
  const auto values = row(r);
  out.values.assign(values.begin(), values.end());
  if (!normalized_) out.inv_norm = 1.0 / double(norms_[r]);
  return out;
}

double VectorMemory::score_row(const PreparedQuery& query, std::size_t r) const {
  const float d = simd::active().dot(query.values.data(), data_.data() + r * dim_, dim_);
  if (normalized_) return d;
  return double(d) * query.inv_norm / double(norms_[r]);
}

std::vector<ScoredId> VectorMemory::brute_force_top_k(const Embedding& query, std::size_t k,
                                                      const EntryFilter& filter) const {
  const PreparedQuery prepared = prepare(query);
  if (k == 0 || infos_.empty()) return {};

  std::vector<float> dots(infos_.size());
  simd::active().dot_rows(prepared.values.data(), data_.data(), infos_.size(), dim_, dots.data());

  std::vector<ScoredId> pool;
  pool.reserve(infos_.size());
  for (std::size_t r = 0; r < infos_.size(); ++r) {
    if (filter && !filter(infos_[r])) continue;
    const double score = normalized_ ? double(dots[r]) : double(dots[r]) * prepared.inv_norm / double(norms_[r]);
    pool.push_back({infos_[r].id, score});
  }
  const std::size_t take = std::min(k, pool.size());
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take), pool.end(), ranks_before);
  pool.resize(take);
  return pool;
}

std::uint32_t VectorMemory::vector_crc() const {
  std::uint32_t crc = 0;
  for (std::size_t r : rows_by_id()) crc = util::crc32(std::as_bytes(row(r)), crc);
  return crc;
}

bool operator==(const VectorMemory& a, const VectorMemory& b) {
  if (a.dim_ != b.dim_ || a.normalized_ != b.normalized_ || a.size() != b.size()) return false;
  const auto rows_a = a.rows_by_id();
  const auto rows_b = b.rows_by_id();
  for (std::size_t i = 0; i < rows_a.size(); ++i) {
    if (!(a.infos_[rows_a[i]] == b.infos_[rows_b[i]])) return false;
    const auto va = a.row(rows_a[i]);
    const auto vb = b.row(rows_b[i]);
    if (std::memcmp(va.data(), vb.data(), va.size_bytes()) != 0) return false;
  }
  return true;
}

}  // namespace echo
