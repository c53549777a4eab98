#include "echo/index/hnsw.hpp"

#include <algorithm>
#include <queue>

#include "echo/error.hpp"

namespace echo {

HnswParams HnswParams::for_m(std::size_t m) {
  HnswParams p;
  p.m = m;
  p.m0 = 2 * m;
  p.level_multiplier = 1.0 / std::log(double(m));
  return p;
}

void HnswParams::validate() const {
  if (m < 2) throw Error(ErrorCode::kInvalidArgument, "hnsw m must be >= 2");
  if (m0 < 1) throw Error(ErrorCode::kInvalidArgument, "hnsw m0 must be >= 1");
  if (ef_construction < m) throw Error(ErrorCode::kInvalidArgument, "hnsw ef_construction must be >= m");
  if (ef_search < 1) throw Error(ErrorCode::kInvalidArgument, "hnsw ef_search must be >= 1");
  if (!(level_multiplier > 0.0) || !std::isfinite(level_multiplier)) {
    throw Error(ErrorCode::kInvalidArgument, "hnsw level_multiplier must be positive");
  }
}

namespace {

// Epoch-stamped visited marks, one per thread so concurrent searches never share state.
class VisitedSet {
 public:
  void reset(std::size_t n) {
    if (marks_.size() < n) marks_.resize(n, 0);
    if (++epoch_ == 0) {
      std::fill(marks_.begin(), marks_.end(), 0);
      epoch_ = 1;
    }
  }
  // True when node was not yet visited in this epoch.
  bool visit(std::uint32_t node) {
    if (marks_[node] == epoch_) return false;
    marks_[node] = epoch_;
    return true;
  }

 private:
  std::vector<std::uint32_t> marks_;
  std::uint32_t epoch_ = 0;
};

thread_local VisitedSet t_visited;

constexpr int kMaxLevel = 48;

}  // namespace

HnswIndex::HnswIndex(const VectorMemory& memory, HnswParams params)
    : memory_(&memory), params_(params), rng_(params.rng_seed) {
  params_.validate();
}

HnswIndex HnswIndex::build(const VectorMemory& memory, HnswParams params) {
  if (memory.empty()) throw Error(ErrorCode::kEmptyMemory, "cannot build an index over an empty memory");
  HnswIndex index(memory, params);
  index.nodes_.reserve(memory.size());
  for (const EntryInfo& info : memory.infos()) index.insert(info.id);
  return index;
}

int HnswIndex::draw_level() {
  // u in (0, 1]; 53 random mantissa bits taken directly from the engine so the
  // draw does not depend on the standard library's distribution implementation.
  const double u = double((rng_() >> 11) + 1) * 0x1.0p-53;
  ++rng_draws_;
  const double level = std::floor(-std::log(u) * params_.level_multiplier);
  return static_cast<int>(std::min<double>(level, kMaxLevel));
}

HnswIndex::Candidate HnswIndex::make_candidate(const PreparedQuery& query, std::uint32_t node) const {
  const Node& n = nodes_[node];
  return {memory_->score_row(query, n.row), n.id, node};
}

namespace {

// Strict "a ranks ahead of b": higher score, then lower id.
template <typename C>
bool better(const C& a, const C& b) {
  return a.score != b.score ? a.score > b.score : a.id < b.id;
}

}  // namespace

std::vector<HnswIndex::Candidate> HnswIndex::search_layer(const PreparedQuery& query,
                                                          const std::vector<Candidate>& entry_points,
                                                          std::size_t ef, int layer) const {
  auto best_first = [](const Candidate& a, const Candidate& b) { return better(b, a); };  // max-heap on rank
  auto worst_first = [](const Candidate& a, const Candidate& b) { return better(a, b); };
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(best_first)> frontier(best_first);
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(worst_first)> results(worst_first);

  VisitedSet& visited = t_visited;
  visited.reset(nodes_.size());
  for (const Candidate& ep : entry_points) {
    if (!visited.visit(ep.node)) continue;
    frontier.push(ep);
    results.push(ep);
    if (results.size() > ef) results.pop();
  }

  while (!frontier.empty()) {
    const Candidate current = frontier.top();
    if (results.size() >= ef && better(results.top(), current)) break;
    frontier.pop();
    const Node& node = nodes_[current.node];
    if (layer > node.level) continue;
    for (std::uint32_t next : node.links[layer]) {
      if (!visited.visit(next)) continue;
      const Candidate c = make_candidate(query, next);
      if (results.size() < ef || better(c, results.top())) {
        frontier.push(c);
        results.push(c);
        if (results.size() > ef) results.pop();
      }
    }
  }

  std::vector<Candidate> out;
  out.reserve(results.size());
  while (!results.empty()) {
    out.push_back(results.top());
    results.pop();
  }
  std::reverse(out.begin(), out.end());  // best first
  return out;
}

HnswIndex::Candidate HnswIndex::greedy_descend(const PreparedQuery& query, Candidate start, int from_layer,
                                               int to_layer) const {
  Candidate current = start;
  for (int layer = from_layer; layer > to_layer; --layer) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (std::uint32_t next : nodes_[current.node].links[layer]) {
        const Candidate c = make_candidate(query, next);
        if (better(c, current)) {
          current = c;
          moved = true;
        }
      }
    }
  }
  return current;
}

void HnswIndex::insert(EntryId id) {
  const auto row = memory_->row_of(id);
  if (!row) throw Error(ErrorCode::kUnknownEntry, "id " + std::to_string(id) + " is not in the backing memory");
  if (contains(id)) throw Error(ErrorCode::kAlreadyIndexed, "id " + std::to_string(id));

  const int level = draw_level();
  const auto ordinal = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(Node{id, static_cast<std::uint32_t>(*row), level, {}});
  nodes_.back().links.resize(static_cast<std::size_t>(level) + 1);
  node_by_id_.emplace(id, ordinal);

  if (ordinal == 0) {
    entry_ = 0;
    max_level_ = level;
    return;
  }

  const PreparedQuery query = memory_->prepare_row(*row);
  Candidate current = greedy_descend(query, make_candidate(query, entry_), max_level_, level);
  std::vector<Candidate> entry_points{current};
  for (int layer = std::min(level, max_level_); layer >= 0; --layer) {
    std::vector<Candidate> beam = search_layer(query, entry_points, params_.ef_construction, layer);
    // Layer 0 admits m0 links, so a new node takes up to m0 there rather than m.
    const std::size_t take = std::min(cap(layer), beam.size());
    for (std::size_t i = 0; i < take; ++i) link(ordinal, beam[i].node, layer);
    entry_points = std::move(beam);
  }

  if (level > max_level_) {
    max_level_ = level;
    entry_ = ordinal;
  }
}

void HnswIndex::link(std::uint32_t a, std::uint32_t b, int layer) {
  nodes_[a].links[layer].push_back(b);
  nodes_[b].links[layer].push_back(a);
  if (nodes_[b].links[layer].size() > cap(layer)) prune(b, layer);
  if (nodes_[a].links[layer].size() > cap(layer)) prune(a, layer);
}

void HnswIndex::unlink(std::uint32_t a, std::uint32_t b, int layer) {
  auto drop = [layer, this](std::uint32_t from, std::uint32_t target) {
    auto& links = nodes_[from].links[layer];
    links.erase(std::find(links.begin(), links.end(), target));
  };
  drop(a, b);
  drop(b, a);
}

// Keeps the nearest cap(layer) links of node. The dropped edge goes to the
// farthest neighbor that keeps at least one other link on this layer, so
// pruning never strands a node; only when every neighbor hangs on this one
// link does the plain farthest neighbor go.
void HnswIndex::prune(std::uint32_t node, int layer) {
  const PreparedQuery query = memory_->prepare_row(nodes_[node].row);
  while (nodes_[node].links[layer].size() > cap(layer)) {
    std::vector<Candidate> scored;
    for (std::uint32_t n : nodes_[node].links[layer]) scored.push_back(make_candidate(query, n));
    std::sort(scored.begin(), scored.end(), [](const Candidate& a, const Candidate& b) { return better(b, a); });
    std::uint32_t victim = scored.front().node;
    for (const Candidate& c : scored) {
      if (nodes_[c.node].links[layer].size() >= 2) {
        victim = c.node;
        break;
      }
    }
    unlink(node, victim, layer);
  }
}

std::vector<ScoredId> HnswIndex::search(const Embedding& query, std::size_t k, std::optional<std::size_t> ef,
                                        const EntryFilter& filter) const {
  if (nodes_.empty()) throw Error(ErrorCode::kEmptyIndex, "search on an empty index");
  const PreparedQuery prepared = memory_->prepare(query);
  if (k == 0) return {};
  const std::size_t width = std::max(ef.value_or(params_.ef_search), k);

  const Candidate start = greedy_descend(prepared, make_candidate(prepared, entry_), max_level_, 0);
  const std::vector<Candidate> beam = search_layer(prepared, {start}, width, 0);

  std::vector<ScoredId> out;
  out.reserve(beam.size());
  for (const Candidate& c : beam) {
    if (filter && !filter(memory_->info_at(nodes_[c.node].row))) continue;
    out.push_back({c.id, c.score});
  }
  std::sort(out.begin(), out.end(), ranks_before);
  if (out.size() > k) out.resize(k);
  return out;
}

std::optional<EntryId> HnswIndex::entry_point() const {
  if (nodes_.empty()) return std::nullopt;
  return nodes_[entry_].id;
}

int HnswIndex::level(EntryId id) const {
  auto it = node_by_id_.find(id);
  if (it == node_by_id_.end()) throw Error(ErrorCode::kUnknownEntry, "id " + std::to_string(id) + " is not indexed");
  return nodes_[it->second].level;
}

std::vector<EntryId> HnswIndex::neighbors(EntryId id, int layer) const {
  auto it = node_by_id_.find(id);
  if (it == node_by_id_.end()) throw Error(ErrorCode::kUnknownEntry, "id " + std::to_string(id) + " is not indexed");
  const Node& node = nodes_[it->second];
  if (layer < 0 || layer > node.level) return {};
  std::vector<EntryId> out;
  out.reserve(node.links[layer].size());
  for (std::uint32_t n : node.links[layer]) out.push_back(nodes_[n].id);
  return out;
}

std::vector<EntryId> HnswIndex::ids() const {
  std::vector<EntryId> out;
  out.reserve(nodes_.size());
  for (const Node& n : nodes_) out.push_back(n.id);
  return out;
}

bool operator==(const HnswIndex& a, const HnswIndex& b) {
  if (!(a.params_ == b.params_) || a.entry_ != b.entry_ || a.max_level_ != b.max_level_ ||
      a.nodes_.size() != b.nodes_.size() || a.rng_draws_ != b.rng_draws_) {
    return false;
  }
  for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
    const auto& x = a.nodes_[i];
    const auto& y = b.nodes_[i];
    if (x.id != y.id || x.row != y.row || x.level != y.level || x.links != y.links) return false;
  }
  return true;
}

}  // namespace echo
