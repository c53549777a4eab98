#include <fstream>
#include <sstream>

#include "json.hpp"

#include "echo/gateway/chat.hpp"
#include "echo/gateway/embedding.hpp"
#include "echo/memory/manifest.hpp"
#include "echo/util/codec.hpp"
#include "http_transport.hpp"

namespace echo {

PrecomputedEmbeddings PrecomputedEmbeddings::from_memory(const VectorMemory& memory) {
  PrecomputedEmbeddings store(memory.dim());
  for (std::size_t r = 0; r < memory.size(); ++r) {
    const EntryInfo& info = memory.info_at(r);
    const auto row = memory.row(r);
    store.add(info.modality, info.source_uri, Embedding(std::vector<float>(row.begin(), row.end())));
  }
  return store;
}

void PrecomputedEmbeddings::add(Modality modality, std::string key, Embedding embedding) {
  if (embedding.dim() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch,
                key + ": dim " + std::to_string(embedding.dim()) + " vs store dim " + std::to_string(dim_));
  }
  auto& map = modality == Modality::kImage ? images_ : texts_;
  map.insert_or_assign(std::move(key), std::move(embedding));
}

Embedding PrecomputedEmbeddings::embed_image(const std::string& path) {
  auto it = images_.find(path);
  if (it == images_.end()) throw Error(ErrorCode::kUnknownSource, "no precomputed embedding for image '" + path + "'");
  return it->second;
}

Embedding PrecomputedEmbeddings::embed_text(const std::string& text) {
  auto it = texts_.find(text);
  if (it == texts_.end()) throw Error(ErrorCode::kUnknownSource, "no precomputed embedding for text '" + text + "'");
  return it->second;
}

PrecomputedEmbeddings load_precomputed_embeddings(const std::string& path, std::optional<std::size_t> expected_dim) {
  if (is_memory_file(path)) {
    MemoryLoadOptions options;
    options.expected_dim = expected_dim;
    return PrecomputedEmbeddings::from_memory(load_memory(path, options));
  }
  const Manifest manifest = load_manifest(path);
  if (expected_dim && manifest.dim != *expected_dim) {
    throw Error(ErrorCode::kDimensionMismatch, path + ": manifest dim " + std::to_string(manifest.dim) +
                                                   " vs configured dim " + std::to_string(*expected_dim));
  }
  PrecomputedEmbeddings store(manifest.dim);
  for (const ManifestRow& row : manifest.rows) store.add(row.modality, row.source_uri, row.vector);
  return store;
}

Embedding HttpEmbeddingBackend::embed_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingImage, path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return request("image", util::base64_encode(buf.str()));
}

Embedding HttpEmbeddingBackend::embed_text(const std::string& text) { return request("text", text); }

Embedding HttpEmbeddingBackend::request(std::string_view modality, const std::string& payload) {
  using nlohmann::json;
  json body;
  body["model"] = config_.model;
  body["modality"] = modality;
  body["input"] = payload;
  const std::string reply =
      detail::post_json(parse_endpoint(config_.endpoint), body.dump(), {config_.api_key, config_.timeout, config_.retries});

  std::vector<float> values;
  try {
    const json doc = json::parse(reply);
    const json& v = doc.at("data").at(0).at("embedding");
    values = v.get<std::vector<float>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse, e.what());
  }
  if (values.size() != config_.dim) {
    throw Error(ErrorCode::kDimensionMismatch, "embedding service returned dim " + std::to_string(values.size()) +
                                                   ", configured " + std::to_string(config_.dim));
  }
  try {
    return Embedding(std::move(values));
  } catch (const Error& e) {
    throw Error(ErrorCode::kMalformedResponse, e.what());
  }
}

}  // namespace echo
