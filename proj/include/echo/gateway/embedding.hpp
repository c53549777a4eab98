#pragma once

#include <chrono>
#include <map>
#include <string>

#include "echo/memory/embedding.hpp"
#include "echo/memory/vector_memory.hpp"

namespace echo {

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual Embedding embed_image(const std::string& path) = 0;
  virtual Embedding embed_text(const std::string& text) = 0;
};

// Offline stand-in for the frozen encoder: exact-key lookup of vectors that
// were computed ahead of time. Image keys are source URIs, text keys the text itself.
class PrecomputedEmbeddings final : public EmbeddingBackend {
 public:
  explicit PrecomputedEmbeddings(std::size_t dim) : dim_(dim) {}

  static PrecomputedEmbeddings from_memory(const VectorMemory& memory);

  void add(Modality modality, std::string key, Embedding embedding);

  Embedding embed_image(const std::string& path) override;  // throws kUnknownSource
  Embedding embed_text(const std::string& text) override;   // throws kUnknownSource

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return images_.size() + texts_.size(); }

 private:
  std::size_t dim_;
  std::map<std::string, Embedding> images_;
  std::map<std::string, Embedding> texts_;
};

// Reads either an ECHOMEM memory file or an exporter manifest. Vectors are kept
// exactly as stored. Throws kDimensionMismatch when expected_dim is given and differs.
PrecomputedEmbeddings load_precomputed_embeddings(const std::string& path,
                                                  std::optional<std::size_t> expected_dim = std::nullopt);

struct HttpEmbeddingConfig {
  std::string endpoint;
  std::string model;
  std::string api_key;
  std::size_t dim = VectorMemory::kDefaultDim;
  std::chrono::milliseconds timeout{30000};
  int retries = 2;
};

// POSTs {"model", "modality": "image"|"text", "input": text or base64 image}
// and reads {"data": [{"embedding": [...]}]}.
class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HttpEmbeddingBackend(HttpEmbeddingConfig config) : config_(std::move(config)) {}
  Embedding embed_image(const std::string& path) override;
  Embedding embed_text(const std::string& text) override;

 private:
  Embedding request(std::string_view modality, const std::string& payload);
  HttpEmbeddingConfig config_;
};

}  // namespace echo
