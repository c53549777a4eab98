#pragma once

// Exporter manifest: a JSON document describing rows, plus an optional binary
// vector blob laid out exactly like the ECHOMEM vector section (row-major
// little-endian f32, then a CRC-32 of those bytes). Rows without a blob carry
// their vector inline as a JSON array.
//
//   {"format": "echo-manifest", "version": 1, "encoder_name": "...", "dim": 512,
//    "vector_file": "vectors.f32",            // optional, relative to the manifest
//    "rows": [{"source_uri": "img/001.png", "class_name": "bottle",
//              "modality": "image", "label": "normal", "meta": {},
//              "vector": [...]}]}              // "vector" only without vector_file

#include <map>
#include <string>
#include <vector>

#include "echo/memory/embedding.hpp"
#include "echo/memory/vector_memory.hpp"

namespace echo {

struct ManifestRow {
  std::string source_uri;
  std::string class_name;
  Modality modality = Modality::kImage;
  Label label = Label::kUnknown;
  std::map<std::string, std::string> meta;
  Embedding vector;
};

struct Manifest {
  std::string encoder_name;
  std::size_t dim = 0;
  std::vector<ManifestRow> rows;
};

inline constexpr int kManifestVersion = 1;

// Throws kParseError ("row N: ..." with N 1-based, or "empty manifest"),
// kDimensionMismatch, kCorruptFile for a bad blob, kIoError.
Manifest load_manifest(const std::string& path);

// Writes the manifest; with blob_name set the vectors go to that sibling file.
void save_manifest(const Manifest& manifest, const std::string& path, const std::string& blob_name = {});

// Rows become entries with ids 0..n-1 in manifest order.
VectorMemory memory_from_manifest(const Manifest& manifest, bool normalized = true);

// True when the file starts with the ECHOMEM magic.
bool is_memory_file(const std::string& path);

}  // namespace echo
