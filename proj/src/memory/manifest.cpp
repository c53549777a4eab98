#include "echo/memory/manifest.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "echo/error.hpp"
#include "echo/util/binary_io.hpp"
#include "echo/util/codec.hpp"

namespace echo {

namespace {

using nlohmann::json;

std::string read_text(const std::string& path) {
  const auto bytes = util::read_file(path);
  return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

const json& require(const json& object, const char* key) {
  auto it = object.find(key);
  if (it == object.end()) throw Error(ErrorCode::kParseError, std::string("missing field '") + key + "'");
  return *it;
}

std::string require_string(const json& object, const char* key) {
  const json& v = require(object, key);
  if (!v.is_string()) throw Error(ErrorCode::kParseError, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

ManifestRow parse_row(const json& row, std::size_t dim, bool inline_vectors) {
  if (!row.is_object()) throw Error(ErrorCode::kParseError, "row is not an object");
  ManifestRow out;
  out.source_uri = require_string(row, "source_uri");
  out.class_name = require_string(row, "class_name");
  if (out.class_name.empty()) throw Error(ErrorCode::kParseError, "class_name must be non-empty");
  out.modality = row.contains("modality") ? parse_modality(require_string(row, "modality")) : Modality::kImage;
  out.label = row.contains("label") ? parse_label(require_string(row, "label")) : Label::kUnknown;
  if (auto it = row.find("meta"); it != row.end()) {
    if (!it->is_object()) throw Error(ErrorCode::kParseError, "meta must be an object");
    for (const auto& [k, v] : it->items()) out.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
  }
  if (inline_vectors) {
    const json& v = require(row, "vector");
    if (!v.is_array()) throw Error(ErrorCode::kParseError, "vector must be an array");
    if (v.size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "vector has " + std::to_string(v.size()) + " values, manifest dim is " + std::to_string(dim));
    }
    std::vector<float> values;
    values.reserve(dim);
    for (const json& x : v) {
      if (!x.is_number()) throw Error(ErrorCode::kParseError, "vector values must be numbers");
      values.push_back(x.get<float>());
    }
    out.vector = Embedding(std::move(values));
  }
  return out;
}

}  // namespace

Manifest load_manifest(const std::string& path) {
  const std::string text = read_text(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, path + ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::kParseError, path + ": manifest must be a JSON object");
  if (doc.value("version", kManifestVersion) != kManifestVersion) {
    throw Error(ErrorCode::kFormatVersionMismatch, path + ": unsupported manifest version");
  }

  Manifest out;
  out.encoder_name = doc.value("encoder_name", std::string{});
  const json& dim = require(doc, "dim");
  if (!dim.is_number_unsigned() || dim.get<std::size_t>() == 0) {
    throw Error(ErrorCode::kParseError, path + ": dim must be a positive integer");
  }
  out.dim = dim.get<std::size_t>();

  const json& rows = require(doc, "rows");
  if (!rows.is_array()) throw Error(ErrorCode::kParseError, path + ": rows must be an array");
  if (rows.empty()) throw Error(ErrorCode::kParseError, "empty manifest");

  const bool inline_vectors = !doc.contains("vector_file");
  out.rows.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    try {
      out.rows.push_back(parse_row(rows[i], out.dim, inline_vectors));
    } catch (const Error& e) {
      throw Error(e.code(), "row " + std::to_string(i + 1) + ": " + std::string(e.message()));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParseError, "row " + std::to_string(i + 1) + ": " + e.what());
    }
  }

  if (!inline_vectors) {
    const auto blob_path = std::filesystem::path(path).parent_path() / require_string(doc, "vector_file");
    const auto blob = util::read_file(blob_path.string());
    const std::size_t section = out.rows.size() * out.dim * sizeof(float);
    if (blob.size() != section + 4) {
      throw Error(ErrorCode::kCorruptFile, blob_path.string() + ": expected " + std::to_string(section + 4) +
                                               " bytes, found " + std::to_string(blob.size()));
    }
    std::uint32_t stored;
    std::memcpy(&stored, blob.data() + section, 4);
    if (util::crc32(std::span(blob).first(section)) != stored) {
      throw Error(ErrorCode::kCorruptFile, blob_path.string() + ": vector checksum mismatch");
    }
    for (std::size_t i = 0; i < out.rows.size(); ++i) {
      std::vector<float> values(out.dim);
      std::memcpy(values.data(), blob.data() + i * out.dim * sizeof(float), out.dim * sizeof(float));
      try {
        out.rows[i].vector = Embedding(std::move(values));
      } catch (const Error& e) {
        throw Error(e.code(), "row " + std::to_string(i + 1) + ": " + std::string(e.message()));
      }
    }
  }
  return out;
}

void save_manifest(const Manifest& manifest, const std::string& path, const std::string& blob_name) {
  nlohmann::ordered_json doc;
  doc["format"] = "echo-manifest";
  doc["version"] = kManifestVersion;
  doc["encoder_name"] = manifest.encoder_name;
  doc["dim"] = manifest.dim;
  if (!blob_name.empty()) doc["vector_file"] = blob_name;
  doc["rows"] = nlohmann::ordered_json::array();
  util::ByteWriter blob;
  for (const ManifestRow& row : manifest.rows) {
    if (row.vector.dim() != manifest.dim) throw Error(ErrorCode::kDimensionMismatch, row.source_uri);
    nlohmann::ordered_json r;
    r["source_uri"] = row.source_uri;
    r["class_name"] = row.class_name;
    r["modality"] = to_string(row.modality);
    r["label"] = to_string(row.label);
    r["meta"] = row.meta;
    if (blob_name.empty()) {
      r["vector"] = row.vector.values();
    } else {
      blob.put_bytes(std::as_bytes(row.vector.values()));
    }
    doc["rows"].push_back(std::move(r));
  }
  if (!blob_name.empty()) {
    blob.put<std::uint32_t>(util::crc32(blob.bytes()));
    util::write_file((std::filesystem::path(path).parent_path() / blob_name).string(), blob.bytes());
  }
  const std::string text = doc.dump(1) + "\n";
  util::write_file(path, std::as_bytes(std::span(text.data(), text.size())));
}

VectorMemory memory_from_manifest(const Manifest& manifest, bool normalized) {
  VectorMemory memory(manifest.dim, normalized);
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    const ManifestRow& row = manifest.rows[i];
    MemoryEntry entry;
    entry.id = i;
    entry.class_name = row.class_name;
    entry.modality = row.modality;
    entry.label = row.label;
    entry.source_uri = row.source_uri;
    entry.meta = row.meta;
    entry.embedding = row.vector;
    try {
      memory.insert(std::move(entry));
    } catch (const Error& e) {
      throw Error(e.code(), "row " + std::to_string(i + 1) + ": " + std::string(e.message()));
    }
  }
  return memory;
}

bool is_memory_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  return in.gcount() == 8 && std::memcmp(magic, "ECHOMEM\0", 8) == 0;
}

}  // namespace echo
