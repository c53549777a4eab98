// ECHOMEM file layout (all integers little-endian):
//
//   char[8]  "ECHOMEM\0"
//   u32      format version
//   u32      dim
//   u8       normalized flag
//   u64      entry count
//   u64      metadata section length in bytes
//   bytes    metadata: one JSON object per line, in id order
//   f32[]    vector section: count * dim IEEE-754 floats, in id order
//   u32      CRC-32 of the vector section

#include <cmath>
#include <cstring>

#include "json.hpp"

#include "echo/error.hpp"
#include "echo/memory/vector_memory.hpp"
#include "echo/util/binary_io.hpp"
#include "echo/util/codec.hpp"

namespace echo {

namespace {

constexpr char kMagic[8] = {'E', 'C', 'H', 'O', 'M', 'E', 'M', '\0'};

}  // namespace

class MemoryFileCodec {
 public:
  static std::vector<std::byte> encode(const VectorMemory& memory) {
    const auto rows = memory.rows_by_id();

    std::string metadata;
    for (std::size_t r : rows) {
      const EntryInfo& info = memory.info_at(r);
      nlohmann::ordered_json record;
      record["id"] = info.id;
      record["class_name"] = info.class_name;
      record["modality"] = to_string(info.modality);
      record["label"] = to_string(info.label);
      record["source_uri"] = info.source_uri;
      record["meta"] = info.meta;
      metadata += record.dump();
      metadata += '\n';
    }

    util::ByteWriter out;
    out.put_bytes(std::as_bytes(std::span(kMagic)));
    out.put<std::uint32_t>(kMemoryFormatVersion);
    out.put<std::uint32_t>(static_cast<std::uint32_t>(memory.dim()));
    out.put<std::uint8_t>(memory.normalized() ? 1 : 0);
    out.put<std::uint64_t>(memory.size());
    out.put<std::uint64_t>(metadata.size());
    out.put_raw(metadata);
    const std::size_t vectors_begin = out.size();
    for (std::size_t r : rows) out.put_bytes(std::as_bytes(memory.row(r)));
    const auto section = std::span(out.bytes()).subspan(vectors_begin);
    out.put<std::uint32_t>(util::crc32(section));
    return std::move(out.bytes());
  }

  static VectorMemory decode(std::span<const std::byte> bytes, const MemoryLoadOptions& options) {
    util::ByteReader in(bytes);
    if (in.remaining() < sizeof(kMagic) || std::memcmp(in.get_bytes(sizeof(kMagic)).data(), kMagic, sizeof(kMagic)) != 0) {
      throw Error(ErrorCode::kCorruptFile, "not an ECHOMEM file");
    }
    const auto version = in.get<std::uint32_t>();
    if (options.required_version && version != *options.required_version) {
      throw Error(ErrorCode::kFormatVersionMismatch, "file version " + std::to_string(version) +
                                                         ", reader requires " +
                                                         std::to_string(*options.required_version));
    }
    if (version != kMemoryFormatVersion) {
      throw Error(ErrorCode::kFormatVersionMismatch, "unsupported memory file version " + std::to_string(version));
    }
    const auto dim = in.get<std::uint32_t>();
    const auto normalized = in.get<std::uint8_t>();
    const auto count = in.get<std::uint64_t>();
    const auto metadata_len = in.get<std::uint64_t>();
    if (dim == 0 || normalized > 1) throw Error(ErrorCode::kCorruptFile, "invalid header");
    if (options.expected_dim && dim != *options.expected_dim) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "file dim " + std::to_string(dim) + ", expected " + std::to_string(*options.expected_dim));
    }
    if (metadata_len > in.remaining()) throw Error(ErrorCode::kCorruptFile, "metadata section truncated");
    const std::string metadata = in.get_string(metadata_len);

    const std::uint64_t vector_bytes = count * dim * sizeof(float);
    if (count != 0 && vector_bytes / count / dim != sizeof(float)) throw Error(ErrorCode::kCorruptFile, "entry count overflow");
    if (in.remaining() != vector_bytes + sizeof(std::uint32_t)) {
      throw Error(ErrorCode::kCorruptFile, "vector section size does not match header");
    }
    const auto section = in.get_bytes(vector_bytes);
    const auto stored_crc = in.get<std::uint32_t>();
    if (util::crc32(section) != stored_crc) throw Error(ErrorCode::kCorruptFile, "vector section checksum mismatch");

    VectorMemory memory(dim, normalized == 1);
    std::vector<float> row(dim);
    std::size_t line_begin = 0;
    for (std::uint64_t i = 0; i < count; ++i) {
      const std::size_t line_end = metadata.find('\n', line_begin);
      if (line_end == std::string::npos) throw Error(ErrorCode::kCorruptFile, "metadata has fewer records than entries");
      EntryInfo info;
      try {
        const auto record = nlohmann::json::parse(metadata.substr(line_begin, line_end - line_begin));
        info.id = record.at("id").get<EntryId>();
        info.class_name = record.at("class_name").get<std::string>();
        info.modality = parse_modality(record.at("modality").get<std::string>());
        info.label = parse_label(record.at("label").get<std::string>());
        info.source_uri = record.at("source_uri").get<std::string>();
        info.meta = record.at("meta").get<std::map<std::string, std::string>>();
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kCorruptFile, "metadata record " + std::to_string(i) + ": " + e.what());
      } catch (const Error& e) {
        throw Error(ErrorCode::kCorruptFile, "metadata record " + std::to_string(i) + ": " + e.what());
      }
      line_begin = line_end + 1;
      if (memory.contains(info.id)) throw Error(ErrorCode::kCorruptFile, "duplicate id " + std::to_string(info.id));
      if (info.class_name.empty()) throw Error(ErrorCode::kCorruptFile, "empty class_name");

      std::memcpy(row.data(), section.data() + i * dim * sizeof(float), dim * sizeof(float));
      for (float v : row) {
        if (!std::isfinite(v)) throw Error(ErrorCode::kCorruptFile, "non-finite coordinate in entry " + std::to_string(info.id));
      }
      memory.append_row(std::move(info), row);
    }
    if (line_begin != metadata.size()) throw Error(ErrorCode::kCorruptFile, "trailing metadata records");
    return memory;
  }
};

std::vector<std::byte> encode_memory(const VectorMemory& memory) { return MemoryFileCodec::encode(memory); }

VectorMemory decode_memory(std::span<const std::byte> bytes, const MemoryLoadOptions& options) {
  return MemoryFileCodec::decode(bytes, options);
}

void save_memory(const VectorMemory& memory, const std::string& path) {
  util::write_file(path, encode_memory(memory));
}

VectorMemory load_memory(const std::string& path, const MemoryLoadOptions& options) {
  return decode_memory(util::read_file(path), options);
}

}  // namespace echo
