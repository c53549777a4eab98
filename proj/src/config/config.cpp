#include "echo/config.hpp"

#include <charconv>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <sstream>

#include "echo/error.hpp"
#include "echo/util/binary_io.hpp"

namespace echo {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view why) {
  throw Error(ErrorCode::kConfigError,
              "bad value '" + std::string(value) + "' for " + std::string(key) + ": " + std::string(why));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) bad_value(key, value, "expected a number");
  return out;
}

std::size_t parse_positive(std::string_view key, std::string_view value) {
  const auto v = parse_number<std::size_t>(key, value);
  if (v == 0) bad_value(key, value, "must be positive");
  return v;
}

double parse_real(std::string_view key, std::string_view value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(std::string(value), &used);
    if (used != value.size()) bad_value(key, value, "expected a number");
    return v;
  } catch (const std::logic_error&) {
    bad_value(key, value, "expected a number");
  }
}

std::string resolve(std::string_view value, const std::string& base_dir) {
  if (value.empty() || base_dir.empty()) return std::string(value);
  const std::filesystem::path p{std::string(value)};
  if (p.is_absolute()) return p.string();
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

template <typename T, typename Parse>
std::vector<T> parse_list(std::string_view value, Parse parse) {
  std::vector<T> out;
  std::size_t pos = 0;
  while (pos <= value.size()) {
    std::size_t end = value.find(',', pos);
    if (end == std::string_view::npos) end = value.size();
    const std::string_view item = trim(value.substr(pos, end - pos));
    if (!item.empty()) out.push_back(parse(item));
    pos = end + 1;
  }
  return out;
}

template <typename T, typename Fmt>
std::string join(const std::vector<T>& items, Fmt fmt) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += ',';
    out += fmt(item);
  }
  return out;
}

std::string format_real(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

struct KeySpec {
  std::string key;
  std::function<void(RunConfig&, std::string_view, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define ECHO_STRING_KEY(name, field)                                                            \
  KeySpec {                                                                                     \
    name, [](RunConfig& c, std::string_view v, const std::string&) { c.field = std::string(v); }, \
        [](const RunConfig& c) { return c.field; }                                              \
  }
#define ECHO_PATH_KEY(name, field)                                                                   \
  KeySpec {                                                                                          \
    name, [](RunConfig& c, std::string_view v, const std::string& base) { c.field = resolve(v, base); }, \
        [](const RunConfig& c) { return c.field; }                                                   \
  }

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = [] {
    std::vector<KeySpec> s = {
        {"gateway",
         [](RunConfig& c, std::string_view v, const std::string&) {
           if (v == "mock") {
             c.gateway = GatewayKind::kMock;
           } else if (v == "http") {
             c.gateway = GatewayKind::kHttp;
           } else {
             bad_value("gateway", v, "expected mock or http");
           }
         },
         [](const RunConfig& c) { return std::string(c.gateway == GatewayKind::kMock ? "mock" : "http"); }},
        ECHO_PATH_KEY("mock_script", mock_script),
        ECHO_STRING_KEY("endpoint", endpoint),
        ECHO_STRING_KEY("model", model),
        ECHO_STRING_KEY("api_key_env", api_key_env),
        {"timeout_ms",
         [](RunConfig& c, std::string_view v, const std::string&) {
           c.timeout = std::chrono::milliseconds(parse_positive("timeout_ms", v));
         },
         [](const RunConfig& c) { return std::to_string(c.timeout.count()); }},
        {"retries",
         [](RunConfig& c, std::string_view v, const std::string&) {
           c.retries = parse_number<int>("retries", v);
           if (c.retries < 0) bad_value("retries", v, "must be non-negative");
         },
         [](const RunConfig& c) { return std::to_string(c.retries); }},
        {"pool_size", [](RunConfig& c, std::string_view v, const std::string&) { c.pool_size = parse_positive("pool_size", v); },
         [](const RunConfig& c) { return std::to_string(c.pool_size); }},
        {"max_tokens",
         [](RunConfig& c, std::string_view v, const std::string&) { c.max_tokens = parse_positive("max_tokens", v); },
         [](const RunConfig& c) { return std::to_string(c.max_tokens); }},
        ECHO_PATH_KEY("embeddings", embeddings),
        ECHO_STRING_KEY("embedding_endpoint", embedding_endpoint),
        {"dim", [](RunConfig& c, std::string_view v, const std::string&) { c.dim = parse_positive("dim", v); },
         [](const RunConfig& c) { return std::to_string(c.dim); }},
        ECHO_PATH_KEY("memory", memory),
        ECHO_PATH_KEY("index", index),
        ECHO_PATH_KEY("knowledge", knowledge),
        ECHO_PATH_KEY("benchmark", benchmark),
        ECHO_PATH_KEY("image_root", image_root),
        ECHO_PATH_KEY("output_dir", output_dir),
        {"missing_image",
         [](RunConfig& c, std::string_view v, const std::string&) {
           if (v == "warn") {
             c.missing_image = MissingImagePolicy::kWarn;
           } else if (v == "fail") {
             c.missing_image = MissingImagePolicy::kFail;
           } else if (v == "ignore") {
             c.missing_image = MissingImagePolicy::kIgnore;
           } else {
             bad_value("missing_image", v, "expected warn, fail or ignore");
           }
         },
         [](const RunConfig& c) {
           return std::string(c.missing_image == MissingImagePolicy::kWarn   ? "warn"
                              : c.missing_image == MissingImagePolicy::kFail ? "fail"
                                                                             : "ignore");
         }},
        {"shots", [](RunConfig& c, std::string_view v, const std::string&) { c.shots = parse_number<std::size_t>("shots", v); },
         [](const RunConfig& c) { return std::to_string(c.shots); }},
        {"shot_mode", [](RunConfig& c, std::string_view v, const std::string&) { c.shot_mode = parse_shot_mode(v); },
         [](const RunConfig& c) { return std::string(to_string(c.shot_mode)); }},
        {"knowledge_mode",
         [](RunConfig& c, std::string_view v, const std::string&) { c.knowledge_mode = parse_knowledge_mode(v); },
         [](const RunConfig& c) { return std::string(to_string(c.knowledge_mode)); }},
        {"knowledge_extractor",
         [](RunConfig& c, std::string_view v, const std::string&) { c.knowledge_extractor = parse_knowledge_extractor(v); },
         [](const RunConfig& c) { return std::string(to_string(c.knowledge_extractor)); }},
        {"knowledge_budget",
         [](RunConfig& c, std::string_view v, const std::string&) {
           c.knowledge_budget = parse_number<std::size_t>("knowledge_budget", v);
         },
         [](const RunConfig& c) { return std::to_string(c.knowledge_budget); }},
        {"format_mode", [](RunConfig& c, std::string_view v, const std::string&) { c.format_mode = parse_format_mode(v); },
         [](const RunConfig& c) { return std::string(to_string(c.format_mode)); }},
        {"ablation", [](RunConfig& c, std::string_view v, const std::string&) { c.ablation = parse_ablation(v); },
         [](const RunConfig& c) { return std::string(to_string(c.ablation)); }},
    };
    for (QuestionType q : kAllQuestionTypes) {
      s.push_back({"experts." + std::string(to_string(q)),
                   [q](RunConfig& c, std::string_view v, const std::string&) { c.experts[q] = parse_expert_set(v); },
                   [q](const RunConfig& c) { return to_string(c.experts.at(q)); }});
    }
    const std::vector<KeySpec> tail = {
        {"hnsw.m",
         [](RunConfig& c, std::string_view v, const std::string&) {
           HnswParams p = HnswParams::for_m(parse_number<std::size_t>("hnsw.m", v));
           p.ef_construction = c.hnsw.ef_construction;
           p.ef_search = c.hnsw.ef_search;
           p.rng_seed = c.hnsw.rng_seed;
           c.hnsw = p;
         },
         [](const RunConfig& c) { return std::to_string(c.hnsw.m); }},
        {"hnsw.m0", [](RunConfig& c, std::string_view v, const std::string&) { c.hnsw.m0 = parse_number<std::size_t>("hnsw.m0", v); },
         [](const RunConfig& c) { return std::to_string(c.hnsw.m0); }},
        {"hnsw.ef_construction",
         [](RunConfig& c, std::string_view v, const std::string&) {
           c.hnsw.ef_construction = parse_number<std::size_t>("hnsw.ef_construction", v);
         },
         [](const RunConfig& c) { return std::to_string(c.hnsw.ef_construction); }},
        {"hnsw.ef_search",
         [](RunConfig& c, std::string_view v, const std::string&) {
           c.hnsw.ef_search = parse_number<std::size_t>("hnsw.ef_search", v);
         },
         [](const RunConfig& c) { return std::to_string(c.hnsw.ef_search); }},
        {"hnsw.level_multiplier",
         [](RunConfig& c, std::string_view v, const std::string&) {
           c.hnsw.level_multiplier = parse_real("hnsw.level_multiplier", v);
         },
         [](const RunConfig& c) { return format_real(c.hnsw.level_multiplier); }},
        {"hnsw.seed",
         [](RunConfig& c, std::string_view v, const std::string&) { c.hnsw.rng_seed = parse_number<std::uint64_t>("hnsw.seed", v); },
         [](const RunConfig& c) { return std::to_string(c.hnsw.rng_seed); }},
        {"parallelism",
         [](RunConfig& c, std::string_view v, const std::string&) { c.parallelism = parse_positive("parallelism", v); },
         [](const RunConfig& c) { return std::to_string(c.parallelism); }},
        {"seed", [](RunConfig& c, std::string_view v, const std::string&) { c.seed = parse_number<std::uint64_t>("seed", v); },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        {"grid.format_mode",
         [](RunConfig& c, std::string_view v, const std::string&) {
           c.grid.format_modes = parse_list<FormatMode>(v, parse_format_mode);
         },
         [](const RunConfig& c) {
           return join(c.grid.format_modes, [](FormatMode m) { return std::string(to_string(m)); });
         }},
        {"grid.knowledge_mode",
         [](RunConfig& c, std::string_view v, const std::string&) {
           c.grid.knowledge_modes = parse_list<KnowledgeMode>(v, parse_knowledge_mode);
         },
         [](const RunConfig& c) {
           return join(c.grid.knowledge_modes, [](KnowledgeMode m) { return std::string(to_string(m)); });
         }},
        {"grid.shots",
         [](RunConfig& c, std::string_view v, const std::string&) {
           c.grid.shots = parse_list<std::size_t>(v, [](std::string_view s) { return parse_number<std::size_t>("grid.shots", s); });
         },
         [](const RunConfig& c) { return join(c.grid.shots, [](std::size_t n) { return std::to_string(n); }); }},
        {"grid.shot_mode",
         [](RunConfig& c, std::string_view v, const std::string&) { c.grid.shot_modes = parse_list<ShotMode>(v, parse_shot_mode); },
         [](const RunConfig& c) {
           return join(c.grid.shot_modes, [](ShotMode m) { return std::string(to_string(m)); });
         }},
        {"grid.ablation",
         [](RunConfig& c, std::string_view v, const std::string&) { c.grid.ablations = parse_list<Ablation>(v, parse_ablation); },
         [](const RunConfig& c) {
           return join(c.grid.ablations, [](Ablation a) { return std::string(to_string(a)); });
         }},
    };
    s.insert(s.end(), tail.begin(), tail.end());
    return s;
  }();
  return specs;
}

#undef ECHO_STRING_KEY
#undef ECHO_PATH_KEY

}  // namespace

void apply_setting(RunConfig& config, std::string_view key, std::string_view value, const std::string& base_dir) {
  key = trim(key);
  value = trim(value);
  for (const KeySpec& spec : key_specs()) {
    if (spec.key == key) {
      spec.set(config, value, base_dir);
      return;
    }
  }
  throw Error(ErrorCode::kConfigError, "unknown config key '" + std::string(key) + "'");
}

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorCode::kConfigError, "override '" + std::string(assignment) + "' is not key=value");
  }
  apply_setting(config, assignment.substr(0, eq), assignment.substr(eq + 1));
}

RunConfig parse_config(std::string_view text, const std::string& base_dir) {
  RunConfig config;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kConfigError, "line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      apply_setting(config, line.substr(0, eq), line.substr(eq + 1), base_dir);
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfigError, "line " + std::to_string(line_no) + ": " + std::string(e.message()));
    }
  }
  return config;
}

RunConfig load_config(const std::string& path) {
  std::vector<std::byte> bytes;
  try {
    bytes = util::read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, std::string(e.message()));
  }
  const std::string base = std::filesystem::path(path).parent_path().string();
  return parse_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                      base.empty() ? "." : base);
}

std::vector<std::pair<std::string, std::string>> config_snapshot(const RunConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const KeySpec& spec : key_specs()) out.emplace_back(spec.key, spec.get(config));
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const KeySpec& spec : key_specs()) out.push_back(spec.key);
  return out;
}

}  // namespace echo
