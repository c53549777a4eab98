#include "echo/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>

#include "CLI11.hpp"

#include "echo/config.hpp"
#include "echo/error.hpp"
#include "echo/eval/report.hpp"
#include "echo/gateway/chat.hpp"
#include "echo/gateway/embedding.hpp"
#include "echo/index/hnsw.hpp"
#include "echo/knowledge/knowledge_base.hpp"
#include "echo/memory/manifest.hpp"
#include "echo/orchestrator/orchestrator.hpp"
#include "echo/util/binary_io.hpp"

namespace echo::cli {

namespace {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  int verbosity = 0;
  bool json = false;
};

RunConfig resolve_config(const GlobalOptions& g) {
  RunConfig c = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
  for (const auto& o : g.overrides) apply_override(c, o);
  return c;
}

// Everything a run can need, loaded once. Members stay null when the
// configuration does not name them.
struct Resources {
  std::unique_ptr<VectorMemory> memory;
  std::unique_ptr<HnswIndex> index;
  std::unique_ptr<KnowledgeBase> knowledge;
  std::unique_ptr<ChatBackend> chat;
  std::unique_ptr<EmbeddingBackend> embeddings;

  Pipeline pipeline() const {
    return {memory.get(), index.get(), knowledge.get(), chat.get(), embeddings.get()};
  }
};

std::string api_key(const RunConfig& c) {
  if (c.api_key_env.empty()) return {};
  const char* v = std::getenv(c.api_key_env.c_str());
  return v ? v : "";
}

// Load failures are configuration errors: the run cannot start.
template <typename F>
auto loading(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, what + ": " + std::string(e.what()));
  }
}

Resources load_resources(const RunConfig& c) {
  Resources r;
  if (c.gateway == GatewayKind::kMock) {
    MockScript script = c.mock_script.empty() ? MockScript{} : loading("mock_script", [&] { return MockScript::load(c.mock_script); });
    r.chat = std::make_unique<MockChatBackend>(std::move(script));
  } else {
    if (c.endpoint.empty()) throw Error(ErrorCode::kConfigError, "gateway = http needs an endpoint");
    HttpChatConfig hc;
    hc.endpoint = c.endpoint;
    hc.model = c.model;
    hc.api_key = api_key(c);
    hc.timeout = c.timeout;
    hc.retries = c.retries;
    hc.pool_size = c.pool_size;
    r.chat = std::make_unique<HttpChatBackend>(hc);
  }
  if (!c.memory.empty()) r.memory = std::make_unique<VectorMemory>(loading("memory", [&] { return load_memory(c.memory); }));
  if (!c.index.empty()) {
    if (!r.memory) throw Error(ErrorCode::kConfigError, "an index needs a memory");
    r.index = std::make_unique<HnswIndex>(loading("index", [&] { return load_index(c.index, *r.memory); }));
  }
  if (!c.knowledge.empty()) {
    r.knowledge = std::make_unique<KnowledgeBase>(loading("knowledge", [&] { return load_knowledge(c.knowledge); }));
  }
  if (!c.embeddings.empty()) {
    auto store = loading("embeddings", [&] { return load_precomputed_embeddings(c.embeddings); });
    if (r.memory && store.dim() != r.memory->dim()) {
      throw Error(ErrorCode::kConfigError, "embeddings dim " + std::to_string(store.dim()) + " differs from memory dim " +
                                               std::to_string(r.memory->dim()));
    }
    r.embeddings = std::make_unique<PrecomputedEmbeddings>(std::move(store));
  } else if (!c.embedding_endpoint.empty()) {
    HttpEmbeddingConfig ec;
    ec.endpoint = c.embedding_endpoint;
    ec.model = c.model;
    ec.api_key = api_key(c);
    ec.dim = c.dim;
    ec.timeout = c.timeout;
    ec.retries = c.retries;
    r.embeddings = std::make_unique<HttpEmbeddingBackend>(ec);
  }
  return r;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  util::write_file(path.string(), std::as_bytes(std::span(text.data(), text.size())));
}

Benchmark load_benchmark_for(const RunConfig& c, const GlobalOptions& g, std::ostream& err) {
  if (c.benchmark.empty()) throw Error(ErrorCode::kConfigError, "no benchmark configured");
  Benchmark b = load_benchmark(c.benchmark, c.missing_image, c.image_root);
  if (g.verbosity > 0) {
    for (const auto& w : b.warnings) err << "warning: " << w << "\n";
  } else if (!b.warnings.empty()) {
    err << "warning: " << b.warnings.size() << " benchmark warning(s); rerun with -v to list them\n";
  }
  if (b.items.empty()) throw Error(ErrorCode::kConfigError, "benchmark has no in-scope items");
  return b;
}

ProgressFn progress_for(const GlobalOptions& g, std::ostream& err) {
  if (g.verbosity < 2) return nullptr;
  auto mutex = std::make_shared<std::mutex>();
  return [&err, mutex](std::size_t done, std::size_t total) {
    std::lock_guard lock(*mutex);
    err << "progress: " << done << "/" << total << "\n";
  };
}

// ---- subcommands

struct IngestArgs {
  std::string manifest;
  std::string out;
  bool keep_raw = false;
};

int cmd_ingest(const GlobalOptions& g, const IngestArgs& a, std::ostream& out) {
  const RunConfig c = resolve_config(g);
  const std::string target = !a.out.empty() ? a.out : (!c.memory.empty() ? c.memory : std::string("memory.echomem"));
  const Manifest m = load_manifest(a.manifest);
  const VectorMemory memory = memory_from_manifest(m, !a.keep_raw);
  if (fs::path(target).has_parent_path()) fs::create_directories(fs::path(target).parent_path());
  save_memory(memory, target);
  if (g.json) {
    out << "{\"entries\": " << memory.size() << ", \"dim\": " << memory.dim() << ", \"memory\": \"" << target << "\"}\n";
  } else {
    out << memory.size() << " entries, dim=" << memory.dim() << "\n";
  }
  return kExitOk;
}

struct IndexArgs {
  std::string memory;
  std::string out;
};

int cmd_index(const GlobalOptions& g, const IndexArgs& a, std::ostream& out) {
  const RunConfig c = resolve_config(g);
  const std::string source = !a.memory.empty() ? a.memory : c.memory;
  if (source.empty()) throw Error(ErrorCode::kConfigError, "no memory file given");
  const std::string target = !a.out.empty() ? a.out : (!c.index.empty() ? c.index : source + ".echoidx");
  const VectorMemory memory = load_memory(source);
  const HnswIndex index = HnswIndex::build(memory, c.hnsw);
  save_index(index, target);
  out << index.size() << " nodes, max level " << index.max_level() << ", m=" << c.hnsw.m << " -> " << target << "\n";
  return kExitOk;
}

struct QueryArgs {
  std::string id = "query";
  std::string image;
  std::string question;
  std::vector<std::string> options;  // "A=text"
  std::string class_name;
  std::string subtask;
};

int cmd_query(const GlobalOptions& g, const QueryArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig c = resolve_config(g);
  QueryBundle q;
  q.id = a.id;
  q.query_image = a.image;
  q.question = a.question;
  for (const auto& o : a.options) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kConfigError, "option '" + o + "' is not LETTER=text");
    q.options.push_back({o.substr(0, eq), o.substr(eq + 1)});
  }
  try {
    validate_options(q.options);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, std::string(e.message()));
  }
  if (!a.class_name.empty()) q.class_name = a.class_name;
  if (!a.subtask.empty()) {
    q.declared_qtype = parse_question_type(a.subtask);
    if (!q.declared_qtype) throw Error(ErrorCode::kConfigError, "unknown subtask '" + a.subtask + "'");
  }
  // Free-form questions without options can only be asked open-ended.
  if (q.options.empty() && c.format_mode == FormatMode::kMultipleChoice) c.format_mode = FormatMode::kQa;

  const Resources r = load_resources(c);
  Decision d;
  try {
    d = run_query(q, r.pipeline(), c);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfigError) throw;
    err << "error: " << e.what() << "\n";
    return kExitItemErrors;
  }
  if (g.json) {
    out << serialize_decision(d) << "\n";
  } else {
    out << "query: " << d.query_id << "\n"
        << "type: " << to_string(d.qtype) << "\n"
        << "experts: " << to_string(d.experts_used) << "\n"
        << "references: " << d.shots_returned << "\n"
        << "choice: " << d.extracted_choice.value_or("-") << " (" << to_string(d.parse_status) << ")\n"
        << "reply: " << d.raw_text << "\n";
  }
  if (d.error) {
    err << "error: " << *d.error << "\n";
    return kExitItemErrors;
  }
  return kExitOk;
}

int finish_run(std::size_t item_errors, std::ostream& err) {
  if (item_errors == 0) return kExitOk;
  err << item_errors << " item(s) failed; see the note fields in the run result\n";
  return kExitItemErrors;
}

int cmd_eval(const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  const RunConfig c = resolve_config(g);
  const Benchmark b = load_benchmark_for(c, g, err);
  const Resources r = load_resources(c);
  const RunResult result = run_eval(b.items, r.pipeline(), c, progress_for(g, err));
  const Report report = score(result, "run");
  const fs::path dir(c.output_dir);
  save_run_result(result, (dir / "runresult.json").string());
  write_text(dir / "report.md", render_markdown({report}));
  write_text(dir / "report.csv", render_csv({report}));
  if (g.json) {
    out << report_json({report});
  } else {
    out << render_markdown({report});
    out << result.records.size() << " items scored";
    if (result.skipped_items > 0) out << ", " << result.skipped_items << " not expressible in " << to_string(c.format_mode);
    out << "; wrote " << (dir / "report.md").string() << "\n";
  }
  return finish_run(result.item_errors(), err);
}

int cmd_grid(const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  const RunConfig c = resolve_config(g);
  const Benchmark b = load_benchmark_for(c, g, err);
  const Resources r = load_resources(c);
  const auto points = grid_points(c);
  GridResult grid;
  grid.points = points;
  std::size_t errors = 0;
  const fs::path dir(c.output_dir);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (g.verbosity > 0) err << "grid point " << i + 1 << "/" << points.size() << ": " << points[i].label << "\n";
    grid.runs.push_back(run_eval(b.items, r.pipeline(), points[i].config, progress_for(g, err)));
    grid.reports.push_back(score(grid.runs.back(), points[i].label));
    errors += grid.runs.back().item_errors();
    save_run_result(grid.runs.back(), (dir / ("runresult_" + std::to_string(i) + ".json")).string());
  }
  grid.deltas = delta_table(grid.reports);
  const std::string md = render_markdown(grid.reports) + "\n" + render_delta_markdown(grid.deltas);
  write_text(dir / "report.md", md);
  write_text(dir / "report.csv", render_csv(grid.reports));
  if (g.json) {
    out << report_json(grid.reports);
  } else {
    out << md;
  }
  return finish_run(errors, err);
}

struct ReportArgs {
  std::vector<std::string> runs;
};

int cmd_report(const GlobalOptions& g, const ReportArgs& a, std::ostream& out) {
  std::vector<Report> reports;
  for (const auto& path : a.runs) {
    reports.push_back(score(load_run_result(path), fs::path(path).stem().string()));
  }
  if (g.json) {
    out << report_json(reports);
    return kExitOk;
  }
  out << render_markdown(reports);
  if (reports.size() > 1) out << "\n" << render_delta_markdown(delta_table(reports));
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-expert industrial anomaly inspection pipeline", "echo-iad"};
  app.require_subcommand(1);
  app.fallthrough();  // global options are accepted after the subcommand too
  GlobalOptions g;
  app.add_option("--config", g.config_path, "Run configuration file (key = value)");
  app.add_option("--set", g.overrides, "Override one config key: --set key=value (repeatable)");
  app.add_flag("-v,--verbose", g.verbosity, "More diagnostics on stderr (-vv adds progress)");
  app.add_flag("--json", g.json, "Machine-readable output");

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Build a memory file from an embedding manifest");
  ingest_cmd->add_option("manifest", ingest.manifest, "Manifest produced by the exporter")->required();
  ingest_cmd->add_option("-o,--out", ingest.out, "Memory file to write (default: config memory)");
  ingest_cmd->add_flag("--raw", ingest.keep_raw, "Store vectors unnormalized");

  IndexArgs index;
  auto* index_cmd = app.add_subcommand("index", "Build an HNSW index over a memory file");
  index_cmd->add_option("--memory", index.memory, "Memory file (default: config memory)");
  index_cmd->add_option("-o,--out", index.out, "Index file to write (default: config index)");

  QueryArgs query;
  auto* query_cmd = app.add_subcommand("query", "Answer one question about one image");
  query_cmd->add_option("--image", query.image, "Query image path or URI")->required();
  query_cmd->add_option("--question", query.question, "Question text")->required();
  query_cmd->add_option("--option", query.options, "Answer option LETTER=text (repeatable, in order)");
  query_cmd->add_option("--class", query.class_name, "Object class of the query image");
  query_cmd->add_option("--subtask", query.subtask, "Question type, overriding the keyword classifier");
  query_cmd->add_option("--id", query.id, "Query id (seeds random shots)");

  auto* eval_cmd = app.add_subcommand("eval", "Run the configured benchmark and write reports");
  auto* grid_cmd = app.add_subcommand("grid", "Run every grid point and write reports with deltas");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Render tables from run result files");
  report_cmd->add_option("runs", report.runs, "Run result files; the first is the baseline")->required()->check(CLI::ExistingFile);

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*ingest_cmd) return cmd_ingest(g, ingest, out);
    if (*index_cmd) return cmd_index(g, index, out);
    if (*query_cmd) return cmd_query(g, query, out, err);
    if (*eval_cmd) return cmd_eval(g, out, err);
    if (*grid_cmd) return cmd_grid(g, out, err);
    if (*report_cmd) return cmd_report(g, report, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace echo::cli
