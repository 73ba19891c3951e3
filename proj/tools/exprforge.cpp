#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "exprforge/backends.hpp"
#include "exprforge/bench.hpp"
#include "exprforge/diff_analyzer.hpp"
#include "exprforge/error.hpp"
#include "exprforge/expression_db.hpp"
#include "exprforge/json_io.hpp"
#include "exprforge/png_io.hpp"
#include "exprforge/retrieval.hpp"
#include "exprforge/service.hpp"
#include "exprforge/settings.hpp"

namespace ef = exprforge;
using json = nlohmann::json;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ef::Error(ef::ErrorCode::MissingFile, "cannot open " + path, path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ef::BackendKind backend_kind(const std::string& name) {
  if (name == "stub") return ef::BackendKind::stub;
  if (name == "http") return ef::BackendKind::http;
  return ef::BackendKind::timing;
}

struct DbValidateArgs {
  std::string path;
  bool as_json = false;
};

int cmd_db_validate(const DbValidateArgs& a) {
  const auto db = ef::load_database(a.path);
  const auto report = ef::validate_database(db);
  const auto& c = report.counts;
  if (a.as_json) {
    json out = {{"valid", true},
                {"tags", c.tags},
                {"aliases", c.aliases},
                {"stories", c.stories},
                {"image_refs", c.image_refs},
                {"transformation_free", c.transformation_free},
                {"warnings", report.warnings}};
    std::cout << out.dump(2) << '\n';
    return 0;
  }
  std::printf("%-22s %6zu\n", "tags", c.tags);
  std::printf("%-22s %6zu\n", "aliases", c.aliases);
  std::printf("%-22s %6zu\n", "stories", c.stories);
  std::printf("%-22s %6zu\n", "image refs", c.image_refs);
  std::printf("%-22s %6zu\n", "transformation-free", c.transformation_free);
  for (const auto& w : report.warnings) std::printf("warning: %s\n", w.c_str());
  std::printf("ok\n");
  return 0;
}

struct StoryPromptArgs {
  std::string db;
  std::string tag;
  std::string lang = "en";
  int n = 5;
};

int cmd_story_prompt(const StoryPromptArgs& a) {
  const auto db = ef::load_database(a.db);
  const auto* tag = db.resolve_alias(a.tag);
  if (!tag) throw ef::Error(ef::ErrorCode::SchemaViolation, "unknown tag '" + a.tag + "'", a.tag);
  std::cout << ef::build_story_generation_prompt(*tag, ef::parse_language(a.lang), a.n) << '\n';
  return 0;
}

struct RetrieveArgs {
  std::string db;
  int k = 5;
  std::string text;
  bool as_json = false;
  std::string llm_url;
  std::string llm_model;
};

int cmd_retrieve(const RetrieveArgs& a) {
  const auto db = ef::load_database(a.db);
  const auto index = ef::build_index(db);
  ef::RetrievalQuery q{a.text, std::nullopt, a.k};
  std::vector<ef::ScoredTag> tags;
  bool degraded = false;
  if (!a.llm_url.empty()) {
    ef::ChatCompletionClient client({a.llm_url, a.llm_model});
    auto r = ef::retrieve_via_llm(db, index, q, client);
    tags = std::move(r.tags);
    degraded = r.degraded;
  } else {
    tags = ef::retrieve(index, q);
  }
  if (a.as_json) {
    json arr = json::array();
    for (std::size_t i = 0; i < tags.size(); ++i) arr.push_back(ef::to_json(tags[i], static_cast<int>(i + 1)));
    std::cout << json{{"results", arr}, {"degraded", degraded}}.dump(2) << '\n';
    return 0;
  }
  if (degraded) std::cerr << "note: model named no valid tag; showing lexical results\n";
  if (tags.empty()) std::cout << "no matching tags\n";
  for (std::size_t i = 0; i < tags.size(); ++i) {
    std::string fields;
    for (auto f : tags[i].matched_fields) {
      if (!fields.empty()) fields += ",";
      fields += ef::to_string(f);
    }
    std::printf("%zu. %s\t%.4f\t%s\n", i + 1, tags[i].tag_name.c_str(), tags[i].score, fields.c_str());
  }
  return 0;
}

struct DiffArgs {
  std::string original;
  std::string edited;
  std::string mask;
  int threshold = ef::kDefaultDiffThreshold;
  std::string out;
};

int cmd_diff(const DiffArgs& a) {
  const auto orig = ef::read_png(a.original);
  const auto edited = ef::read_png(a.edited);
  std::optional<ef::SelectionMask> mask;
  if (!a.mask.empty()) mask = ef::read_mask_png(a.mask);
  const auto map = ef::l1_map(orig, edited);
  const auto st = ef::stats(map, mask ? &*mask : nullptr);
  if (!a.out.empty()) ef::write_file_bytes(a.out, ef::encode_png(ef::render_grayscale(map, a.threshold)));
  std::cout << ef::stats_to_json(st) << '\n';
  return 0;
}

struct ServeArgs {
  std::string db;
  std::string host = "127.0.0.1";
  int port = 8787;
  std::string backend = "stub";
  std::string backend_url;
  std::string settings;
  std::string run_dir = "exprforge-run";
  int workers = 1;
  std::string llm_url;
  std::string llm_model;
};

int cmd_serve(const ServeArgs& a, const std::vector<std::string>& explicit_opts) {
  auto db = ef::load_database(a.db);
  ef::Settings settings;
  ef::ServiceOptions options;
  options.run_dir = a.run_dir;
  options.workers = a.workers;
  if (!a.settings.empty()) {
    options.settings_path = a.settings;
    if (std::filesystem::exists(a.settings)) settings = ef::load_settings(a.settings);
  }
  const bool backend_given =
      std::find(explicit_opts.begin(), explicit_opts.end(), "--backend") != explicit_opts.end();
  if (backend_given || a.settings.empty()) settings.backend.kind = backend_kind(a.backend);
  settings.backend.http = ef::http_config_from_env(settings.backend.http);
  if (!a.backend_url.empty()) settings.backend.http.base_url = a.backend_url;
  ef::validate_settings(settings);
  if (!a.llm_url.empty()) options.llm = ef::LlmConfig{a.llm_url, a.llm_model};

  ef::Service service(std::move(db), settings, options);
  ef::serve(service, a.host, a.port, [&](int port) {
    std::cout << "exprforge listening on http://" << a.host << ":" << port << " (backend "
              << ef::to_string(settings.backend.kind) << ", " << service.database().size() << " tags)" << std::endl;
  });
  return 0;
}

struct BenchArgs {
  std::string backend = "timing";
  std::string backend_url;
  int runs = 10;
  int size = 1024;
  std::string config;
  std::string out = "bench_report.json";
};

int cmd_bench(const BenchArgs& a) {
  const auto configs = a.config.empty() ? ef::default_bench_configs() : ef::parse_bench_config(read_text(a.config));
  auto base = ef::make_bench_request(a.size);
  std::vector<ef::LatencyReport> reports;
  for (const auto& c : configs) {
    ef::EditRequest req = base;
    req.params = c.params;
    if (!req.params.seed) req.params.seed = base.params.seed;
    req.loras = c.loras;
    std::shared_ptr<ef::GenerationBackend> backend;
    if (a.backend == "timing") {
      backend = std::make_shared<ef::TimingBackend>(c.delays.empty() ? std::vector{std::chrono::milliseconds(100)}
                                                                     : c.delays);
    } else if (a.backend == "stub") {
      backend = std::make_shared<ef::StubBackend>();
    } else {
      auto cfg = ef::http_config_from_env();
      if (!a.backend_url.empty()) cfg.base_url = a.backend_url;
      if (cfg.base_url.empty()) {
        throw ef::Error(ef::ErrorCode::ParamOutOfRange, "http backend needs --backend-url or EXPRFORGE_BACKEND_URL",
                        "backend-url");
      }
      backend = std::make_shared<ef::HttpBackend>(cfg);
    }
    std::cerr << "running '" << c.label << "' (" << a.runs << " runs)\n";
    reports.push_back(ef::run_benchmark(*backend, req, a.runs, c.label));
  }
  std::cout << ef::render_table(reports);
  const std::string report = ef::reports_to_json(reports);
  std::ofstream(a.out) << report << '\n';
  std::cout << "report written to " << a.out << '\n';
  return 0;
}

struct EditArgs {
  std::string image;
  std::string mask;
  std::string prompt;
  std::string params;
  std::string backend = "stub";
  std::string backend_url;
  std::string layer_out = "layer.png";
  std::string composite_out = "composite.png";
};

int cmd_edit(const EditArgs& a) {
  ef::EditRequest req;
  req.image = ef::read_png(a.image);
  req.mask = ef::read_mask_png(a.mask);
  req.prompt = a.prompt;
  if (!a.params.empty()) req.params = ef::hyper_params_from_json(json::parse(a.params));
  ef::BackendSettings bs;
  bs.kind = backend_kind(a.backend);
  bs.http = ef::http_config_from_env();
  if (!a.backend_url.empty()) bs.http.base_url = a.backend_url;
  auto backend = ef::make_backend(bs);
  const auto result = ef::run_edit(req, *backend);
  ef::write_file_bytes(a.layer_out, ef::encode_png(result.layer.pixels));
  ef::write_file_bytes(a.composite_out, ef::encode_png(result.composited_preview));
  const auto& m = result.layer.metadata;
  std::cout << json{{"seed", m.seed}, {"backend_id", m.backend_id}, {"latency_ms", m.latency_ms},
                    {"request_hash", m.request_hash}}
                   .dump(2)
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exprforge: expression-tag retrieval and masked image editing"};
  app.require_subcommand(1);

  auto* db = app.add_subcommand("db", "Expression database tools");
  db->require_subcommand(1);
  DbValidateArgs validate_args;
  auto* validate = db->add_subcommand("validate", "Load and validate a database, print counts");
  validate->add_option("path", validate_args.path, "Database directory or tags.jsonl")->required();
  validate->add_flag("--json", validate_args.as_json);
  StoryPromptArgs story_args;
  auto* story = db->add_subcommand("story-prompt", "Render the story-generation prompt for a tag");
  story->add_option("--db", story_args.db)->required();
  story->add_option("--tag", story_args.tag)->required();
  story->add_option("--lang", story_args.lang)->check(CLI::IsMember({"en", "zh", "ja", "ko"}));
  story->add_option("--n", story_args.n)->check(CLI::PositiveNumber);

  RetrieveArgs retrieve_args;
  auto* retrieve = app.add_subcommand("retrieve", "Rank expression tags for a description");
  retrieve->add_option("--db", retrieve_args.db)->required();
  retrieve->add_option("--k", retrieve_args.k)->check(CLI::PositiveNumber);
  retrieve->add_flag("--json", retrieve_args.as_json);
  retrieve->add_option("--llm-url", retrieve_args.llm_url, "OpenAI-compatible endpoint; lexical when omitted");
  retrieve->add_option("--llm-model", retrieve_args.llm_model);
  retrieve->add_option("text", retrieve_args.text)->required();

  DiffArgs diff_args;
  auto* diff = app.add_subcommand("diff", "Per-pixel L1 difference between two PNGs");
  diff->add_option("original", diff_args.original)->required()->check(CLI::ExistingFile);
  diff->add_option("edited", diff_args.edited)->required()->check(CLI::ExistingFile);
  diff->add_option("--mask", diff_args.mask)->check(CLI::ExistingFile);
  diff->add_option("--threshold", diff_args.threshold)->check(CLI::Range(1, ef::kMaxL1));
  diff->add_option("--out", diff_args.out, "Write the grayscale heatmap PNG here");

  ServeArgs serve_args;
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--db", serve_args.db)->required();
  serve->add_option("--host", serve_args.host);
  serve->add_option("--port", serve_args.port)->check(CLI::Range(0, 65535));
  serve->add_option("--backend", serve_args.backend)->check(CLI::IsMember({"stub", "http", "timing"}));
  serve->add_option("--backend-url", serve_args.backend_url);
  serve->add_option("--settings", serve_args.settings, "Settings JSON, created on first PUT");
  serve->add_option("--run-dir", serve_args.run_dir);
  serve->add_option("--workers", serve_args.workers)->check(CLI::PositiveNumber);
  serve->add_option("--llm-url", serve_args.llm_url);
  serve->add_option("--llm-model", serve_args.llm_model);

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Measure edit latency per configuration");
  bench->add_option("--backend", bench_args.backend)->check(CLI::IsMember({"stub", "http", "timing"}));
  bench->add_option("--backend-url", bench_args.backend_url);
  bench->add_option("--runs", bench_args.runs)->check(CLI::Range(2, 100000));
  bench->add_option("--size", bench_args.size)->check(CLI::Range(8, 8192));
  bench->add_option("--config", bench_args.config)->check(CLI::ExistingFile);
  bench->add_option("--out", bench_args.out, "JSON report path");

  EditArgs edit_args;
  auto* edit = app.add_subcommand("edit", "Run one masked edit and write the layer and composite");
  edit->add_option("--image", edit_args.image)->required()->check(CLI::ExistingFile);
  edit->add_option("--mask", edit_args.mask)->required()->check(CLI::ExistingFile);
  edit->add_option("--prompt", edit_args.prompt);
  edit->add_option("--params", edit_args.params, "Hyperparameters as JSON");
  edit->add_option("--backend", edit_args.backend)->check(CLI::IsMember({"stub", "http", "timing"}));
  edit->add_option("--backend-url", edit_args.backend_url);
  edit->add_option("--layer-out", edit_args.layer_out);
  edit->add_option("--composite-out", edit_args.composite_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return cmd_db_validate(validate_args);
    if (story->parsed()) return cmd_story_prompt(story_args);
    if (retrieve->parsed()) return cmd_retrieve(retrieve_args);
    if (diff->parsed()) return cmd_diff(diff_args);
    if (serve->parsed()) {
      std::vector<std::string> given;
      if (serve->count("--backend") > 0) given.push_back("--backend");
      return cmd_serve(serve_args, given);
    }
    if (bench->parsed()) return cmd_bench(bench_args);
    if (edit->parsed()) return cmd_edit(edit_args);
  } catch (const ef::Error& e) {
    std::cerr << "error: " << ef::to_string(e.code()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
