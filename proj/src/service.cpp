#include "exprforge/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <fstream>

#include "exprforge/error.hpp"
#include "exprforge/json_io.hpp"
#include "exprforge/png_io.hpp"

namespace exprforge {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
  }
  return "queued";
}

json to_json(const EditJob& job) {
  json j = {
      {"id", job.id},
      {"state", to_string(job.state)},
      {"request",
       {{"width", job.width},
        {"height", job.height},
        {"selected_pixels", job.selected_pixels},
        {"prompt", job.prompt},
        {"params", to_json(job.params)}}},
  };
  if (job.latency_ms) j["latency_ms"] = *job.latency_ms;
  if (job.metadata) {
    j["metadata"] = {{"seed", job.metadata->seed},
                     {"backend_id", job.metadata->backend_id},
                     {"latency_ms", job.metadata->latency_ms},
                     {"request_hash", job.metadata->request_hash}};
  }
  if (job.state == JobState::done) {
    j["layer_url"] = "/api/edits/" + job.id + "/layer.png";
    j["composite_url"] = "/api/edits/" + job.id + "/composite.png";
  }
  if (job.state == JobState::failed) {
    j["error"] = job.error;
    j["error_code"] = job.error_code;
  }
  return j;
}

namespace {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::EndpointUnavailable: return 502;
    case ErrorCode::Timeout: return 504;
    case ErrorCode::BackendError:
    case ErrorCode::MalformedResponse:
    case ErrorCode::DimensionMismatchFromBackend: return 500;
    case ErrorCode::MissingFile: return 404;
    default: return 400;
  }
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message,
                const std::string& subject = {}) {
  json body = {{"error", code}, {"message", message}};
  if (!subject.empty()) body["field"] = subject;
  send_json(res, status, body);
}

void send_error(httplib::Response& res, const Error& e) {
  send_error(res, http_status(e.code()), to_string(e.code()), e.what(), e.subject());
}

std::vector<std::uint8_t> file_bytes(const httplib::Request& req, const char* key) {
  const auto& content = req.get_file_value(key).content;
  return {content.begin(), content.end()};
}

json parse_body(const std::string& body) {
  try {
    return body.empty() ? json::object() : json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("request body is not valid JSON: ") + e.what());
  }
}

bool parse_flag(const std::string& v, bool& out) {
  if (v == "true" || v == "1") {
    out = true;
    return true;
  }
  if (v == "false" || v == "0") {
    out = false;
    return true;
  }
  return false;
}

bool contains(std::string_view hay, std::string_view needle) { return hay.find(needle) != std::string_view::npos; }

}  // namespace

Service::Service(ExpressionDatabase db, Settings settings, ServiceOptions options)
    : db_(std::move(db)), index_(db_), options_(std::move(options)), settings_(std::move(settings)) {
  validate_settings(settings_);
  backend_ = make_backend(settings_.backend);
  fs::create_directories(options_.run_dir / "jobs");
  fs::create_directories(options_.run_dir / "diffs");
  const int n = std::max(options_.workers, 1);
  for (int i = 0; i < n; ++i) workers_.emplace_back([this] { worker_loop(); });
}

Service::~Service() {
  {
    std::lock_guard lock(jobs_mutex_);
    stopping_ = true;
  }
  jobs_cv_.notify_all();
  for (auto& t : workers_) t.join();
}

Settings Service::settings() const {
  std::shared_lock lock(settings_mutex_);
  return settings_;
}

std::shared_ptr<GenerationBackend> Service::backend() const {
  std::shared_lock lock(settings_mutex_);
  return backend_;
}

Settings Service::update_settings(const json& patch) {
  std::unique_lock lock(settings_mutex_);
  Settings next = apply_settings_patch(settings_, patch);
  std::shared_ptr<GenerationBackend> next_backend = backend_;
  if (settings_to_json(next)["backend"] != settings_to_json(settings_)["backend"]) {
    next_backend = make_backend(next.backend);
  }
  if (options_.settings_path) save_settings(*options_.settings_path, next);
  settings_ = next;
  backend_ = std::move(next_backend);
  return settings_;
}

std::string Service::next_id(const char* prefix) {
  // Caller holds jobs_mutex_.
  ++counter_;
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  const auto stamp = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%llx-%llu", prefix, static_cast<unsigned long long>(stamp),
                static_cast<unsigned long long>(counter_));
  return buf;
}

fs::path Service::job_dir(const std::string& id) const { return options_.run_dir / "jobs" / id; }

EditRequest Service::parse_edit_request(const std::vector<std::uint8_t>& image_png,
                                        const std::vector<std::uint8_t>& mask_png, const json& params) const {
  const Settings s = settings();
  if (!params.is_object()) throw Error(ErrorCode::SchemaViolation, "params must be a JSON object", "params");
  EditRequest req;
  req.image = decode_png(image_png);
  req.mask = decode_mask_png(mask_png);

  if (auto it = params.find("prompt"); it != params.end()) {
    if (!it->is_string()) throw Error(ErrorCode::SchemaViolation, "prompt must be a string", "prompt");
    req.prompt = it->get<std::string>();
  } else if (auto tags = params.find("tags"); tags != params.end()) {
    if (!tags->is_array()) throw Error(ErrorCode::SchemaViolation, "tags must be an array of strings", "tags");
    std::vector<std::string> names;
    for (const auto& t : *tags) {
      if (!t.is_string()) throw Error(ErrorCode::SchemaViolation, "tags must be an array of strings", "tags");
      names.push_back(t.get<std::string>());
    }
    req.prompt = assemble_prompt(s.prompt, names);
  }
  if (auto it = params.find("negative_prompt"); it != params.end() && it->is_string()) {
    req.negative_prompt = it->get<std::string>();
  }
  req.params = s.defaults;
  if (auto it = params.find("params"); it != params.end()) req.params = hyper_params_from_json(*it, s.defaults);
  if (auto it = params.find("loras"); it != params.end()) {
    if (!it->is_array()) throw Error(ErrorCode::SchemaViolation, "loras must be an array", "loras");
    for (const auto& l : *it) {
      if (l.is_string()) {
        const auto name = l.get<std::string>();
        auto found = std::find_if(s.loras.begin(), s.loras.end(), [&](const LoRAConfig& c) { return c.name == name; });
        if (found == s.loras.end()) throw Error(ErrorCode::ParamOutOfRange, "unknown LoRA '" + name + "'", "loras");
        req.loras.push_back(*found);
      } else {
        req.loras.push_back(lora_from_json(l));
      }
    }
  }
  if (auto it = params.find("context_dots"); it != params.end()) {
    if (!it->is_array()) throw Error(ErrorCode::SchemaViolation, "context_dots must be an array of [x, y]", "context_dots");
    for (const auto& d : *it) {
      if (!d.is_array() || d.size() != 2 || !d[0].is_number_integer() || !d[1].is_number_integer()) {
        throw Error(ErrorCode::SchemaViolation, "context_dots must be an array of [x, y]", "context_dots");
      }
      req.context_dots.push_back({d[0].get<int>(), d[1].get<int>()});
    }
  }
  return req;
}

std::string Service::submit(EditRequest request) {
  validate_request(request);
  std::string id;
  {
    std::lock_guard lock(jobs_mutex_);
    id = next_id("job-");
    JobRecord rec;
    rec.info.id = id;
    rec.info.width = request.image.width();
    rec.info.height = request.image.height();
    rec.info.selected_pixels = request.mask.count();
    rec.info.prompt = request.prompt;
    rec.info.params = request.params;
    rec.accepted = std::chrono::steady_clock::now();
    rec.request = std::move(request);
    jobs_.emplace(id, std::move(rec));
    lru_.push_front(id);
    queue_.push_back(id);
    evict_locked();
  }
  jobs_cv_.notify_all();
  return id;
}

void Service::worker_loop() {
  for (;;) {
    std::string id;
    {
      std::unique_lock lock(jobs_mutex_);
      jobs_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      id = queue_.front();
      queue_.pop_front();
    }
    process(id);
  }
}

void Service::process(const std::string& id) {
  EditRequest req;
  std::chrono::steady_clock::time_point accepted;
  {
    std::lock_guard lock(jobs_mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end() || !it->second.request) return;
    req = std::move(*it->second.request);
    it->second.request.reset();
    it->second.info.state = JobState::running;
    accepted = it->second.accepted;
  }
  jobs_cv_.notify_all();

  const Settings s = settings();
  PipelineOptions opts;
  opts.crop_padding = s.crop_padding;
  opts.canny = s.canny;
  auto be = backend();

  EditJob update;
  try {
    EditResult result = run_edit(req, *be, opts);
    const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - accepted);
    const fs::path dir = job_dir(id);
    fs::create_directories(dir);
    write_file_bytes(dir / "layer.png", encode_png(result.layer.pixels));
    write_file_bytes(dir / "composite.png", encode_png(result.composited_preview));
    update.state = JobState::done;
    update.latency_ms = latency.count();
    update.metadata = result.layer.metadata;
  } catch (const Error& e) {
    update.state = JobState::failed;
    update.error = e.what();
    update.error_code = std::string(to_string(e.code()));
  } catch (const std::exception& e) {
    update.state = JobState::failed;
    update.error = e.what();
    update.error_code = "BackendError";
  }

  {
    std::lock_guard lock(jobs_mutex_);
    auto it = jobs_.find(id);
    if (it != jobs_.end()) {
      auto& info = it->second.info;
      info.state = update.state;
      info.latency_ms = update.latency_ms;
      info.metadata = update.metadata;
      info.error = update.error;
      info.error_code = update.error_code;
      std::ofstream(job_dir(id) / "job.json") << to_json(info).dump(2);
    }
    evict_locked();
  }
  jobs_cv_.notify_all();
}

void Service::touch_locked(const std::string& id) {
  auto it = std::find(lru_.begin(), lru_.end(), id);
  if (it != lru_.end()) lru_.splice(lru_.begin(), lru_, it);
}

void Service::evict_locked() {
  std::size_t cap = settings().job_cap;
  // Only finished jobs are evictable; walk from least recently used.
  auto it = lru_.end();
  while (jobs_.size() > cap && it != lru_.begin()) {
    --it;
    auto rec = jobs_.find(*it);
    if (rec == jobs_.end()) {
      it = lru_.erase(it);
      continue;
    }
    const auto state = rec->second.info.state;
    if (state == JobState::done || state == JobState::failed) {
      std::error_code ec;
      fs::remove_all(job_dir(*it), ec);
      jobs_.erase(rec);
      it = lru_.erase(it);
    }
  }
}

std::optional<EditJob> Service::job(const std::string& id) {
  std::lock_guard lock(jobs_mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  touch_locked(id);
  return it->second.info;
}

std::optional<EditJob> Service::wait(const std::string& id, std::chrono::milliseconds timeout) {
  std::unique_lock lock(jobs_mutex_);
  jobs_cv_.wait_for(lock, timeout, [&] {
    auto it = jobs_.find(id);
    return it == jobs_.end() || it->second.info.state == JobState::done || it->second.info.state == JobState::failed;
  });
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second.info;
}

std::optional<std::vector<std::uint8_t>> Service::artifact(const std::string& id, const std::string& name) {
  {
    std::lock_guard lock(jobs_mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end() || it->second.info.state != JobState::done) return std::nullopt;
    touch_locked(id);
  }
  try {
    return read_file_bytes(job_dir(id) / name);
  } catch (const Error&) {
    return std::nullopt;
  }
}

void Service::mount(httplib::Server& server) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  server.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}});
  });

  server.Get("/api/tags", [this](const httplib::Request& req, httplib::Response& res) {
    std::optional<bool> flag;
    if (req.has_param("transformation_free")) {
      bool v = false;
      if (!parse_flag(req.get_param_value("transformation_free"), v)) {
        send_error(res, 400, "BadRequest", "transformation_free must be true or false", "transformation_free");
        return;
      }
      flag = v;
    }
    const std::string q = req.has_param("q") ? req.get_param_value("q") : std::string();
    json out = json::array();
    for (const auto& t : db_.tags()) {
      if (flag && t.transformation_free != *flag) continue;
      if (!q.empty()) {
        bool hit = contains(t.name, q);
        for (const auto& a : t.aliases) hit = hit || contains(a.text, q);
        if (!hit) continue;
      }
      json aliases = json::array();
      for (const auto& a : t.aliases) aliases.push_back({{"text", a.text}, {"language", to_string(a.language)}});
      out.push_back({{"name", t.name},
                     {"definition", t.definition},
                     {"aliases", aliases},
                     {"transformation_free", t.transformation_free},
                     {"story_count", t.stories.size()}});
    }
    send_json(res, 200, out);
  });

  server.Post("/api/retrieve", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      const json body = parse_body(req.body);
      RetrievalQuery q;
      q.text = body.value("text", std::string());
      q.k = body.value("k", 5);
      if (q.text.find_first_not_of(" \t\r\n") == std::string::npos) {
        send_error(res, 400, "BadRequest", "text must be non-empty", "text");
        return;
      }
      if (q.k < 1) {
        send_error(res, 400, "BadRequest", "k must be >= 1", "k");
        return;
      }
      const bool use_llm = body.value("use_llm", false);
      const bool allow_fallback = body.value("allow_fallback", false);
      std::vector<ScoredTag> tags;
      bool degraded = false;
      std::string mode = "lexical";
      if (use_llm) {
        try {
          if (!options_.llm) throw Error(ErrorCode::EndpointUnavailable, "no LLM endpoint configured");
          ChatCompletionClient client(*options_.llm);
          auto r = retrieve_via_llm(db_, index_, q, client);
          tags = std::move(r.tags);
          degraded = r.degraded;
          mode = "llm";
        } catch (const Error& e) {
          if (!allow_fallback) throw;
          tags = retrieve(index_, q);
          degraded = true;
        }
      } else {
        tags = retrieve(index_, q);
      }
      json results = json::array();
      for (std::size_t i = 0; i < tags.size(); ++i) results.push_back(to_json(tags[i], static_cast<int>(i + 1)));
      send_json(res, 200, {{"results", results}, {"mode", mode}, {"degraded", degraded}});
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const json::exception& e) {
      send_error(res, 400, "BadRequest", e.what());
    }
  });

  server.Post("/api/edits", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      if (!req.has_file("image") || !req.has_file("mask")) {
        send_error(res, 400, "BadRequest", "multipart parts 'image' and 'mask' are required");
        return;
      }
      const json params = req.has_file("params") ? parse_body(req.get_file_value("params").content) : json::object();
      EditRequest edit = parse_edit_request(file_bytes(req, "image"), file_bytes(req, "mask"), params);
      const std::string id = submit(std::move(edit));
      send_json(res, 202, {{"id", id}, {"status_url", "/api/edits/" + id}});
    } catch (const Error& e) {
      send_error(res, e);
    }
  });

  server.Get(R"(/api/edits/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto j = job(req.matches[1]);
    if (!j) {
      send_error(res, 410, "UnknownJob", "no such job (unknown or evicted)");
      return;
    }
    send_json(res, 200, to_json(*j));
  });

  server.Get(R"(/api/edits/([^/]+)/(layer|composite)\.png)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    auto j = job(id);
    if (!j) {
      send_error(res, 410, "UnknownJob", "no such job (unknown or evicted)");
      return;
    }
    if (j->state != JobState::done) {
      send_error(res, 409, "NotReady", "job is " + std::string(to_string(j->state)));
      return;
    }
    auto bytes = artifact(id, std::string(req.matches[2]) + ".png");
    if (!bytes) {
      send_error(res, 410, "UnknownJob", "artifact no longer available");
      return;
    }
    res.set_content(std::string(bytes->begin(), bytes->end()), "image/png");
  });

  server.Post("/api/diff", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      if (!req.has_file("original") || !req.has_file("edited")) {
        send_error(res, 400, "BadRequest", "multipart parts 'original' and 'edited' are required");
        return;
      }
      const RasterImage a = decode_png(file_bytes(req, "original"));
      const RasterImage b = decode_png(file_bytes(req, "edited"));
      std::optional<SelectionMask> mask;
      if (req.has_file("mask")) mask = decode_mask_png(file_bytes(req, "mask"));
      int threshold = settings().diff_threshold;
      if (req.has_file("threshold")) {
        try {
          threshold = std::stoi(req.get_file_value("threshold").content);
        } catch (const std::exception&) {
          throw Error(ErrorCode::ParamOutOfRange, "threshold must be an integer", "threshold");
        }
      }
      if (threshold < 1) throw Error(ErrorCode::ParamOutOfRange, "threshold must be >= 1", "threshold");
      const DiffMap map = l1_map(a, b);
      const DiffStats st = stats(map, mask ? &*mask : nullptr);
      const auto png = encode_png(render_grayscale(map, threshold));

      std::string id;
      {
        std::lock_guard lock(jobs_mutex_);
        id = next_id("diff-");
        diffs_.push_back(id);
        while (diffs_.size() > settings().job_cap) {
          std::error_code ec;
          fs::remove(options_.run_dir / "diffs" / (diffs_.front() + ".png"), ec);
          diffs_.pop_front();
        }
      }
      write_file_bytes(options_.run_dir / "diffs" / (id + ".png"), png);
      send_json(res, 200,
                {{"id", id},
                 {"threshold", threshold},
                 {"stats", json::parse(stats_to_json(st))},
                 {"heatmap_url", "/api/diffs/" + id + "/heatmap.png"}});
    } catch (const Error& e) {
      send_error(res, e);
    }
  });

  server.Get(R"(/api/diffs/([^/]+)/heatmap\.png)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    {
      std::lock_guard lock(jobs_mutex_);
      if (std::find(diffs_.begin(), diffs_.end(), id) == diffs_.end()) {
        send_error(res, 410, "UnknownDiff", "no such diff (unknown or evicted)");
        return;
      }
    }
    try {
      auto bytes = read_file_bytes(options_.run_dir / "diffs" / (id + ".png"));
      res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
    } catch (const Error&) {
      send_error(res, 410, "UnknownDiff", "heatmap no longer available");
    }
  });

  server.Post("/api/transform", [](const httplib::Request& req, httplib::Response& res) {
    try {
      if (!req.has_file("image") || !req.has_file("mask")) {
        send_error(res, 400, "BadRequest", "multipart parts 'image' and 'mask' are required");
        return;
      }
      const json p = req.has_file("params") ? parse_body(req.get_file_value("params").content) : json::object();
      const RasterImage image = decode_png(file_bytes(req, "image"));
      const SelectionMask mask = decode_mask_png(file_bytes(req, "mask"));
      Rgba fill = kWhite;
      if (auto it = p.find("fill"); it != p.end()) {
        if (!it->is_array() || it->size() != 4) throw Error(ErrorCode::ParamOutOfRange, "fill must be [r,g,b,a]", "fill");
        for (std::size_t i = 0; i < 4; ++i) fill[i] = static_cast<std::uint8_t>(std::clamp((*it)[i].get<int>(), 0, 255));
      }
      const RasterImage out =
          apply_region_transform(image, mask, p.value("scale", 1.0), p.value("dx", 0.0), p.value("dy", 0.0), fill);
      const auto bytes = encode_png(out);
      res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const json::exception& e) {
      send_error(res, 400, "BadRequest", e.what());
    }
  });

  server.Get("/api/settings", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, settings_to_json(settings()));
  });

  server.Put("/api/settings", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      send_json(res, 200, settings_to_json(update_settings(parse_body(req.body))));
    } catch (const Error& e) {
      send_error(res, 400, to_string(e.code()), e.what(), e.subject());
    }
  });
}

void serve(Service& service, const std::string& host, int port, const std::function<void(int)>& on_ready) {
  httplib::Server server;
  service.mount(server);
  int bound = port;
  if (port == 0) {
    bound = server.bind_to_any_port(host);
  } else if (!server.bind_to_port(host, port)) {
    throw Error(ErrorCode::EndpointUnavailable, "cannot bind " + host + ":" + std::to_string(port));
  }
  if (on_ready) on_ready(bound);
  server.listen_after_bind();
}

}  // namespace exprforge
