#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "exprforge/expression_db.hpp"
#include "exprforge/llm_client.hpp"
#include "exprforge/retrieval.hpp"
#include "exprforge/settings.hpp"

namespace httplib {
class Server;
}

namespace exprforge {

enum class JobState { queued, running, done, failed };
std::string_view to_string(JobState s);

struct EditJob {
  std::string id;
  JobState state = JobState::queued;
  int width = 0;
  int height = 0;
  std::size_t selected_pixels = 0;
  std::string prompt;
  HyperParams params;
  std::optional<std::int64_t> latency_ms;  // present iff done
  std::optional<LayerMetadata> metadata;   // present iff done
  std::string error;                       // non-empty iff failed
  std::string error_code;
};

nlohmann::json to_json(const EditJob& job);

struct ServiceOptions {
  std::filesystem::path run_dir = "exprforge-run";
  std::optional<std::filesystem::path> settings_path;  // persisted on every successful PUT
  int workers = 1;                                     // generations in flight
  std::optional<LlmConfig> llm;
};

// Application state behind the HTTP API. Usable directly from C++ (tests,
// bindings) or mounted on an httplib::Server.
class Service {
 public:
  Service(ExpressionDatabase db, Settings settings, ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Registers every /api route on `server`.
  void mount(httplib::Server& server);

  Settings settings() const;
  // All-or-nothing update; throws ParamOutOfRange and leaves settings untouched.
  Settings update_settings(const nlohmann::json& patch);

  // Queues an edit; returns the job id. Validation errors throw before queueing.
  std::string submit(EditRequest request);
  std::optional<EditJob> job(const std::string& id);
  // Blocks until the job leaves queued/running or the timeout elapses.
  std::optional<EditJob> wait(const std::string& id, std::chrono::milliseconds timeout);
  std::optional<std::vector<std::uint8_t>> artifact(const std::string& id, const std::string& name);

  const ExpressionDatabase& database() const noexcept { return db_; }
  const RetrievalIndex& index() const noexcept { return index_; }

  // Builds an EditRequest from uploaded PNG bytes and the JSON "params" part.
  EditRequest parse_edit_request(const std::vector<std::uint8_t>& image_png, const std::vector<std::uint8_t>& mask_png,
                                 const nlohmann::json& params) const;

 private:
  struct JobRecord {
    EditJob info;
    std::optional<EditRequest> request;  // dropped once processed
    std::chrono::steady_clock::time_point accepted;
  };

  void worker_loop();
  void process(const std::string& id);
  void evict_locked();
  void touch_locked(const std::string& id);
  std::filesystem::path job_dir(const std::string& id) const;
  std::string next_id(const char* prefix);
  std::shared_ptr<GenerationBackend> backend() const;

  ExpressionDatabase db_;
  RetrievalIndex index_;
  ServiceOptions options_;

  mutable std::shared_mutex settings_mutex_;
  Settings settings_;
  std::shared_ptr<GenerationBackend> backend_;

  std::mutex jobs_mutex_;
  std::condition_variable jobs_cv_;
  std::map<std::string, JobRecord> jobs_;
  std::list<std::string> lru_;  // front = most recently used
  std::deque<std::string> queue_;
  std::list<std::string> diffs_;
  bool stopping_ = false;
  std::uint64_t counter_ = 0;
  std::vector<std::thread> workers_;
};

// Convenience: runs `service` on host:port until the server is stopped.
// `on_ready` receives the bound port (useful with port 0).
void serve(Service& service, const std::string& host, int port, const std::function<void(int)>& on_ready = {});

}  // namespace exprforge
