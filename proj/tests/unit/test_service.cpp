#include <doctest.h>
#include <httplib.h>

#include <nlohmann/json.hpp>
#include <thread>

#include "exprforge/diff_analyzer.hpp"
#include "exprforge/error.hpp"
#include "exprforge/png_io.hpp"
#include "exprforge/service.hpp"
#include "fixtures.hpp"

using namespace exprforge;
using json = nlohmann::json;
using namespace std::chrono_literals;

namespace {

class Harness {
 public:
  explicit Harness(Settings settings = {}, ServiceOptions options = {}) : dir_("service") {
    if (options.run_dir == ServiceOptions{}.run_dir) options.run_dir = dir_.path() / "run";
    service_ = std::make_unique<Service>(fixtures::sample_db(), std::move(settings), std::move(options));
    service_->mount(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(30, 0);
  }
  ~Harness() {
    server_.stop();
    thread_.join();
  }

  httplib::Client& http() { return *client_; }
  Service& service() { return *service_; }
  const std::filesystem::path& dir() const { return dir_.path(); }

  json get_json(const std::string& path, int expected = 200) {
    auto res = client_->Get(path);
    REQUIRE(res);
    CHECK(res->status == expected);
    return json::parse(res->body);
  }

  httplib::Result submit(const RasterImage& img, const SelectionMask& mask, const json& params) {
    const auto ib = encode_png(img);
    const auto mb = encode_mask_png(mask);
    httplib::MultipartFormDataItems items{
        {"image", std::string(ib.begin(), ib.end()), "image.png", "image/png"},
        {"mask", std::string(mb.begin(), mb.end()), "mask.png", "image/png"},
        {"params", params.dump(), "", "application/json"}};
    return client_->Post("/api/edits", items);
  }

  json poll(const std::string& id) {
    for (int i = 0; i < 600; ++i) {
      const json j = get_json("/api/edits/" + id);
      if (j["state"] == "done" || j["state"] == "failed") return j;
      std::this_thread::sleep_for(20ms);
    }
    FAIL("job did not finish");
    return {};
  }

 private:
  fixtures::TempDir dir_;
  std::unique_ptr<Service> service_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::unique_ptr<httplib::Client> client_;
};

RasterImage decode(const std::string& body) {
  return decode_png(std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
}

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("health and CORS") {
    Harness h;
    auto res = h.http().Get("/api/health");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
    auto pre = h.http().Options("/api/edits");
    REQUIRE(pre);
    CHECK(pre->status == 204);
  }

  TEST_CASE("tag listing and filters") {
    Harness h;
    const json all = h.get_json("/api/tags");
    CHECK(all.size() == fixtures::sample_db().size());
    const json free = h.get_json("/api/tags?transformation_free=true");
    const json bound = h.get_json("/api/tags?transformation_free=false");
    CHECK(free.size() + bound.size() == all.size());
    for (const auto& t : bound) CHECK(t["transformation_free"] == false);
    REQUIRE(bound.size() == 1);
    CHECK(bound[0]["name"] == "averting eyes");
    const json star = h.get_json("/api/tags?q=" + httplib::detail::encode_url("星星眼"));
    REQUIRE(star.size() == 1);
    CHECK(star[0]["name"] == "+_+");
    CHECK(star[0]["story_count"] == 4);
    h.get_json("/api/tags?transformation_free=maybe", 400);
  }

  TEST_CASE("retrieval endpoint") {
    Harness h;
    const std::string& elara = fixtures::kElaraStory;
    auto res = h.http().Post("/api/retrieve", json{{"text", elara}, {"k", 3}}.dump(), "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 200);
    const json j = json::parse(res->body);
    REQUIRE(!j["results"].empty());
    CHECK(j["results"][0]["tag"] == "+_+");
    CHECK(j["results"][0]["rank"] == 1);
    CHECK(j["mode"] == "lexical");
    CHECK(j["degraded"] == false);

    res = h.http().Post("/api/retrieve", R"({"text": "  "})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    res = h.http().Post("/api/retrieve", "{", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    res = h.http().Post("/api/retrieve", json{{"text", elara}, {"use_llm", true}}.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 502);
    res = h.http().Post("/api/retrieve", json{{"text", elara}, {"use_llm", true}, {"allow_fallback", true}}.dump(),
                        "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["degraded"] == true);
  }

  TEST_CASE("edit round trip keeps unselected pixels") {
    Harness h;
    const auto img = fixtures::portrait(80);
    const auto mask = fixtures::disc_mask(80, 80, 40, 36, 14);
    auto res = h.submit(img, mask, {{"tags", {"smile"}}, {"params", {{"seed", 9}}}});
    REQUIRE(res);
    REQUIRE(res->status == 202);
    const json accepted = json::parse(res->body);
    const std::string id = accepted["id"];
    CHECK(accepted["status_url"] == "/api/edits/" + id);
    const json done = h.poll(id);
    REQUIRE(done["state"] == "done");
    CHECK(done["metadata"]["seed"] == 9);
    CHECK(done["metadata"]["backend_id"] == "stub:procedural");
    CHECK(done["request"]["selected_pixels"] == mask.count());
    CHECK(done.contains("latency_ms"));

    auto layer = h.http().Get(done["layer_url"].get<std::string>());
    auto comp = h.http().Get(done["composite_url"].get<std::string>());
    REQUIRE(layer);
    REQUIRE(comp);
    CHECK(layer->get_header_value("Content-Type") == "image/png");
    const auto layer_img = decode(layer->body);
    const auto comp_img = decode(comp->body);
    for (int y = 0; y < 80; ++y)
      for (int x = 0; x < 80; ++x) CHECK((layer_img.at(x, y)[3] == 255) == mask.at(x, y));
    const auto s = stats(l1_map(img, comp_img), mask);
    CHECK(s.changed_outside_mask == 0);
    CHECK(s.changed_pixel_count > 0);
    CHECK(std::filesystem::exists(h.dir() / "run" / "jobs" / id / "job.json"));
  }

  TEST_CASE("edit validation errors") {
    Harness h;
    const auto img = fixtures::portrait(32);
    auto res = h.submit(img, SelectionMask(31, 32, true), json::object());
    REQUIRE(res);
    CHECK(res->status == 400);
    CHECK(json::parse(res->body)["error"] == "DimensionMismatch");
    res = h.submit(img, SelectionMask(32, 32), json::object());
    REQUIRE(res);
    CHECK(json::parse(res->body)["error"] == "EmptySelection");
    res = h.submit(img, SelectionMask(32, 32, true), {{"params", {{"denoising_strength", 1.5}}}});
    REQUIRE(res);
    CHECK(res->status == 400);
    CHECK(json::parse(res->body)["field"] == "denoising_strength");
    res = h.submit(img, SelectionMask(32, 32, true), {{"loras", {"unknown-lora"}}});
    REQUIRE(res);
    CHECK(res->status == 400);
    auto bare = h.http().Post("/api/edits", httplib::MultipartFormDataItems{});
    REQUIRE(bare);
    CHECK(bare->status == 400);
    h.get_json("/api/edits/nope", 410);
    auto missing = h.http().Get("/api/edits/nope/layer.png");
    REQUIRE(missing);
    CHECK(missing->status == 410);
  }

  TEST_CASE("artifacts are not served before the job finishes") {
    Settings s;
    s.backend.kind = BackendKind::timing;
    s.backend.timing_delays = {600ms};
    Harness h(s);
    auto res = h.submit(fixtures::portrait(24), SelectionMask(24, 24, true), json::object());
    REQUIRE(res);
    const std::string id = json::parse(res->body)["id"];
    auto early = h.http().Get("/api/edits/" + id + "/layer.png");
    REQUIRE(early);
    CHECK(early->status == 409);
    CHECK(h.poll(id)["state"] == "done");
  }

  TEST_CASE("backend failures mark the job failed") {
    httplib::Server probe;
    const int port = probe.bind_to_any_port("127.0.0.1");
    probe.stop();
    Settings s;
    s.backend.kind = BackendKind::http;
    s.backend.http.base_url = "http://127.0.0.1:" + std::to_string(port);
    s.backend.http.timeout = 500ms;
    Harness h(s);
    auto res = h.submit(fixtures::portrait(24), SelectionMask(24, 24, true), json::object());
    REQUIRE(res);
    REQUIRE(res->status == 202);
    const json j = h.poll(json::parse(res->body)["id"]);
    CHECK(j["state"] == "failed");
    CHECK(j["error_code"] == "EndpointUnavailable");
    CHECK(!j["error"].get<std::string>().empty());
  }

  TEST_CASE("diff endpoint") {
    Harness h;
    const auto img = fixtures::portrait(20);
    const auto pb = encode_png(img);
    const std::string png(pb.begin(), pb.end());
    auto res = h.http().Post("/api/diff", httplib::MultipartFormDataItems{{"original", png, "a.png", "image/png"},
                                                                          {"edited", png, "b.png", "image/png"}});
    REQUIRE(res);
    REQUIRE(res->status == 200);
    const json j = json::parse(res->body);
    CHECK(j["stats"]["changed_pixel_count"] == 0);
    CHECK(j["stats"]["max_l1"] == 0);
    CHECK(j["threshold"] == 24);
    auto heat = h.http().Get(j["heatmap_url"].get<std::string>());
    REQUIRE(heat);
    CHECK(heat->status == 200);
    const auto g = decode_gray_png(std::span(reinterpret_cast<const std::uint8_t*>(heat->body.data()), heat->body.size()));
    CHECK(g == GrayImage(20, 20, 0));

    RasterImage edited = img;
    edited.set(3, 4, {0, 0, 0, 255});
    const auto eb = encode_png(edited);
    const auto mb = encode_mask_png(fixtures::rect_mask(20, 20, 0, 0, 1, 1));
    res = h.http().Post("/api/diff", httplib::MultipartFormDataItems{{"original", png, "", "image/png"},
                                                                     {"edited", std::string(eb.begin(), eb.end()), "", ""},
                                                                     {"mask", std::string(mb.begin(), mb.end()), "", ""},
                                                                     {"threshold", "10", "", ""}});
    REQUIRE(res);
    const json k = json::parse(res->body);
    CHECK(k["stats"]["changed_pixel_count"] == 1);
    CHECK(k["stats"]["changed_outside_mask"] == 1);
    CHECK(k["threshold"] == 10);

    const auto small = encode_png(fixtures::portrait(10));
    res = h.http().Post("/api/diff", httplib::MultipartFormDataItems{
                                         {"original", png, "", ""}, {"edited", std::string(small.begin(), small.end()), "", ""}});
    REQUIRE(res);
    CHECK(res->status == 400);
    CHECK(json::parse(res->body)["error"] == "DimensionMismatch");
    auto gone = h.http().Get("/api/diffs/nope/heatmap.png");
    REQUIRE(gone);
    CHECK(gone->status == 410);
  }

  TEST_CASE("transform endpoint") {
    Harness h;
    const auto img = fixtures::portrait(24);
    const auto mask = fixtures::rect_mask(24, 24, 4, 4, 19, 19);
    const auto ib = encode_png(img);
    const auto mb = encode_mask_png(mask);
    auto res = h.http().Post("/api/transform",
                             httplib::MultipartFormDataItems{{"image", std::string(ib.begin(), ib.end()), "", ""},
                                                             {"mask", std::string(mb.begin(), mb.end()), "", ""},
                                                             {"params", R"({"scale": 0.5, "dx": 1, "fill": [0,0,0,255]})", "", ""}});
    REQUIRE(res);
    REQUIRE(res->status == 200);
    CHECK(decode(res->body) == apply_region_transform(img, mask, 0.5, 1, 0, Rgba{0, 0, 0, 255}));
  }

  TEST_CASE("settings endpoint") {
    fixtures::TempDir dir("settings-endpoint");
    ServiceOptions opts;
    opts.run_dir = dir.path() / "run";
    opts.settings_path = dir.path() / "settings.json";
    Harness h({}, opts);
    const json before = h.get_json("/api/settings");
    auto res = h.http().Put("/api/settings", R"({"sampling_steps": 8})", "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 200);
    CHECK(json::parse(res->body)["defaults"]["sampling_steps"] == 8);
    CHECK(h.get_json("/api/settings")["defaults"]["sampling_steps"] == 8);
    CHECK(load_settings(*opts.settings_path).defaults.sampling_steps == 8);

    res = h.http().Put("/api/settings", R"({"denoising_strength": 1.5})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    CHECK(h.get_json("/api/settings")["defaults"]["denoising_strength"] == before["defaults"]["denoising_strength"]);
    res = h.http().Put("/api/settings", R"({"backend": {"kind": "stub", "stub_mode": "identity"}})", "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 200);

    // New jobs pick up the swapped backend.
    const auto img = fixtures::portrait(24);
    auto sub = h.submit(img, SelectionMask(24, 24, true), json::object());
    REQUIRE(sub);
    const json j = h.poll(json::parse(sub->body)["id"]);
    CHECK(j["metadata"]["backend_id"] == "stub:identity");
    CHECK(j["request"]["params"]["sampling_steps"] == 8);
  }

  TEST_CASE("finished jobs are evicted beyond the cap") {
    Settings s;
    s.job_cap = 2;
    Harness h(s);
    std::vector<std::string> ids;
    for (int i = 0; i < 4; ++i) {
      auto res = h.submit(fixtures::portrait(16), SelectionMask(16, 16, true), {{"params", {{"seed", i}}}});
      REQUIRE(res);
      ids.push_back(json::parse(res->body)["id"]);
      h.poll(ids.back());
    }
    h.get_json("/api/edits/" + ids[0], 410);
    h.get_json("/api/edits/" + ids[1], 410);
    h.get_json("/api/edits/" + ids[3]);
    CHECK_FALSE(std::filesystem::exists(h.dir() / "run" / "jobs" / ids[0]));
  }

  TEST_CASE("direct C++ use") {
    fixtures::TempDir dir("direct");
    ServiceOptions opts;
    opts.run_dir = dir.path();
    opts.workers = 2;
    Service svc(fixtures::sample_db(), {}, opts);
    std::vector<std::string> ids;
    for (int i = 0; i < 4; ++i) {
      EditRequest req;
      req.image = fixtures::portrait(24);
      req.mask = fixtures::disc_mask(24, 24, 12, 12, 5);
      req.params.seed = 100 + i;
      ids.push_back(svc.submit(req));
    }
    for (const auto& id : ids) {
      const auto j = svc.wait(id, 10s);
      REQUIRE(j);
      CHECK(j->state == JobState::done);
    }
    EditRequest bad;
    bad.image = fixtures::portrait(8);
    bad.mask = SelectionMask(8, 8);
    CHECK_THROWS_AS(svc.submit(bad), Error);
  }
}
