#include "exprforge/settings.hpp"

#include <fstream>
#include <sstream>

#include "exprforge/error.hpp"
#include "exprforge/json_io.hpp"

namespace exprforge {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

BackendKind parse_backend_kind(const std::string& s) {
  if (s == "stub") return BackendKind::stub;
  if (s == "http") return BackendKind::http;
  if (s == "timing") return BackendKind::timing;
  throw Error(ErrorCode::ParamOutOfRange, "backend.kind must be stub, http or timing", "backend.kind");
}

template <typename T>
T get_field(const json& j, const char* name, const std::string& path) {
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ParamOutOfRange, "field '" + path + "' has the wrong type", path);
  }
}

}  // namespace

json settings_to_json(const Settings& s) {
  json loras = json::array();
  for (const auto& l : s.loras) loras.push_back(to_json(l));
  json delays = json::array();
  for (auto d : s.backend.timing_delays) delays.push_back(d.count());
  json headers = json::object();
  for (const auto& [k, v] : s.backend.http.extra_headers) headers[k] = v;
  return {
      {"prompt_prefix", s.prompt.prefix},
      {"prompt_suffix", s.prompt.suffix},
      {"defaults", to_json(s.defaults)},
      {"backend",
       {{"kind", to_string(s.backend.kind)},
        {"stub_mode", to_string(s.backend.stub_mode)},
        {"stub_edge_width", s.backend.stub_edge_width},
        {"timing_delays_ms", delays},
        {"http",
         {{"base_url", s.backend.http.base_url},
          {"endpoint_path", s.backend.http.endpoint_path},
          {"timeout_s", static_cast<double>(s.backend.http.timeout.count()) / 1000.0},
          {"model_name", s.backend.http.model_name},
          {"controlnet_model", s.backend.http.controlnet_model},
          {"extra_headers", headers},
          {"concurrent", s.backend.http.concurrent}}}}},
      {"loras", loras},
      {"diff_threshold", s.diff_threshold},
      {"crop_padding", s.crop_padding},
      {"canny", {{"low", s.canny.low}, {"high", s.canny.high}, {"sigma", s.canny.sigma}}},
      {"job_cap", s.job_cap},
  };
}

Settings settings_from_json(const json& j, const Settings& base) {
  if (!j.is_object()) throw Error(ErrorCode::ParamOutOfRange, "settings must be a JSON object", "settings");
  Settings s = base;
  if (j.contains("prompt_prefix")) s.prompt.prefix = get_field<std::string>(j, "prompt_prefix", "prompt_prefix");
  if (j.contains("prompt_suffix")) s.prompt.suffix = get_field<std::string>(j, "prompt_suffix", "prompt_suffix");
  if (j.contains("defaults")) s.defaults = hyper_params_from_json(j["defaults"], s.defaults);
  if (j.contains("backend")) {
    const json& b = j["backend"];
    if (!b.is_object()) throw Error(ErrorCode::ParamOutOfRange, "backend must be an object", "backend");
    if (b.contains("kind")) s.backend.kind = parse_backend_kind(get_field<std::string>(b, "kind", "backend.kind"));
    if (b.contains("stub_mode")) s.backend.stub_mode = parse_stub_mode(get_field<std::string>(b, "stub_mode", "backend.stub_mode"));
    if (b.contains("stub_edge_width")) s.backend.stub_edge_width = get_field<int>(b, "stub_edge_width", "backend.stub_edge_width");
    if (b.contains("timing_delays_ms")) {
      s.backend.timing_delays.clear();
      for (auto v : get_field<std::vector<long long>>(b, "timing_delays_ms", "backend.timing_delays_ms")) {
        s.backend.timing_delays.emplace_back(v);
      }
    }
    if (b.contains("http")) {
      const json& h = b["http"];
      auto& c = s.backend.http;
      if (h.contains("base_url")) c.base_url = get_field<std::string>(h, "base_url", "backend.http.base_url");
      if (h.contains("endpoint_path")) c.endpoint_path = get_field<std::string>(h, "endpoint_path", "backend.http.endpoint_path");
      if (h.contains("timeout_s")) {
        c.timeout = std::chrono::milliseconds(
            static_cast<long long>(get_field<double>(h, "timeout_s", "backend.http.timeout_s") * 1000.0));
      }
      if (h.contains("model_name")) c.model_name = get_field<std::string>(h, "model_name", "backend.http.model_name");
      if (h.contains("controlnet_model")) {
        c.controlnet_model = get_field<std::string>(h, "controlnet_model", "backend.http.controlnet_model");
      }
      if (h.contains("extra_headers")) {
        c.extra_headers = get_field<std::map<std::string, std::string>>(h, "extra_headers", "backend.http.extra_headers");
      }
      if (h.contains("concurrent")) c.concurrent = get_field<bool>(h, "concurrent", "backend.http.concurrent");
    }
  }
  if (j.contains("loras")) {
    s.loras.clear();
    if (!j["loras"].is_array()) throw Error(ErrorCode::ParamOutOfRange, "loras must be an array", "loras");
    for (const auto& l : j["loras"]) s.loras.push_back(lora_from_json(l));
  }
  if (j.contains("diff_threshold")) s.diff_threshold = get_field<int>(j, "diff_threshold", "diff_threshold");
  if (j.contains("crop_padding")) s.crop_padding = get_field<int>(j, "crop_padding", "crop_padding");
  if (j.contains("canny")) {
    const json& c = j["canny"];
    if (c.contains("low")) s.canny.low = get_field<double>(c, "low", "canny.low");
    if (c.contains("high")) s.canny.high = get_field<double>(c, "high", "canny.high");
    if (c.contains("sigma")) s.canny.sigma = get_field<double>(c, "sigma", "canny.sigma");
  }
  if (j.contains("job_cap")) s.job_cap = get_field<std::size_t>(j, "job_cap", "job_cap");
  validate_settings(s);
  return s;
}

void validate_settings(const Settings& s) {
  validate_params(s.defaults);
  for (const auto& l : s.loras) {
    if (l.name.empty()) throw Error(ErrorCode::ParamOutOfRange, "registered LoRAs need a name", "loras.name");
    validate_lora(l);
  }
  if (s.diff_threshold < 1) throw Error(ErrorCode::ParamOutOfRange, "diff_threshold must be >= 1", "diff_threshold");
  if (s.crop_padding < 0) throw Error(ErrorCode::ParamOutOfRange, "crop_padding must be >= 0", "crop_padding");
  if (s.canny.low < 0 || s.canny.high < s.canny.low || s.canny.sigma < 0) {
    throw Error(ErrorCode::ParamOutOfRange, "canny thresholds must satisfy 0 <= low <= high", "canny");
  }
  if (s.job_cap < 1) throw Error(ErrorCode::ParamOutOfRange, "job_cap must be >= 1", "job_cap");
  if (s.backend.stub_edge_width < 1) {
    throw Error(ErrorCode::ParamOutOfRange, "stub_edge_width must be >= 1", "backend.stub_edge_width");
  }
  for (auto d : s.backend.timing_delays) {
    if (d.count() < 0) throw Error(ErrorCode::ParamOutOfRange, "timing delays must be >= 0", "backend.timing_delays_ms");
  }
  if (s.backend.kind == BackendKind::http && s.backend.http.base_url.empty()) {
    throw Error(ErrorCode::ParamOutOfRange, "http backend needs backend.http.base_url", "backend.http.base_url");
  }
  if (s.backend.http.timeout.count() <= 0) {
    throw Error(ErrorCode::ParamOutOfRange, "backend.http.timeout_s must be > 0", "backend.http.timeout_s");
  }
}

Settings apply_settings_patch(const Settings& current, const json& patch) {
  if (!patch.is_object()) throw Error(ErrorCode::ParamOutOfRange, "settings patch must be a JSON object", "settings");
  json merged = settings_to_json(current);
  // Hyperparameters may be given at the top level as a shorthand for "defaults".
  json normalized = json::object();
  for (const auto& [key, value] : patch.items()) {
    if (key == "denoising_strength" || key == "controlnet_steps" || key == "sampling_steps" || key == "cfg_scale" ||
        key == "seed") {
      normalized["defaults"][key] = value;
    } else if (merged.contains(key)) {
      if (key == "defaults" && value.is_object()) {
        for (const auto& [k, v] : value.items()) normalized["defaults"][k] = v;
      } else {
        normalized[key] = value;
      }
    } else {
      throw Error(ErrorCode::ParamOutOfRange, "unknown settings field '" + key + "'", key);
    }
  }
  merged.merge_patch(normalized);
  return settings_from_json(merged, Settings{});
}

Settings load_settings(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open settings " + path.string(), path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("settings file is not valid JSON: ") + e.what());
  }
  return settings_from_json(j);
}

void save_settings(const fs::path& path, const Settings& s) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + tmp.string(), tmp.string());
    out << settings_to_json(s).dump(2) << '\n';
  }
  fs::rename(tmp, path);
}

std::shared_ptr<GenerationBackend> make_backend(const BackendSettings& s) {
  switch (s.kind) {
    case BackendKind::stub: return std::make_shared<StubBackend>(s.stub_mode, s.stub_edge_width);
    case BackendKind::http: return std::make_shared<HttpBackend>(s.http);
    case BackendKind::timing: return std::make_shared<TimingBackend>(s.timing_delays);
  }
  return std::make_shared<StubBackend>();
}

}  // namespace exprforge
