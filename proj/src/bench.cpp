#include "exprforge/bench.hpp"

#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>

#include "exprforge/backends.hpp"
#include "exprforge/error.hpp"
#include "exprforge/json_io.hpp"

namespace exprforge {

using json = nlohmann::json;

double sample_mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double mean = sample_mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

LatencyReport LatencyReport::from_runs(std::string label, std::vector<double> runs) {
  LatencyReport r;
  r.label = std::move(label);
  r.mean_ms = sample_mean(runs);
  r.std_ms = sample_std(runs);
  r.n = runs.size();
  r.runs_ms = std::move(runs);
  return r;
}

LatencyReport run_benchmark(GenerationBackend& backend, const EditRequest& request, int n, std::string label,
                            const PipelineOptions& options, int warmup_runs) {
  if (n < 2) throw Error(ErrorCode::ParamOutOfRange, "benchmark needs at least 2 runs", "runs");
  for (int i = 0; i < warmup_runs; ++i) (void)run_edit(request, backend, options);
  std::vector<double> runs;
  runs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    try {
      runs.push_back(run_edit(request, backend, options).layer.metadata.latency_ms);
    } catch (const Error& e) {
      throw Error(e.code(), "run " + std::to_string(i + 1) + ": " + e.what(), e.subject());
    }
  }
  return LatencyReport::from_runs(std::move(label), std::move(runs));
}

std::vector<Comparison> compare(const std::vector<LatencyReport>& reports) {
  if (reports.size() < 2) throw Error(ErrorCode::ParamOutOfRange, "compare needs at least two reports", "reports");
  const double base = reports.front().mean_ms;
  std::vector<Comparison> out;
  for (const auto& r : reports) {
    const double change = base > 0.0 ? (base - r.mean_ms) / base : 0.0;
    out.push_back({r.label, r.mean_ms, change});
  }
  return out;
}

std::string format_percent(double fraction) {
  long pct = std::lround(fraction * 100.0);
  if (pct == 0) pct = 0;  // no "-0%"
  return std::to_string(pct) + "%";
}

std::string render_table(const std::vector<LatencyReport>& reports) {
  std::size_t label_width = 6;
  for (const auto& r : reports) label_width = std::max(label_width, r.label.size());
  std::vector<Comparison> cmp;
  if (reports.size() >= 2) cmp = compare(reports);

  std::string out;
  char line[512];
  std::snprintf(line, sizeof(line), "%-*s %4s %12s %10s %10s\n", static_cast<int>(label_width), "config", "n",
                "mean (ms)", "std (ms)", "reduction");
  out += line;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    const std::string change = (i == 0 || cmp.empty()) ? "-" : format_percent(cmp[i].reduction);
    std::snprintf(line, sizeof(line), "%-*s %4zu %12.2f %10.2f %10s\n", static_cast<int>(label_width),
                  r.label.c_str(), r.n, r.mean_ms, r.std_ms, change.c_str());
    out += line;
  }
  return out;
}

std::string reports_to_json(const std::vector<LatencyReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) {
    arr.push_back({{"label", r.label}, {"n", r.n}, {"mean_ms", r.mean_ms}, {"std_ms", r.std_ms}, {"runs_ms", r.runs_ms}});
  }
  json doc = {{"reports", arr}};
  if (reports.size() >= 2) {
    json cmp = json::array();
    for (const auto& c : compare(reports)) {
      cmp.push_back({{"label", c.label}, {"reduction", c.reduction}, {"reduction_pct", format_percent(c.reduction)}});
    }
    doc["comparison"] = cmp;
  }
  return doc.dump(2);
}

std::vector<LatencyReport> reports_from_json(const std::string& text) {
  std::vector<LatencyReport> out;
  try {
    const json doc = json::parse(text);
    for (const auto& r : doc.at("reports")) {
      LatencyReport rep;
      rep.label = r.at("label").get<std::string>();
      rep.runs_ms = r.at("runs_ms").get<std::vector<double>>();
      rep.n = r.at("n").get<std::size_t>();
      rep.mean_ms = r.at("mean_ms").get<double>();
      rep.std_ms = r.at("std_ms").get<double>();
      out.push_back(std::move(rep));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("invalid latency report: ") + e.what());
  }
  return out;
}

EditRequest make_bench_request(int size) {
  if (size < 8) throw Error(ErrorCode::ParamOutOfRange, "benchmark image size must be >= 8", "size");
  EditRequest req;
  req.image = RasterImage(size, size);
  req.mask = SelectionMask(size, size);
  const double c = (size - 1) / 2.0;
  const double face = size * 0.3;
  const double sel = size * 0.25;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double d = std::hypot(x - c, y - c);
      Rgba px{static_cast<std::uint8_t>(200 - 100 * y / size), static_cast<std::uint8_t>(180), static_cast<std::uint8_t>(220), 255};
      if (d < face) px = {250, 220, 200, 255};
      req.image.set(x, y, px);
      req.mask.set(x, y, d <= sel);
    }
  }
  req.prompt = "1girl, smile";
  req.params.seed = 1234;
  return req;
}

std::vector<BenchConfigEntry> parse_bench_config(const std::string& text) {
  std::vector<BenchConfigEntry> out;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("bench config is not valid JSON: ") + e.what());
  }
  if (!doc.contains("configs") || !doc["configs"].is_array()) {
    throw Error(ErrorCode::SchemaViolation, "bench config needs a 'configs' array", "configs");
  }
  for (const auto& c : doc["configs"]) {
    BenchConfigEntry e;
    e.label = c.value("label", std::string("config ") + std::to_string(out.size() + 1));
    e.params = hyper_params_from_json(c);
    if (auto it = c.find("loras"); it != c.end()) {
      for (const auto& l : *it) e.loras.push_back(lora_from_json(l));
    }
    if (auto it = c.find("delay_ms"); it != c.end()) {
      if (it->is_number()) {
        e.delays.emplace_back(it->get<long long>());
      } else if (it->is_array()) {
        for (const auto& d : *it) e.delays.emplace_back(d.get<long long>());
      }
    }
    validate_params(effective_params(e.params, e.loras));
    for (const auto& l : e.loras) validate_lora(l);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<BenchConfigEntry> default_bench_configs() {
  BenchConfigEntry full;
  full.label = "30 sampling steps";
  full.params.sampling_steps = 30;
  full.delays = {std::chrono::milliseconds(120)};

  BenchConfigEntry fast;
  fast.label = "8 sampling steps (speed-up LoRA)";
  fast.params.sampling_steps = 30;
  LoRAConfig lightning;
  lightning.name = "sdxl-lightning-8step";
  lightning.trigger_words = {"lightning"};
  lightning.step_override = 8;
  lightning.cfg_override = 2.0;
  fast.loras = {lightning};
  fast.delays = {std::chrono::milliseconds(32)};
  return {full, fast};
}

}  // namespace exprforge
