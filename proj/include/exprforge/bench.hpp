#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "exprforge/edit_pipeline.hpp"

namespace exprforge {

class GenerationBackend;

struct LatencyReport {
  std::string label;
  std::vector<double> runs_ms;
  double mean_ms = 0.0;
  double std_ms = 0.0;  // sample standard deviation (n - 1)
  std::size_t n = 0;

  // Recomputes mean and sample std from `runs`.
  static LatencyReport from_runs(std::string label, std::vector<double> runs);
};

double sample_mean(const std::vector<double>& xs);
double sample_std(const std::vector<double>& xs);

// n sequential edits after one untimed warm-up. Each run is timed from
// dispatch to layer ready. Errors are rethrown with the run index.
LatencyReport run_benchmark(GenerationBackend& backend, const EditRequest& request, int n, std::string label,
                            const PipelineOptions& options = {}, int warmup_runs = 1);

struct Comparison {
  std::string label;
  double mean_ms = 0.0;
  double reduction = 0.0;  // (baseline - this) / baseline
};

// The first report is the baseline. Requires at least two reports.
std::vector<Comparison> compare(const std::vector<LatencyReport>& reports);

// Relative change rounded to the nearest percent, e.g. "46%".
std::string format_percent(double fraction);

// Human-readable table; identical reports always render to identical text.
std::string render_table(const std::vector<LatencyReport>& reports);

std::string reports_to_json(const std::vector<LatencyReport>& reports);
std::vector<LatencyReport> reports_from_json(const std::string& text);

// A synthetic size x size portrait-like image with a centred circular selection.
EditRequest make_bench_request(int size);

struct BenchConfigEntry {
  std::string label;
  HyperParams params;
  std::vector<LoRAConfig> loras;
  std::vector<std::chrono::milliseconds> delays;  // used by the timing backend
};

// {"configs": [{"label", "sampling_steps", "cfg_scale", "loras": [...], "delay_ms": n | [..]}]}
std::vector<BenchConfigEntry> parse_bench_config(const std::string& text);

// 30 sampling steps vs 8 steps with a speed-up LoRA.
std::vector<BenchConfigEntry> default_bench_configs();

}  // namespace exprforge
