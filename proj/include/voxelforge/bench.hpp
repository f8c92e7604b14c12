#pragma once

// Throughput harness for the augmentation pipeline on synthetic CT-sized volumes.

#include <chrono>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "voxelforge/pipeline.hpp"

namespace vf {

struct BenchEntry {
  std::size_t batch = 0;
  std::size_t depth = 0;
  double ms_per_volume_mean = 0.0;
  double ms_per_volume_stddev = 0.0;
  double volumes_per_second = 0.0;
};

struct BenchReport {
  std::vector<BenchEntry> entries;  ///< batch-size sweep at the pipelined depth
  BenchEntry unpipelined;           ///< depth 1 at the largest batch size
  BenchEntry pipelined;             ///< pipelined depth at the largest batch size
  double pipeline_speedup = 0.0;    ///< pipelined / unpipelined throughput
  std::size_t repetitions = 0;
  std::string machine;
};

struct BenchConfig {
  std::vector<std::size_t> batch_sizes{1, 4, 16, 32};
  std::size_t repetitions = 5;
  std::size_t depth = 4;
  Dims dims{120, 120, 160};
  double spacing_mm = 3.0;
  unsigned threads = 0;
};

/// Smooth synthetic CT-like volume; `variant` shifts its pattern so repetitions use different data.
inline BatchItem synthetic_item(const Dims& d, double spacing_mm, std::size_t variant) {
  BatchItem it{Volume(d, {spacing_mm, spacing_mm, spacing_mm}), LabelMap(d, {spacing_mm, spacing_mm, spacing_mm})};
  const double phase = 0.37 * static_cast<double>(variant);
  for (std::size_t z = 0; z < d.z; ++z)
    for (std::size_t y = 0; y < d.y; ++y)
      for (std::size_t x = 0; x < d.x; ++x) {
        const double v = 400.0 * std::sin(0.11 * x + phase) * std::cos(0.07 * y - phase) + 150.0 * std::sin(0.05 * z);
        it.image(x, y, z) = static_cast<float>(v);
        it.labels(x, y, z) = static_cast<std::uint8_t>(v > 200 ? 3 : v < -200 ? 1 : 0);
      }
  return it;
}

inline std::string machine_descriptor() {
  return std::to_string(std::thread::hardware_concurrency()) + " hardware threads, " +
         std::to_string(num_threads()) + " worker threads";
}

/// Times pipeline_run: mean and stddev of ms/volume over `repetitions` distinct batches.
/// Results are kept only in a reused host buffer, mirroring write-back without retaining
/// the whole batch.
inline BenchEntry bench_once(const AugmentSpec& spec, std::size_t batch, std::size_t depth, const BenchConfig& cfg) {
  if (cfg.repetitions < 5) throw InvalidArgument("bench: at least 5 repetitions are required");
  std::vector<double> ms;
  for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
    const BatchItem base = synthetic_item(cfg.dims, cfg.spacing_mm, rep);
    std::vector<BatchItem> items(batch, base);
    Volume host(cfg.dims, base.image.spacing());
    LabelMap host_labels(cfg.dims, base.image.spacing());
    PipelineOptions opt;
    opt.depth = depth;
    opt.keep_results = false;
    opt.apply.threads = cfg.threads;
    AugmentSpec s = spec;
    s.seed = spec.seed + rep;
    const auto t0 = std::chrono::steady_clock::now();
    pipeline_run(items, s, opt, [&](std::size_t, const AugmentedPair& r) {
      std::copy(r.image.data().begin(), r.image.data().end(), host.data().begin());
      std::copy(r.labels.data().begin(), r.labels.data().end(), host_labels.data().begin());
    });
    const auto t1 = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count() / static_cast<double>(batch));
  }
  BenchEntry e;
  e.batch = batch;
  e.depth = depth;
  e.ms_per_volume_mean = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
  double var = 0.0;
  for (double v : ms) var += (v - e.ms_per_volume_mean) * (v - e.ms_per_volume_mean);
  e.ms_per_volume_stddev = std::sqrt(var / static_cast<double>(ms.size() - 1));
  e.volumes_per_second = 1000.0 / e.ms_per_volume_mean;
  return e;
}

inline BenchReport bench(const AugmentSpec& spec, const BenchConfig& cfg = {}) {
  if (cfg.batch_sizes.empty()) throw InvalidArgument("bench: batch_sizes must be nonempty");
  if (cfg.depth < 2) throw InvalidArgument("bench: pipelined depth must be >= 2");
  BenchReport r;
  r.repetitions = cfg.repetitions;
  r.machine = machine_descriptor();
  for (auto b : cfg.batch_sizes) r.entries.push_back(bench_once(spec, b, cfg.depth, cfg));
  const std::size_t largest = *std::max_element(cfg.batch_sizes.begin(), cfg.batch_sizes.end());
  r.unpipelined = bench_once(spec, largest, 1, cfg);
  r.pipelined = *std::find_if(r.entries.begin(), r.entries.end(), [&](const auto& e) { return e.batch == largest; });
  r.pipeline_speedup = r.pipelined.volumes_per_second / r.unpipelined.volumes_per_second;
  return r;
}

}  // namespace vf
