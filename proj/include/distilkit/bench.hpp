#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "distilkit/encoder.hpp"
#include "distilkit/error.hpp"

namespace distilkit {

struct BenchPlan {
  struct Entry {
    std::string label;
    ModelConfig config;
  };
  std::vector<Entry> models;
  std::vector<std::size_t> lengths = {16, 32, 64, 128, 256, 512};
  std::size_t batch_size = 1;
  std::size_t repetitions = 10;
  std::size_t warmup = 2;
  std::uint64_t seed = 42;
  int threads = 1;  // recorded in outputs; the timing loop itself is single-threaded

  void validate() const {
    if (models.empty()) throw ConfigError("bench plan has no models");
    if (lengths.empty()) throw ConfigError("bench plan has no sequence lengths");
    if (repetitions < 3) throw ConfigError("bench plan needs repetitions >= 3");
    if (batch_size < 1) throw ConfigError("bench batch size must be positive");
    for (const auto& m : models)
      for (std::size_t l : lengths)
        if (l > std::size_t(m.config.max_position))
          throw ConfigError("length " + std::to_string(l) + " exceeds max_position of model " +
                            m.label);
  }
};

struct LatencyStats {
  double median_ms = 0.0;
  double mean_ms = 0.0;
  double stddev_ms = 0.0;
  std::vector<double> samples_ms;
};

namespace detail {

inline LatencyStats stats_of(std::vector<double> samples) {
  LatencyStats s;
  s.samples_ms = samples;
  std::sort(samples.begin(), samples.end());
  std::size_t n = samples.size();
  s.median_ms = n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  double sum = 0.0;
  for (double v : samples) sum += v;
  s.mean_ms = sum / double(n);
  double var = 0.0;
  for (double v : samples) var += (v - s.mean_ms) * (v - s.mean_ms);
  s.stddev_ms = n > 1 ? std::sqrt(var / double(n - 1)) : 0.0;
  return s;
}

}  // namespace detail

// Seeded random input ids for one timed configuration; the same seed always
// produces the same ids.
inline EncodingBatch bench_inputs(const ModelConfig& config, std::size_t length,
                                  std::size_t batch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  int lo = std::min(5, config.vocab_size - 1);
  std::uniform_int_distribution<int> id(lo, config.vocab_size - 1);
  EncodingBatch b;
  b.batch = batch;
  b.seq_len = length;
  b.ids.resize(batch * length);
  for (auto& v : b.ids) v = id(rng);
  b.attention_mask.assign(batch * length, 1);
  b.segment_ids.assign(batch * length, 0);
  return b;
}

// Runs `warmup` untimed passes then `reps` timed passes over pre-built
// inputs; tokenization and input allocation stay outside the timed region.
inline LatencyStats time_forward(const EncoderModel& model, std::size_t length,
                                 std::size_t reps, std::size_t warmup, std::uint64_t seed,
                                 std::size_t batch = 1) {
  if (length > std::size_t(model.config().max_position))
    throw ConfigError("sequence length " + std::to_string(length) +
                      " exceeds max_position " + std::to_string(model.config().max_position));
  EncodingBatch inputs = bench_inputs(model.config(), length, batch, seed);
  for (std::size_t i = 0; i < warmup; ++i) (void)model.forward(inputs);
  std::vector<double> samples;
  samples.reserve(reps);
  for (std::size_t i = 0; i < reps; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    (void)model.forward(inputs);
    auto t1 = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return detail::stats_of(std::move(samples));
}

struct BenchRow {
  std::string model;  // config summary, e.g. "L6-H768-A12-V50000"
  std::string label;
  std::size_t length = 0;
  std::size_t reps = 0;
  double median_ms = 0.0;
  double mean_ms = 0.0;
  double stddev_ms = 0.0;
  bool noisy = false;  // stddev/median >= 0.5, warn-only flakiness guard
};

inline std::string config_summary(const ModelConfig& c) {
  return "L" + std::to_string(c.num_layers) + "-H" + std::to_string(c.hidden) + "-A" +
         std::to_string(c.num_heads) + "-V" + std::to_string(c.vocab_size);
}

// Full sweep: one row per (model, length), model-major, lengths ascending.
inline std::vector<BenchRow> run_plan(const BenchPlan& plan) {
  plan.validate();
  std::vector<BenchRow> rows;
  for (const auto& entry : plan.models) {
    EncoderModel model(entry.config, plan.seed);
    for (std::size_t length : plan.lengths) {
      LatencyStats s;
      try {
        s = time_forward(model, length, plan.repetitions, plan.warmup, plan.seed,
                         plan.batch_size);
      } catch (const Error& e) {
        throw ConfigError("bench " + entry.label + " @" + std::to_string(length) + ": " +
                          e.what());
      }
      BenchRow row;
      row.model = config_summary(entry.config);
      row.label = entry.label;
      row.length = length;
      row.reps = plan.repetitions;
      row.median_ms = s.median_ms;
      row.mean_ms = s.mean_ms;
      row.stddev_ms = s.stddev_ms;
      row.noisy = s.median_ms > 0.0 && s.stddev_ms / s.median_ms >= 0.5;
      rows.push_back(row);
    }
  }
  return rows;
}

inline void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
  os << "model,label,length,reps,median_ms,mean_ms,stddev_ms\n";
  char buf[64];
  for (const auto& r : rows) {
    os << r.model << ',' << r.label << ',' << r.length << ',' << r.reps;
    std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,%.6f\n", r.median_ms, r.mean_ms, r.stddev_ms);
    os << buf;
  }
}

// Whitespace-separated (length, median) series per model, blocks separated
// by blank lines; consumable by gnuplot and friends.
inline void write_plot_data(std::ostream& os, const std::vector<BenchRow>& rows) {
  std::string current;
  bool first = true;
  for (const auto& r : rows) {
    if (r.label != current) {
      if (!first) os << "\n\n";
      os << "# " << r.label << " (" << r.model << ")\n";
      current = r.label;
      first = false;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%zu %.6f\n", r.length, r.median_ms);
    os << buf;
  }
}

}  // namespace distilkit
