#include <gtest/gtest.h>

#include <sstream>

#include "distilkit/bench.hpp"

using namespace distilkit;

namespace {

ModelConfig bench_config(int layers) {
  ModelConfig c;
  c.num_layers = layers;
  c.hidden = 16;
  c.num_heads = 2;
  c.vocab_size = 64;
  c.max_position = 64;
  c.dropout = 0.0;
  return c;
}

}  // namespace

TEST(TimeForward, ExactSampleCount) {
  EncoderModel m(bench_config(1), 3);
  LatencyStats s = time_forward(m, 8, 5, 1, 42);
  EXPECT_EQ(s.samples_ms.size(), 5u);
  for (double v : s.samples_ms) EXPECT_GT(v, 0.0);
  EXPECT_LE(s.median_ms, *std::max_element(s.samples_ms.begin(), s.samples_ms.end()));
}

TEST(TimeForward, SeedFixesInputs) {
  ModelConfig c = bench_config(1);
  EncodingBatch a = bench_inputs(c, 16, 1, 7);
  EncodingBatch b = bench_inputs(c, 16, 1, 7);
  EncodingBatch other = bench_inputs(c, 16, 1, 8);
  EXPECT_EQ(a.ids, b.ids);
  EXPECT_NE(a.ids, other.ids);
}

TEST(TimeForward, OverlongLengthRejected) {
  EncoderModel m(bench_config(1), 3);
  EXPECT_THROW(time_forward(m, 65, 3, 0, 42), ConfigError);
}

TEST(RunPlan, CardinalityAndOrdering) {
  BenchPlan plan;
  plan.models = {{"one", bench_config(1)}, {"two", bench_config(2)}};
  plan.lengths = {8, 16, 24};
  plan.repetitions = 3;
  plan.warmup = 0;
  auto rows = run_plan(plan);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0].label, "one");
  EXPECT_EQ(rows[0].length, 8u);
  EXPECT_EQ(rows[3].label, "two");
  EXPECT_EQ(rows[0].model, "L1-H16-A2-V64");
}

TEST(RunPlan, DegeneratePlansRejected) {
  BenchPlan plan;
  plan.models = {{"one", bench_config(1)}};
  plan.lengths = {};
  EXPECT_THROW(run_plan(plan), ConfigError);
  plan.lengths = {8};
  plan.repetitions = 2;
  EXPECT_THROW(run_plan(plan), ConfigError);
  plan.repetitions = 3;
  plan.lengths = {128};  // beyond max_position 64
  EXPECT_THROW(run_plan(plan), ConfigError);
}

TEST(BenchOutput, CsvAndPlotData) {
  std::vector<BenchRow> rows = {
      {"L1-H16-A2-V64", "one", 8, 3, 1.5, 1.6, 0.1, false},
      {"L1-H16-A2-V64", "one", 16, 3, 2.5, 2.6, 0.1, false},
      {"L2-H16-A2-V64", "two", 8, 3, 3.0, 3.1, 0.2, false},
  };
  std::stringstream csv;
  write_bench_csv(csv, rows);
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "model,label,length,reps,median_ms,mean_ms,stddev_ms");
  std::string row;
  std::getline(csv, row);
  EXPECT_EQ(row.substr(0, 22), "L1-H16-A2-V64,one,8,3,");

  std::stringstream plot;
  write_plot_data(plot, rows);
  std::string text = plot.str();
  EXPECT_NE(text.find("# one"), std::string::npos);
  EXPECT_NE(text.find("\n\n# two"), std::string::npos);
  EXPECT_NE(text.find("16 2.5"), std::string::npos);
}
