// Command-line entry point wiring the corpus, distillation, fine-tuning,
// loyalty and benchmarking pipelines into reproducible subcommands.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "distilkit/bench.hpp"
#include "distilkit/corpus.hpp"
#include "distilkit/distill.hpp"
#include "distilkit/encoder.hpp"
#include "distilkit/error.hpp"
#include "distilkit/finetune.hpp"
#include "distilkit/loyalty.hpp"
#include "distilkit/manifest.hpp"
#include "distilkit/prediction.hpp"
#include "distilkit/tokenizer.hpp"

namespace dk = distilkit;

namespace {

// Relative config-style paths fall back to $DISTILKIT_CONFIG_DIR when the
// file is not found where given.
std::string resolve_config_path(const std::string& path) {
  namespace fs = std::filesystem;
  if (path.empty() || fs::exists(path) || fs::path(path).is_absolute()) return path;
  const char* dir = std::getenv("DISTILKIT_CONFIG_DIR");
  if (!dir) return path;
  fs::path candidate = fs::path(dir) / path;
  if (fs::exists(candidate)) return candidate.string();
  return path;
}

dk::Vocab load_vocab_arg(const std::string& path, bool uncased) {
  return dk::load_vocab(path, uncased ? dk::Casing::uncased : dk::Casing::cased);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw dk::IoError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void emit_json(const nlohmann::json& j, const std::string& output_path) {
  std::cout << j.dump(2) << std::endl;
  if (!output_path.empty()) {
    std::ofstream os(output_path);
    if (!os) throw dk::IoError("cannot write report: " + output_path);
    os << j.dump(2) << '\n';
  }
}

// ---------------------------------------------------------------------------

struct CleanArgs {
  std::vector<std::string> inputs;
  std::string output;
  std::string rules_path;
  bool dedup = false;
  int threads = 1;
};

int cmd_clean(const CleanArgs& args) {
  dk::CleaningRules rules = args.rules_path.empty()
                                ? dk::CleaningRules::defaults()
                                : dk::CleaningRules::from_file(resolve_config_path(args.rules_path));
  dk::CleanReport report;
  std::vector<std::string> cleaned_tmp;
  if (args.dedup) {
    for (std::size_t i = 0; i < args.inputs.size(); ++i) {
      std::ifstream is(args.inputs[i], std::ios::binary);
      if (!is) throw dk::IoError("cannot open input file: " + args.inputs[i]);
      std::string tmp = args.output + ".clean." + std::to_string(i) + ".tmp";
      std::ofstream os(tmp, std::ios::binary);
      if (!os) throw dk::IoError("cannot open temporary file: " + tmp);
      dk::CleanReport r = dk::clean_stream(is, os, rules);
      report.kept.lines += r.kept.lines;
      report.kept.words += r.kept.words;
      report.kept.bytes += r.kept.bytes;
      report.dropped_diacritic += r.dropped_diacritic;
      report.dropped_entity += r.dropped_entity;
      report.dropped_language += r.dropped_language;
      cleaned_tmp.push_back(tmp);
    }
    dk::dedup_merge(cleaned_tmp, args.output);
    for (const auto& tmp : cleaned_tmp) std::filesystem::remove(tmp);
  } else {
    std::ofstream os(args.output, std::ios::binary);
    if (!os) throw dk::IoError("cannot open output file: " + args.output);
    for (const auto& input : args.inputs) {
      std::ifstream is(input, std::ios::binary);
      if (!is) throw dk::IoError("cannot open input file: " + input);
      dk::CleanReport r = dk::clean_stream(is, os, rules);
      report.kept.lines += r.kept.lines;
      report.kept.words += r.kept.words;
      report.kept.bytes += r.kept.bytes;
      report.dropped_diacritic += r.dropped_diacritic;
      report.dropped_entity += r.dropped_entity;
      report.dropped_language += r.dropped_language;
    }
  }

  nlohmann::json stats = report.to_json();
  stats["output"] = dk::corpus_stats(args.output).to_json();
  stats["deduplicated"] = args.dedup;
  std::cout << stats.dump() << std::endl;

  dk::RunManifest manifest;
  manifest.command = "clean";
  manifest.config = {{"rules", args.rules_path}, {"dedup", args.dedup}};
  manifest.threads = args.threads;
  manifest.inputs = args.inputs;
  manifest.outputs = {args.output};
  manifest.write(args.output);
  return 0;
}

// ---------------------------------------------------------------------------

struct DistillArgs {
  std::vector<std::string> teachers;
  std::string vocab_path;
  bool uncased = false;
  std::string corpus_path;
  std::string output;
  std::string metrics_path;
  std::string config_path;
  int student_layers = 0;  // 0: half the teacher's depth
  std::size_t seq_len = 128;
  int threads = 1;
  // flag overrides; NaN means "not set"
  double lambda_kd = NAN, lambda_mlm = NAN, lambda_cos = NAN, temperature = NAN;
  double learning_rate = NAN, weight_decay = NAN, warmup_fraction = NAN;
  double clip_norm = NAN, mask_fraction = NAN;
  int epochs = -1, batch_size = -1;
  std::int64_t seed = -1;
};

int cmd_distill(const DistillArgs& args) {
  dk::DistillConfig config;
  if (!args.config_path.empty())
    config = dk::DistillConfig::from_file(resolve_config_path(args.config_path));
  auto override_d = [](double& slot, double flag) {
    if (!std::isnan(flag)) slot = flag;
  };
  override_d(config.lambda_kd, args.lambda_kd);
  override_d(config.lambda_mlm, args.lambda_mlm);
  override_d(config.lambda_cos, args.lambda_cos);
  override_d(config.temperature, args.temperature);
  override_d(config.learning_rate, args.learning_rate);
  override_d(config.weight_decay, args.weight_decay);
  override_d(config.warmup_fraction, args.warmup_fraction);
  override_d(config.clip_norm, args.clip_norm);
  override_d(config.mask_fraction, args.mask_fraction);
  if (args.epochs >= 0) config.epochs = args.epochs;
  if (args.batch_size >= 0) config.batch_size = args.batch_size;
  if (args.seed >= 0) config.seed = std::uint64_t(args.seed);
  config.validate();  // reject before any training starts

  dk::Vocab vocab = load_vocab_arg(args.vocab_path, args.uncased);
  std::vector<dk::EncoderModel> teacher_models;
  for (const auto& path : args.teachers) teacher_models.push_back(dk::load_checkpoint(path));

  int student_layers =
      args.student_layers > 0 ? args.student_layers : teacher_models[0].config().num_layers / 2;
  dk::EncoderModel student = dk::init_student(teacher_models[0], student_layers);

  auto batches = dk::build_mlm_batches(read_lines(args.corpus_path), vocab, args.seq_len,
                                       std::size_t(config.batch_size), config.seed);
  std::vector<dk::EncoderModel*> teacher_ptrs;
  for (auto& t : teacher_models) teacher_ptrs.push_back(&t);

  auto log = dk::train_distill(teacher_ptrs, student, vocab, batches, config);
  dk::save_checkpoint(student, args.output);

  std::string metrics_path =
      args.metrics_path.empty() ? args.output + ".metrics.csv" : args.metrics_path;
  {
    std::ofstream os(metrics_path);
    if (!os) throw dk::IoError("cannot write metrics: " + metrics_path);
    dk::write_metrics_csv(os, log);
  }
  std::cerr << "distilled " << args.teachers.size() << " teacher(s) into " << student_layers
            << "-layer student over " << log.size() << " steps; final total loss "
            << (log.empty() ? 0.0 : log.back().total) << "\n";

  dk::RunManifest manifest;
  manifest.command = "distill";
  manifest.config = config.to_json();
  manifest.config["student_layers"] = student_layers;
  manifest.config["seq_len"] = args.seq_len;
  manifest.seed = config.seed;
  manifest.threads = args.threads;
  manifest.inputs = args.teachers;
  manifest.inputs.push_back(args.vocab_path);
  manifest.inputs.push_back(args.corpus_path);
  manifest.outputs = {args.output, metrics_path};
  manifest.write(args.output);
  return 0;
}

// ---------------------------------------------------------------------------

struct FinetuneArgs {
  std::string checkpoint;
  std::string task;
  std::string train_path;
  std::string dev_path;
  std::string vocab_path;
  bool uncased = false;
  std::string output;
  std::string report_path;
  int seeds = 1;
  std::int64_t seed = 42;
  std::size_t max_len = 64;
  int threads = 1;
  // per-task hyperparameter overrides
  int epochs = -1, batch_size = -1, warmup_steps = -1, patience = -1, max_epochs = -1;
  double learning_rate = NAN;
};

int cmd_finetune(const FinetuneArgs& args) {
  dk::TaskSpec spec = dk::task_spec(args.task);
  dk::FinetuneHyperparams hp = dk::hyperparams_for_task(args.task);
  if (args.epochs >= 0) {
    hp.epochs = args.epochs;
    hp.early_stopping = false;
  }
  if (args.batch_size >= 0) hp.batch_size = args.batch_size;
  if (args.warmup_steps >= 0) hp.warmup_steps = args.warmup_steps;
  if (args.patience >= 0) hp.patience = args.patience;
  if (args.max_epochs >= 0) hp.max_epochs = args.max_epochs;
  if (!std::isnan(args.learning_rate)) hp.learning_rate = args.learning_rate;
  hp.max_len = args.max_len;
  hp.validate();

  dk::Vocab vocab = load_vocab_arg(args.vocab_path, args.uncased);
  dk::TaskDataset train = dk::load_task_dataset(spec.kind, args.train_path);
  dk::TaskDataset dev = dk::load_task_dataset(spec.kind, args.dev_path);
  int num_labels = spec.kind == dk::TaskKind::pair_regression
                       ? 1
                       : int(train.label_names.size());

  std::optional<dk::TaskModel> saved_model;
  auto stats = dk::run_seeds(args.seeds, std::uint64_t(args.seed), [&](std::uint64_t seed) {
    dk::EncoderModel encoder = dk::load_checkpoint(args.checkpoint);
    dk::TaskModel tm = dk::attach_head(std::move(encoder), spec.kind, num_labels, seed);
    dk::FinetuneHyperparams run_hp = hp;
    run_hp.seed = seed;
    dk::FinetuneResult res = dk::finetune(tm, train, dev, vocab, run_hp);
    if (!saved_model) saved_model = std::move(tm);
    return res.dev;
  });

  dk::save_task_model(*saved_model, args.output);

  nlohmann::json report = {{"task", args.task},
                           {"seeds", args.seeds},
                           {"mean", stats.mean},
                           {"stddev", stats.stddev}};
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : stats.runs) runs.push_back(r);
  report["runs"] = runs;
  emit_json(report, args.report_path);

  dk::RunManifest manifest;
  manifest.command = "finetune";
  manifest.config = {{"task", args.task},
                     {"epochs", hp.epochs},
                     {"early_stopping", hp.early_stopping},
                     {"batch_size", hp.batch_size},
                     {"warmup_steps", hp.warmup_steps},
                     {"learning_rate", hp.learning_rate},
                     {"max_len", hp.max_len},
                     {"seeds", args.seeds}};
  manifest.seed = std::uint64_t(args.seed);
  manifest.threads = args.threads;
  manifest.inputs = {args.checkpoint, args.train_path, args.dev_path, args.vocab_path};
  manifest.outputs = {args.output};
  manifest.write(args.output);
  return 0;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string model;
  std::string data_path;
  std::string vocab_path;
  bool uncased = false;
  std::string output;
  std::size_t max_len = 64;
  int threads = 1;
};

int cmd_predict(const PredictArgs& args) {
  dk::TaskModel tm = dk::load_task_model(args.model);
  dk::Vocab vocab = load_vocab_arg(args.vocab_path, args.uncased);
  dk::TaskDataset data = dk::load_task_dataset(tm.kind, args.data_path);
  dk::PredictionSet ps = dk::predict(tm, data, vocab, args.max_len);
  ps.save_tsv(args.output);

  dk::RunManifest manifest;
  manifest.command = "predict";
  manifest.config = {{"max_len", args.max_len}};
  manifest.threads = args.threads;
  manifest.inputs = {args.model, args.data_path, args.vocab_path};
  manifest.outputs = {args.output};
  manifest.write(args.output);
  return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string model;
  std::string task;
  std::string data_path;
  std::string vocab_path;
  bool uncased = false;
  std::string report_path;
  std::size_t max_len = 64;
  int threads = 1;
};

int cmd_evaluate(const EvaluateArgs& args) {
  dk::TaskSpec spec = dk::task_spec(args.task);
  dk::TaskModel tm = dk::load_task_model(args.model);
  if (tm.kind != spec.kind)
    throw dk::ConfigError("checkpoint task kind does not match --task " + args.task);
  dk::Vocab vocab = load_vocab_arg(args.vocab_path, args.uncased);
  dk::TaskDataset data = dk::load_task_dataset(spec.kind, args.data_path);

  nlohmann::json report = {{"task", args.task}};
  auto metrics = dk::evaluate_dev(tm, data, vocab, args.max_len);
  for (const auto& [k, v] : metrics) report[k] = v;

  if (args.task == "ner") {
    auto label_map = dk::detail::label_map_of(tm.label_names);
    dk::PredictionSet ps = dk::predict(tm, data, vocab, args.max_len);
    std::vector<dk::NerDocument> docs;
    std::size_t row = 0;
    for (std::size_t i = 0; i < data.tagging.size(); ++i) {
      dk::TaggedEncoding te =
          dk::encode_tagged(data.tagging[i], vocab, args.max_len, label_map, i);
      dk::NerDocument doc;
      for (std::size_t w = 0; w < te.word_labels.size(); ++w) {
        doc.gold.push_back(tm.label_names[std::size_t(te.word_labels[w])]);
        doc.pred.push_back(tm.label_names[std::size_t(ps.labels[row++])]);
      }
      docs.push_back(std::move(doc));
    }
    report["ner"] = dk::ner_schema_eval(docs).to_json();
  }
  emit_json(report, args.report_path);

  if (!args.report_path.empty()) {
    dk::RunManifest manifest;
    manifest.command = "evaluate";
    manifest.config = {{"task", args.task}, {"max_len", args.max_len}};
    manifest.threads = args.threads;
    manifest.inputs = {args.model, args.data_path, args.vocab_path};
    manifest.outputs = {args.report_path};
    manifest.write(args.report_path);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct LoyaltyArgs {
  std::vector<std::string> teacher_files;
  std::string student_file;
  std::string report_path;
  int threads = 1;
};

int cmd_loyalty(const LoyaltyArgs& args) {
  std::vector<dk::PredictionSet> teachers;
  for (const auto& path : args.teacher_files)
    teachers.push_back(dk::PredictionSet::load_tsv(path));
  dk::PredictionSet student = dk::PredictionSet::load_tsv(args.student_file);
  dk::LoyaltyReport report = dk::multi_teacher_loyalty(teachers, student);
  emit_json(report.to_json(), args.report_path);

  if (!args.report_path.empty()) {
    dk::RunManifest manifest;
    manifest.command = "loyalty";
    manifest.threads = args.threads;
    manifest.inputs = args.teacher_files;
    manifest.inputs.push_back(args.student_file);
    manifest.outputs = {args.report_path};
    manifest.write(args.report_path);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::vector<std::string> checkpoints;
  std::vector<std::string> config_files;
  std::vector<std::string> labels;
  std::vector<std::size_t> lengths;
  std::size_t reps = 10;
  std::size_t warmup = 2;
  std::size_t batch = 1;
  std::int64_t seed = 42;
  std::string output;
  std::string plot_path;
  int threads = 1;
};

int cmd_bench(const BenchArgs& args) {
  dk::BenchPlan plan;
  if (!args.lengths.empty()) plan.lengths = args.lengths;
  plan.repetitions = args.reps;
  plan.warmup = args.warmup;
  plan.batch_size = args.batch;
  plan.seed = std::uint64_t(args.seed);
  plan.threads = args.threads;

  std::vector<std::string> sources;
  for (const auto& path : args.checkpoints) {
    dk::EncoderModel m = dk::load_checkpoint(path);
    plan.models.push_back({std::filesystem::path(path).stem().string(), m.config()});
    sources.push_back(path);
  }
  for (const auto& path : args.config_files) {
    std::string resolved = resolve_config_path(path);
    std::ifstream is(resolved);
    if (!is) throw dk::IoError("cannot open model config: " + resolved);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
      throw dk::FormatError("model config " + resolved + " is not valid JSON: " + e.what());
    }
    plan.models.push_back(
        {std::filesystem::path(path).stem().string(), dk::ModelConfig::from_json(j)});
    sources.push_back(resolved);
  }
  for (std::size_t i = 0; i < args.labels.size() && i < plan.models.size(); ++i)
    plan.models[i].label = args.labels[i];

  auto rows = dk::run_plan(plan);
  {
    std::ofstream os(args.output);
    if (!os) throw dk::IoError("cannot write bench csv: " + args.output);
    dk::write_bench_csv(os, rows);
  }
  std::vector<std::string> outputs{args.output};
  if (!args.plot_path.empty()) {
    std::ofstream os(args.plot_path);
    if (!os) throw dk::IoError("cannot write plot data: " + args.plot_path);
    dk::write_plot_data(os, rows);
    outputs.push_back(args.plot_path);
  }
  for (const auto& r : rows)
    if (r.noisy)
      std::cerr << "warning: noisy timing for " << r.label << " @" << r.length
                << " (stddev/median >= 0.5)\n";

  dk::RunManifest manifest;
  manifest.command = "bench";
  manifest.config = {{"lengths", plan.lengths},
                     {"reps", plan.repetitions},
                     {"warmup", plan.warmup},
                     {"batch", plan.batch_size}};
  manifest.seed = plan.seed;
  manifest.threads = args.threads;
  manifest.inputs = sources;
  manifest.outputs = outputs;
  manifest.write(args.output);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale knowledge-distillation workbench"};
  app.require_subcommand(1);

  int threads = 1;
  app.add_option("--threads", threads, "worker threads (recorded in manifests)");

  CleanArgs clean_args;
  auto* clean = app.add_subcommand("clean", "clean and optionally dedup-merge text corpora");
  clean->add_option("--input", clean_args.inputs, "input text file(s)")->required();
  clean->add_option("--output", clean_args.output, "cleaned output file")->required();
  clean->add_option("--rules", clean_args.rules_path, "cleaning rules file");
  clean->add_flag("--dedup", clean_args.dedup, "deduplicate lines across all inputs");

  DistillArgs distill_args;
  auto* distill = app.add_subcommand("distill", "distill teacher checkpoint(s) into a student");
  distill->add_option("--teacher", distill_args.teachers, "teacher checkpoint(s)")->required();
  distill->add_option("--vocab", distill_args.vocab_path, "vocabulary file")->required();
  distill->add_flag("--uncased", distill_args.uncased, "lowercase input text");
  distill->add_option("--corpus", distill_args.corpus_path, "training text, one line each")
      ->required();
  distill->add_option("--output", distill_args.output, "student checkpoint path")->required();
  distill->add_option("--metrics", distill_args.metrics_path, "metrics CSV path");
  distill->add_option("--config", distill_args.config_path, "distillation config JSON");
  distill->add_option("--student-layers", distill_args.student_layers,
                      "student depth (default: half the teacher)");
  distill->add_option("--seq-len", distill_args.seq_len, "training sequence length");
  distill->add_option("--lambda-kd", distill_args.lambda_kd, "KD loss weight");
  distill->add_option("--lambda-mlm", distill_args.lambda_mlm, "MLM loss weight");
  distill->add_option("--lambda-cos", distill_args.lambda_cos, "cosine loss weight");
  distill->add_option("--temperature", distill_args.temperature, "softmax temperature");
  distill->add_option("--epochs", distill_args.epochs, "training epochs");
  distill->add_option("--batch-size", distill_args.batch_size, "batch size");
  distill->add_option("--lr", distill_args.learning_rate, "peak learning rate");
  distill->add_option("--weight-decay", distill_args.weight_decay, "decoupled weight decay");
  distill->add_option("--warmup", distill_args.warmup_fraction, "warmup fraction of steps");
  distill->add_option("--clip-norm", distill_args.clip_norm, "gradient clipping norm");
  distill->add_option("--mask-fraction", distill_args.mask_fraction, "MLM mask fraction");
  distill->add_option("--seed", distill_args.seed, "run seed");

  FinetuneArgs ft_args;
  auto* finetune = app.add_subcommand("finetune", "fine-tune a checkpoint on a task");
  finetune->add_option("--checkpoint", ft_args.checkpoint, "encoder checkpoint")->required();
  finetune->add_option("--task", ft_args.task, "upos|xpos|ner|sapn|sar|di|sts")->required();
  finetune->add_option("--train", ft_args.train_path, "training dataset")->required();
  finetune->add_option("--dev", ft_args.dev_path, "dev dataset")->required();
  finetune->add_option("--vocab", ft_args.vocab_path, "vocabulary file")->required();
  finetune->add_flag("--uncased", ft_args.uncased, "lowercase input text");
  finetune->add_option("--output", ft_args.output, "task model checkpoint")->required();
  finetune->add_option("--report", ft_args.report_path, "metrics report JSON path");
  finetune->add_option("--seeds", ft_args.seeds, "number of seeded runs to average");
  finetune->add_option("--seed", ft_args.seed, "base seed");
  finetune->add_option("--max-len", ft_args.max_len, "sequence length");
  finetune->add_option("--epochs", ft_args.epochs, "override training epochs");
  finetune->add_option("--batch-size", ft_args.batch_size, "override batch size");
  finetune->add_option("--warmup-steps", ft_args.warmup_steps, "override warmup steps");
  finetune->add_option("--lr", ft_args.learning_rate, "override learning rate");
  finetune->add_option("--patience", ft_args.patience, "early-stopping patience");
  finetune->add_option("--max-epochs", ft_args.max_epochs, "early-stopping epoch cap");

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "write a prediction set for a dataset");
  predict->add_option("--model", predict_args.model, "task model checkpoint")->required();
  predict->add_option("--data", predict_args.data_path, "dataset")->required();
  predict->add_option("--vocab", predict_args.vocab_path, "vocabulary file")->required();
  predict->add_flag("--uncased", predict_args.uncased, "lowercase input text");
  predict->add_option("--output", predict_args.output, "prediction TSV path")->required();
  predict->add_option("--max-len", predict_args.max_len, "sequence length");

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a task model on a dataset");
  evaluate->add_option("--model", eval_args.model, "task model checkpoint")->required();
  evaluate->add_option("--task", eval_args.task, "upos|xpos|ner|sapn|sar|di|sts")->required();
  evaluate->add_option("--data", eval_args.data_path, "gold dataset")->required();
  evaluate->add_option("--vocab", eval_args.vocab_path, "vocabulary file")->required();
  evaluate->add_flag("--uncased", eval_args.uncased, "lowercase input text");
  evaluate->add_option("--report", eval_args.report_path, "report JSON path");
  evaluate->add_option("--max-len", eval_args.max_len, "sequence length");

  LoyaltyArgs loyalty_args;
  auto* loyalty = app.add_subcommand("loyalty", "teacher-student loyalty metrics");
  loyalty->add_option("--teacher", loyalty_args.teacher_files, "teacher prediction TSV(s)")
      ->required();
  loyalty->add_option("--student", loyalty_args.student_file, "student prediction TSV")
      ->required();
  loyalty->add_option("--report", loyalty_args.report_path, "report JSON path");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "inference latency sweep over sequence lengths");
  bench->add_option("--checkpoint", bench_args.checkpoints, "model checkpoint(s)");
  bench->add_option("--config-json", bench_args.config_files, "model config JSON file(s)");
  bench->add_option("--label", bench_args.labels, "label(s) for the models, in order");
  bench->add_option("--lengths", bench_args.lengths,
                    "sequence lengths (default 16 32 64 128 256 512)");
  bench->add_option("--reps", bench_args.reps, "timed repetitions per point");
  bench->add_option("--warmup", bench_args.warmup, "untimed warmup passes");
  bench->add_option("--batch", bench_args.batch, "batch size");
  bench->add_option("--seed", bench_args.seed, "input generation seed");
  bench->add_option("--output", bench_args.output, "CSV output path")->required();
  bench->add_option("--plot-data", bench_args.plot_path, "plot data output path");

  CLI11_PARSE(app, argc, argv);

  try {
    clean_args.threads = distill_args.threads = ft_args.threads = predict_args.threads =
        eval_args.threads = loyalty_args.threads = bench_args.threads = threads;
    if (clean->parsed()) return cmd_clean(clean_args);
    if (distill->parsed()) return cmd_distill(distill_args);
    if (finetune->parsed()) return cmd_finetune(ft_args);
    if (predict->parsed()) return cmd_predict(predict_args);
    if (evaluate->parsed()) return cmd_evaluate(eval_args);
    if (loyalty->parsed()) return cmd_loyalty(loyalty_args);
    if (bench->parsed()) return cmd_bench(bench_args);
  } catch (const dk::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
