/*
 * Copyright 2026 The swmt Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// The swmt command-line tool: synth, parse, stats, train, evaluate and
// gradcheck. Every command returns a process exit code:
//
//   0 ok, 1 check failure, 2 config, 3 I/O, 4 data statistics,
//   5 divergence, 6 mismatch
//
// Option precedence is flag > config file > built-in default. The seed falls
// back to SWMT_SEED when neither a flag nor the config sets it.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "swmt/checkpoint.hpp"
#include "swmt/config.hpp"
#include "swmt/data.hpp"
#include "swmt/error.hpp"
#include "swmt/evalkit.hpp"
#include "swmt/gradcheck.hpp"
#include "swmt/stats.hpp"
#include "swmt/train.hpp"

namespace swmt::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailure = 1,
  kConfigError = 2,
  kIoError = 3,
  kStatisticsError = 4,
  kDivergence = 5,
  kMismatch = 6,
};

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::invalid_argument: return kConfigError;
    case ErrorKind::io:
    case ErrorKind::parse:
    case ErrorKind::corruption: return kIoError;
    case ErrorKind::zero_frequency: return kStatisticsError;
    case ErrorKind::divergence:
    case ErrorKind::numeric: return kDivergence;
    case ErrorKind::version:
    case ErrorKind::mismatch:
    case ErrorKind::dimension: return kMismatch;
  }
  return kCheckFailure;
}

namespace detail {

inline std::string iso8601_utc(std::time_t t) {
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// SOURCE_DATE_EPOCH pins the timestamp for reproducible builds of a dataset.
inline std::string created_at() {
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    if (end != env && *end == '\0') return iso8601_utc(static_cast<std::time_t>(v));
  }
  return iso8601_utc(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now()));
}

inline std::optional<std::uint64_t> env_seed() {
  const char* env = std::getenv("SWMT_SEED");
  if (!env || !*env) return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0' || env[0] == '-') fail(ErrorKind::config, "SWMT_SEED must be a non-negative integer");
  return v;
}

inline RunConfig load_run_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return run_config_from_text(read_text_file(path));
}

inline void resolve_seed(RunConfig& cfg, const CLI::Option* seed_opt, std::uint64_t seed_flag) {
  if (seed_opt && seed_opt->count() > 0) {
    cfg.set_seed(seed_flag);
  } else if (!cfg.seed_given) {
    if (auto s = env_seed()) cfg.set_seed(*s);
  }
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

/// Videos used for statistics and training: the first half of the ids.
inline SplitView training_view(const Dataset& ds) { return make_split_view(ds, split_first_half(ds.ids())); }

inline nlohmann::json weights_json(const ClassFrequencies& f, const ClassWeights& w,
                                   std::span<const std::string_view> names) {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < w.size(); ++c)
    classes.push_back({{"name", c < names.size() ? std::string(names[c]) : std::to_string(c)},
                       {"frames", f.counts[c]},
                       {"weight", w[c]}});
  return classes;
}

inline nlohmann::json history_json(const std::vector<EpochRecord>& h) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : h)
    a.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_loss", r.val_loss}, {"lr", r.lr}});
  return a;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands. Each takes fully resolved options.

struct SynthOptions {
  RunConfig config;
  std::filesystem::path out;
};

inline int cmd_synth(const SynthOptions& o, std::ostream& log) {
  Dataset ds;
  ds.videos = generate_synthetic(o.config.synthetic);
  ds.generator = to_json(o.config.synthetic);
  write_dataset(o.out, ds, detail::created_at());
  std::size_t frames = 0;
  for (const auto& v : ds.videos) frames += v.length();
  log << "wrote " << ds.videos.size() << " videos (" << frames << " frames) to " << o.out.string()
      << "\n";
  return kOk;
}

struct ParseOptions {
  std::filesystem::path input;
  std::filesystem::path out;
};

/// Finds <id>-phase.txt / <id>-tool.txt pairs in `input` or in its
/// phase_annotations/ and tool_annotations/ subdirectories.
inline std::vector<std::pair<std::filesystem::path, std::filesystem::path>> find_annotation_pairs(
    const std::filesystem::path& input) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(input)) fail(ErrorKind::io, input.string() + " is not a directory");
  const fs::path phase_dir = fs::is_directory(input / "phase_annotations") ? input / "phase_annotations" : input;
  const fs::path tool_dir = fs::is_directory(input / "tool_annotations") ? input / "tool_annotations" : input;
  std::map<std::string, fs::path> phases;
  for (const auto& e : fs::directory_iterator(phase_dir)) {
    const std::string name = e.path().filename().string();
    const std::string suffix = "-phase.txt";
    if (name.size() > suffix.size() && name.ends_with(suffix))
      phases[name.substr(0, name.size() - suffix.size())] = e.path();
  }
  std::vector<std::pair<fs::path, fs::path>> out;
  for (const auto& [id, path] : phases) {
    const fs::path tool = tool_dir / (id + "-tool.txt");
    if (!fs::exists(tool)) fail(ErrorKind::io, "missing tool annotations for " + id + ": " + tool.string());
    out.emplace_back(path, tool);
  }
  if (out.empty()) fail(ErrorKind::io, "no *-phase.txt files in " + phase_dir.string());
  return out;
}

inline int cmd_parse(const ParseOptions& o, std::ostream& log) {
  Dataset ds;
  for (const auto& [phase_path, tool_path] : find_annotation_pairs(o.input)) {
    std::string id = phase_path.filename().string();
    id.resize(id.size() - std::string("-phase.txt").size());
    try {
      const auto phases = parse_phase_file(read_text_file(phase_path));
      const auto tools = parse_tool_file(read_text_file(tool_path));
      ds.videos.push_back(rate_match(phases, tools, id));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::parse) fail(ErrorKind::parse, id + ": " + e.what());
      throw;
    }
    log << id << ": " << ds.videos.back().length() << " frames at 1 fps\n";
  }
  write_dataset(o.out, ds, detail::created_at());
  return kOk;
}

struct StatsOptions {
  std::filesystem::path data;
  std::filesystem::path out;
  double epsilon = kDefaultEpsilon;
  bool strict_epsilon = false;
};

inline int cmd_stats(const StatsOptions& o, std::ostream& log) {
  const Dataset ds = read_dataset(o.data);
  std::vector<const VideoAnnotation*> videos;
  if (ds.videos.size() >= 2) {
    videos = detail::training_view(ds).train;
  } else {
    for (const auto& v : ds.videos) videos.push_back(&v);
  }
  const auto labels = collect_labels(videos);
  const double eps = o.strict_epsilon ? kStrictEpsilon : o.epsilon;
  const CooccurrenceModel co = build_cooccurrence(labels, eps);
  detail::ensure_dir(o.out);
  detail::write_json(o.out / "cooccurrence.json", to_json(co));
  log << "co-occurrence counts over " << labels.size() << " frames of " << videos.size()
      << " video(s):\n"
      << format_cooccurrence_table(co);
  for (std::size_t p = 0; p < co.n_phases(); ++p)
    if (co.unobserved_phases()[p])
      log << "note: phase " << kPhaseNames[p] << " has no frames; its column is uniform\n";

  const auto pf = phase_frequencies(labels);
  const auto tf = tool_frequencies(labels);
  auto weights = [&](const ClassFrequencies& f, std::span<const std::string_view> names, const char* task) {
    for (std::size_t c = 0; c < f.counts.size(); ++c)
      if (f.counts[c] == 0)
        fail(ErrorKind::zero_frequency, std::string(task) + " class '" + std::string(names[c]) +
                                            "' has no frames; median-frequency weights are undefined");
    return compute_class_weights(f);
  };
  const ClassWeights pw = weights(pf, kPhaseNames, "phase");
  const ClassWeights tw = weights(tf, kToolNames, "tool");
  detail::write_json(o.out / "class_weights.json",
                     {{"method", "median frequency balancing"},
                      {"phase", detail::weights_json(pf, pw, kPhaseNames)},
                      {"tool", detail::weights_json(tf, tw, kToolNames)}});
  return kOk;
}

struct TrainOptions {
  RunConfig config;
  std::filesystem::path data;
  std::filesystem::path out;
  std::optional<std::filesystem::path> resume;
  std::optional<int> stop_after;  // epochs to run in this invocation
  int checkpoint_every = 1;
  bool quiet = false;
};

inline int cmd_train(const TrainOptions& o, std::ostream& log) {
  const Dataset ds = read_dataset(o.data);
  if (ds.feature_dim() == 0) fail(ErrorKind::mismatch, "dataset has no frame features to train on");
  const SplitView view = make_split_view(ds, split_first_half(ds.ids()));

  Checkpoint ck;
  if (o.resume) {
    ck = load_checkpoint(*o.resume);
    if (ck.state.encoder.dims().input != ds.feature_dim())
      fail(ErrorKind::mismatch, "checkpoint expects " + std::to_string(ck.state.encoder.dims().input) +
                                    "-dim features, dataset has " + std::to_string(ds.feature_dim()));
    log << "resuming at " << to_string(ck.state.stage) << " epoch " << ck.state.epoch << "\n";
  } else {
    ck.config = o.config.pipeline;
    ck.state = init_pipeline(ck.config, ds.feature_dim());
  }
  const PipelineConfig& cfg = ck.config;
  const TrainingStats st = compute_training_stats(view.train, cfg.effective_epsilon());

  detail::ensure_dir(o.out);
  const auto ckpt_path = o.out / "checkpoint.swmt";
  if (!o.resume) {
    nlohmann::json echo = to_json(o.config);
    detail::write_json(o.out / "config.json", echo);
    detail::write_json(o.out / "stats.json", {{"cooccurrence", to_json(st.cooccurrence)},
                                              {"phase_weights", st.phase_weights.w},
                                              {"tool_weights", st.tool_weights.w}});
  }
  auto write_history = [&](const PipelineState& s) {
    detail::write_json(o.out / "history.json", {{"ablation", to_string(cfg.ablation)},
                                                {"stage1", detail::history_json(s.history1)},
                                                {"stage2", detail::history_json(s.history2)}});
  };

  int since_save = 0;
  const bool finished = run_pipeline(
      ck.state, view, st, cfg,
      [&](const PipelineState& s, const EpochRecord& r) {
        if (!o.quiet) {
          char line[160];
          std::snprintf(line, sizeof line, "%s epoch %4d  train %.6g  val %.6g  lr %.3g\n",
                        to_string(s.stage), r.epoch, r.train_loss, r.val_loss, r.lr);
          log << line << std::flush;
        }
        if (++since_save >= o.checkpoint_every) {
          save_checkpoint(ckpt_path, {cfg, s});
          write_history(s);
          since_save = 0;
        }
      },
      o.stop_after);
  save_checkpoint(ckpt_path, ck);
  write_history(ck.state);
  log << (finished ? "training finished; " : "stopped; ") << "checkpoint at " << ckpt_path.string()
      << "\n";
  return kOk;
}

struct EvaluateOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::filesystem::path out;
  EvalConfig eval;
};

inline int cmd_evaluate(const EvaluateOptions& o, std::ostream& log) {
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const Dataset ds = read_dataset(o.data);
  if (ck.state.encoder.dims().input != ds.feature_dim())
    fail(ErrorKind::mismatch, "checkpoint expects " + std::to_string(ck.state.encoder.dims().input) +
                                  "-dim features, dataset has " + std::to_string(ds.feature_dim()));
  const SplitView view = make_split_view(ds, split_first_half(ds.ids()));
  if (ck.state.stage != Stage::done)
    log << "warning: checkpoint is mid-training (" << to_string(ck.state.stage) << " epoch "
        << ck.state.epoch << ")\n";
  EvalReport rep = build_report(predict(ck.state, view.test), o.eval.smooth_window, o.eval.tool_threshold);
  rep.run_info = {{"config", to_json(ck.config)},
                  {"stage", to_string(ck.state.stage)},
                  {"stage1_epochs", ck.state.history1.size()},
                  {"stage2_epochs", ck.state.history2.size()}};
  for (const auto* v : view.test) rep.run_info["test_videos"].push_back(v->video_id);

  detail::ensure_dir(o.out);
  detail::write_json(o.out / "report.json", to_json(rep));
  write_text_file(o.out / "report.csv", to_csv(rep));
  char line[256];
  std::snprintf(line, sizeof line,
                "tool  mAP %.4f  precision %.4f  recall %.4f  accuracy %.4f\n"
                "phase mAP %.4f  frame accuracy %.4f  (after smoothing: %.4f / %.4f)\n",
                rep.tool.mean_ap, rep.tool.avg_precision, rep.tool.avg_recall, rep.tool.avg_accuracy,
                rep.phase_raw.mean_ap, rep.phase_raw.frame_accuracy, rep.phase_smooth.mean_ap,
                rep.phase_smooth.frame_accuracy);
  log << line;
  return kOk;
}

inline int cmd_gradcheck(const GradcheckOptions& o, std::ostream& log) {
  const GradcheckReport r = run_gradcheck(o);
  for (const auto& c : r.components) {
    char line[160];
    std::snprintf(line, sizeof line, "%-20s trials %5d  checked %7zu  skipped %4zu  worst rel err %.3e  %s\n",
                  c.name.c_str(), c.trials, c.checked, c.skipped, c.worst_rel_error,
                  c.passed ? "ok" : "FAIL");
    log << line;
  }
  char line[96];
  std::snprintf(line, sizeof line, "worst relative error %.3e (tolerance %.0e): %s\n", r.worst(),
                r.tolerance, r.passed() ? "PASS" : "FAIL");
  log << line;
  return r.passed() ? kOk : kCheckFailure;
}

// ---------------------------------------------------------------------------
// Argument parsing

namespace detail {

struct PipelineFlags {
  std::string ablation = to_string(Ablation::proposed);
  int stage1_epochs = PipelineConfig{}.stage1.epochs;
  int stage2_epochs = PipelineConfig{}.stage2.epochs;
  double stage1_lr = PipelineConfig{}.stage1.sgd.lr;
  double stage2_lr = PipelineConfig{}.stage2.sgd.lr;
  double alpha_phase = 1.0, alpha_tool = 1.0, alpha_joint = 1.0;
  double epsilon = kDefaultEpsilon;
  std::string whitening = "zca";
  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App& app) {
    opts["ablation"] = app.add_option("--ablation", ablation, "BL1..BL5 or proposed")
                           ->check(CLI::IsMember({"BL1", "BL2", "BL3", "BL4", "BL5", "proposed"}))
                           ->capture_default_str();
    opts["stage1-epochs"] = app.add_option("--stage1-epochs", stage1_epochs, "frame-encoder epochs")->capture_default_str();
    opts["stage2-epochs"] = app.add_option("--stage2-epochs", stage2_epochs, "Bi-LSTM epochs")->capture_default_str();
    opts["stage1-lr"] = app.add_option("--stage1-lr", stage1_lr, "stage-1 learning rate")->capture_default_str();
    opts["stage2-lr"] = app.add_option("--stage2-lr", stage2_lr, "stage-2 learning rate")->capture_default_str();
    opts["alpha-phase"] = app.add_option("--alpha-phase", alpha_phase, "weight of the phase loss")->capture_default_str();
    opts["alpha-tool"] = app.add_option("--alpha-tool", alpha_tool, "weight of the tool loss")->capture_default_str();
    opts["alpha-joint"] = app.add_option("--alpha-joint", alpha_joint, "weight of the joint loss")->capture_default_str();
    opts["epsilon"] = app.add_option("--epsilon", epsilon, "IF smoothing constant")->capture_default_str();
    opts["strict-epsilon"] = app.add_flag("--strict-epsilon", "use f64 machine epsilon for IF");
    opts["swap"] = app.add_flag("--swap-joint-activations", "softmax on phase, sigmoid on tool inside the joint loss");
    opts["whitening"] = app.add_option("--whitening", whitening, "zca or standardize")
                            ->check(CLI::IsMember({"zca", "standardize"}))
                            ->capture_default_str();
  }

  bool given(const char* name) const { return opts.at(name)->count() > 0; }

  void apply(PipelineConfig& p) const {
    if (given("ablation")) p.ablation = ablation_from_string(ablation);
    if (given("stage1-epochs")) p.stage1.epochs = stage1_epochs;
    if (given("stage2-epochs")) p.stage2.epochs = stage2_epochs;
    if (given("stage1-lr")) p.stage1.sgd.lr = stage1_lr;
    if (given("stage2-lr")) p.stage2.sgd.lr = stage2_lr;
    if (given("alpha-phase")) p.alphas.phase = alpha_phase;
    if (given("alpha-tool")) p.alphas.tool = alpha_tool;
    if (given("alpha-joint")) p.alphas.joint = alpha_joint;
    if (given("epsilon")) p.epsilon = epsilon;
    if (given("strict-epsilon")) p.strict_epsilon = true;
    if (given("swap")) p.joint_activation = JointActivation::swapped;
    if (given("whitening")) p.whitening_mode = whitening_mode_from_string(whitening);
    try {
      p.validate();
    } catch (const Error& e) {
      fail(ErrorKind::config, e.what());
    }
  }
};

}  // namespace detail

/// Parses `args` (without the program name) and runs the selected command.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"swmt: multitask surgical phase and tool recognition pipeline"};
  app.name("swmt");
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 42;
  std::string out_dir, data_dir;

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::size_t n_videos = SyntheticConfig{}.n_videos;
  double duration_scale = SyntheticConfig{}.duration_scale;
  synth->add_option("--config", config_path, "RunConfig JSON")->check(CLI::ExistingFile);
  synth->add_option("--out", out_dir, "output dataset directory")->required();
  auto* synth_seed = synth->add_option("--seed", seed, "seed (falls back to SWMT_SEED)")->capture_default_str();
  auto* synth_n = synth->add_option("--n-videos", n_videos, "number of videos")->capture_default_str();
  auto* synth_scale = synth->add_option("--duration-scale", duration_scale, "multiplier on phase durations")->capture_default_str();

  // parse
  auto* parse = app.add_subcommand("parse", "ingest Cholec80 phase/tool annotation files");
  std::string input_dir;
  parse->add_option("--input", input_dir, "directory of <id>-phase.txt and <id>-tool.txt files")->required();
  parse->add_option("--out", out_dir, "output dataset directory")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "class weights and phase-tool co-occurrence");
  StatsOptions stats_opt;
  stats->add_option("--data", data_dir, "dataset directory")->required();
  stats->add_option("--out", out_dir, "output directory")->required();
  stats->add_option("--epsilon", stats_opt.epsilon, "IF smoothing constant")->capture_default_str();
  stats->add_flag("--strict-epsilon", stats_opt.strict_epsilon, "use f64 machine epsilon");

  // train
  auto* train = app.add_subcommand("train", "run the two-stage training pipeline");
  detail::PipelineFlags train_flags;
  TrainOptions train_opt;
  std::string resume_path;
  int stop_after = 0;
  train->add_option("--config", config_path, "RunConfig JSON")->check(CLI::ExistingFile);
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--out", out_dir, "output directory for checkpoint and history")->required();
  auto* train_seed = train->add_option("--seed", seed, "seed (falls back to SWMT_SEED)")->capture_default_str();
  train->add_option("--resume", resume_path, "continue from this checkpoint")->check(CLI::ExistingFile);
  auto* stop_opt = train->add_option("--stop-after", stop_after, "run at most this many epochs, then checkpoint and exit");
  train->add_option("--checkpoint-every", train_opt.checkpoint_every, "epochs between checkpoint writes")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_flag("--quiet", train_opt.quiet, "no per-epoch log lines");
  train_flags.add(*train);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "metrics on the held-out split");
  EvaluateOptions eval_opt;
  std::string ckpt_path;
  evaluate->add_option("--checkpoint", ckpt_path, "trained checkpoint")->required();
  evaluate->add_option("--data", data_dir, "dataset directory")->required();
  evaluate->add_option("--out", out_dir, "report directory")->required();
  evaluate->add_option("--config", config_path, "RunConfig JSON (eval section)")->check(CLI::ExistingFile);
  int smooth_window = kDefaultSmoothWindow;
  double tool_threshold = kDefaultToolThreshold;
  auto* window_opt = evaluate->add_option("--smooth-window", smooth_window, "median filter window (odd)")->capture_default_str();
  auto* thr_opt = evaluate->add_option("--tool-threshold", tool_threshold, "tool decision threshold")->capture_default_str();

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  GradcheckOptions gc_opt;
  gradcheck->add_option("--trials", gc_opt.trials, "random trials per component")->check(CLI::PositiveNumber)->capture_default_str();
  gradcheck->add_option("--seed", gc_opt.seed, "seed")->capture_default_str();
  gradcheck->add_flag("--inject-sign-flip", gc_opt.flip_sign, "test hook: negate analytic gradients");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    // --help lands here with exit code 0; help() follows the selected subcommand.
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "swmt: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (*synth) {
      SynthOptions o{detail::load_run_config(config_path), out_dir};
      if (synth_n->count()) o.config.synthetic.n_videos = n_videos;
      if (synth_scale->count()) o.config.synthetic.duration_scale = duration_scale;
      detail::resolve_seed(o.config, synth_seed, seed);
      try {
        o.config.synthetic.validate();
      } catch (const Error& e) {
        fail(ErrorKind::config, e.what());
      }
      return cmd_synth(o, out);
    }
    if (*parse) return cmd_parse({input_dir, out_dir}, out);
    if (*stats) {
      stats_opt.data = data_dir;
      stats_opt.out = out_dir;
      return cmd_stats(stats_opt, out);
    }
    if (*train) {
      train_opt.config = detail::load_run_config(config_path);
      detail::resolve_seed(train_opt.config, train_seed, seed);
      train_flags.apply(train_opt.config.pipeline);
      train_opt.data = data_dir;
      train_opt.out = out_dir;
      if (!resume_path.empty()) train_opt.resume = resume_path;
      if (stop_opt->count()) {
        if (stop_after <= 0) fail(ErrorKind::config, "--stop-after must be positive");
        train_opt.stop_after = stop_after;
      }
      return cmd_train(train_opt, out);
    }
    if (*evaluate) {
      eval_opt.eval = detail::load_run_config(config_path).eval;
      if (window_opt->count()) eval_opt.eval.smooth_window = smooth_window;
      if (thr_opt->count()) eval_opt.eval.tool_threshold = tool_threshold;
      if (eval_opt.eval.smooth_window < 1 || eval_opt.eval.smooth_window % 2 == 0)
        fail(ErrorKind::config, "--smooth-window must be odd and positive");
      if (!(eval_opt.eval.tool_threshold >= 0.0 && eval_opt.eval.tool_threshold <= 1.0))
        fail(ErrorKind::config, "--tool-threshold must lie in [0,1]");
      eval_opt.checkpoint = ckpt_path;
      eval_opt.data = data_dir;
      eval_opt.out = out_dir;
      try {
        return cmd_evaluate(eval_opt, out);
      } catch (const Error& e) {
        // A checkpoint that cannot serve this dataset is a mismatch, whatever the cause.
        if (e.kind() == ErrorKind::version || e.kind() == ErrorKind::dimension)
          fail(ErrorKind::mismatch, e.what());
        throw;
      }
    }
    if (*gradcheck) return cmd_gradcheck(gc_opt, out);
  } catch (const Error& e) {
    err << "swmt: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "swmt: " << e.what() << "\n";
    return kIoError;
  }
  return kConfigError;
}

}  // namespace swmt::cli
