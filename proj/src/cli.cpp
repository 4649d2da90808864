#include "capd/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "capd/error.hpp"
#include "capd/evaluation.hpp"
#include "capd/model_io.hpp"
#include "capd/pipeline.hpp"
#include "capd/synthgen.hpp"

namespace capd::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string preset = "small";
  std::string features;
  std::string embeddings;
  std::string split;
  std::string model;
  std::string predictions;
  std::string out;
  std::optional<std::string> mode;
  std::string support = "full";
  std::optional<double> lambda_s;
  std::optional<double> lambda_u;
  std::optional<double> lambda_gamma;
  double lr = 0.005;
  int iters = 100;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string delta_mode = "global";
  bool l2_normalize = false;
};

void configure_logging() {
  // run() may be called more than once per process (tests).
  spdlog::drop("capd");
  spdlog::set_default_logger(spdlog::stderr_color_st("capd"));
  spdlog::set_pattern("[%l] %v");
  const char* level = std::getenv("CAPD_LOG");
  if (!level) {
    spdlog::set_level(spdlog::level::warn);
    return;
  }
  const std::string text = level;
  if (text == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else if (text == "info") {
    spdlog::set_level(spdlog::level::info);
  } else if (text == "warn") {
    spdlog::set_level(spdlog::level::warn);
  } else {
    spdlog::set_level(spdlog::level::warn);
    spdlog::warn("CAPD_LOG='{}' is not one of debug|info|warn; using warn", text);
  }
}

std::string escape(const std::string& text) {
  std::string out;
  for (const char c : text) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c == '\n' ? ' ' : c);
  }
  return out;
}

int fail(const char* kind, const std::string& message, int code) {
  std::cerr << fmt::format("capd: error kind={} message=\"{}\"\n", kind, escape(message));
  return code;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) {
    throw ValidationError(fmt::format("--{} is required", what));
  }
  if (!fs::is_regular_file(path)) {
    throw ValidationError(fmt::format("{} file '{}' does not exist", what, path));
  }
}

void require_out(const std::string& path) {
  if (path.empty()) {
    throw ValidationError("--out is required");
  }
  fs::create_directories(path);
}

struct Inputs {
  FeatureTable features;
  EmbeddingTable embeddings;
  SplitConfig split_config;
  ExperimentSplit split;
};

Inputs load_inputs(const Options& o) {
  require_file(o.features, "features");
  require_file(o.embeddings, "embeddings");
  require_file(o.split, "split");
  Inputs in{load_features(o.features), load_embeddings(o.embeddings, o.l2_normalize),
            load_split_config(o.split), {}};
  if (o.mode) {
    const auto mode = parse_mode(*o.mode);
    if (mode != in.split_config.mode) {
      spdlog::info("overriding split mode {} with {}", to_string(in.split_config.mode),
                   to_string(mode));
      in.split_config.mode = mode;
    }
  }
  in.split = make_split(in.features, in.embeddings, in.split_config, in.split_config.seed);
  return in;
}

void cmd_synth(const Options& o) {
  require_out(o.out);
  auto cfg = synth_preset(o.preset);
  if (o.seed) cfg.seed = *o.seed;
  if (o.mode) cfg.mode = parse_mode(*o.mode);
  const auto data = generate(cfg);
  const fs::path dir = o.out;
  write_features(dir / "features.csv", data.features);
  write_embeddings(dir / "embeddings.csv", data.embeddings);
  write_split_config(dir / "split.txt", data.split_config);
  spdlog::info("wrote {} instances for {} classes to {}", data.features.size(),
               data.embeddings.ids().size(), dir.string());
}

void cmd_train(const Options& o) {
  if (o.model.empty()) {
    throw ValidationError("--model is required");
  }
  const auto in = load_inputs(o);
  TrainConfig cfg;
  cfg.mode = in.split_config.mode;
  cfg.support = parse_support_mode(o.support);
  cfg.lambda_s = o.lambda_s;
  cfg.lambda_u = o.lambda_u;
  cfg.lambda_gamma = o.lambda_gamma;
  cfg.learning_rate = o.lr;
  cfg.epochs = o.iters;
  cfg.delta_mode = parse_delta_mode(o.delta_mode);
  cfg.seed = o.seed.value_or(in.split_config.seed);
  cfg.threads = o.threads;
  const auto model = train_model(in.features, in.embeddings, in.split, cfg);
  const fs::path path = o.model;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  save_model(path, model);
  spdlog::info("saved {} model to {}", to_string(cfg.mode), path.string());
}

void cmd_predict(const Options& o) {
  require_file(o.model, "model");
  const auto model = load_model(o.model);
  const auto in = load_inputs(o);
  require_out(o.out);
  const auto rows = in.features.rows_of(in.split.test_instances(in.features));
  const auto predictions = predict_batch(model, in.split.mode, in.features, rows, o.threads);
  const auto set = make_prediction_set(in.features, rows, predictions);
  write_predictions_csv(fs::path(o.out) / "predictions.csv", set);
  spdlog::info("wrote {} predictions", rows.size());
}

void cmd_eval(const Options& o) {
  require_file(o.features, "features");
  require_file(o.split, "split");
  require_out(o.out);
  const fs::path pred_path =
      o.predictions.empty() ? fs::path(o.out) / "predictions.csv" : fs::path(o.predictions);
  require_file(pred_path.string(), "predictions");

  const auto features = load_features(o.features);
  auto split_cfg = load_split_config(o.split);
  if (o.mode) split_cfg.mode = parse_mode(*o.mode);
  const auto set = read_predictions_csv(pred_path);

  std::vector<ClassId> truth;
  truth.reserve(set.predicted.size());
  for (const auto& id : set.scores.instance_ids) {
    if (!features.contains(id)) {
      throw ValidationError(fmt::format("predicted instance '{}' is not in the feature table", id));
    }
    truth.push_back(features[features.row_of(id)].class_id);
  }
  const ScoreTable* scores = set.scores.class_ids.empty() ? nullptr : &set.scores;
  EvalReport report;
  if (split_cfg.mode == Mode::gzsl) {
    ExperimentSplit groups;
    groups.seen_ids = split_cfg.seen;
    groups.unseen_ids = split_cfg.unseen;
    std::sort(groups.seen_ids.begin(), groups.seen_ids.end());
    std::sort(groups.unseen_ids.begin(), groups.unseen_ids.end());
    report = gzsl_report(set.predicted, truth, groups, scores);
  } else {
    report = evaluate(set.predicted, truth, set.scores.class_ids, scores);
  }
  write_report(o.out, report);
  std::cout << fmt::format("top1 = {}\n", report.top1);
  if (report.hm) {
    std::cout << fmt::format("acc_s = {}\nacc_u = {}\nhm = {}\n", *report.acc_s, *report.acc_u,
                             *report.hm);
  }
}

}  // namespace

int run(const std::vector<std::string>& args) {
  configure_logging();
  CLI::App app{"CAPD zero-shot learning toolkit", "capd"};
  app.require_subcommand(1);
  Options o;

  const auto add_io = [&](CLI::App* cmd) {
    cmd->add_option("--features", o.features, "feature CSV");
    cmd->add_option("--embeddings", o.embeddings, "class embedding CSV");
    cmd->add_option("--split", o.split, "split config");
    cmd->add_option("--model", o.model, "model container");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--mode", o.mode, "zsl|gzsl|fsl|osl (default: from the split)")
        ->check(CLI::IsMember({"zsl", "gzsl", "fsl", "osl"}));
    cmd->add_option("--seed", o.seed, "seed");
    cmd->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_flag("--l2-normalize", o.l2_normalize, "L2-normalize embeddings on load");
  };

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset");
  synth->add_option("--preset", o.preset, "small|tiny");
  synth->add_option("--out", o.out, "output directory")->required();
  synth->add_option("--seed", o.seed, "seed");
  synth->add_option("--mode", o.mode, "split mode")
      ->check(CLI::IsMember({"zsl", "gzsl", "fsl", "osl"}));

  auto* train = app.add_subcommand("train", "train a model");
  add_io(train);
  train->add_option("--support", o.support, "full|reduced-auto")
      ->check(CLI::IsMember({"full", "reduced-auto"}));
  train->add_option("--lambda-s", o.lambda_s, "seen classifier regularization");
  train->add_option("--lambda-u", o.lambda_u, "mixing regularization");
  train->add_option("--lambda-gamma", o.lambda_gamma, "GZSL gamma regularization");
  train->add_option("--lr", o.lr, "SGD learning rate");
  train->add_option("--iters", o.iters, "SGD epochs");
  train->add_option("--delta-mode", o.delta_mode, "global|per_class")
      ->check(CLI::IsMember({"global", "per_class"}));

  auto* pred = app.add_subcommand("predict", "predict the split's test instances");
  add_io(pred);

  auto* ev = app.add_subcommand("eval", "score a prediction CSV");
  add_io(ev);
  ev->add_option("--predictions", o.predictions, "prediction CSV (default: OUT/predictions.csv)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), kExitUsage);
  }

  try {
    if (*synth) {
      cmd_synth(o);
    } else if (*train) {
      cmd_train(o);
    } else if (*pred) {
      cmd_predict(o);
    } else if (*ev) {
      cmd_eval(o);
    }
  } catch (const SolverError& e) {
    return fail("numerical", e.what(), kExitNumerical);
  } catch (const ValidationError& e) {
    return fail("validation", e.what(), kExitValidation);
  } catch (const fs::filesystem_error& e) {
    return fail("validation", e.what(), kExitValidation);
  }
  return kExitOk;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) {
    args.emplace_back(argv[i]);
  }
  return run(args);
}

}  // namespace capd::cli
