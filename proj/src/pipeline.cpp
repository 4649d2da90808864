#include "capd/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "capd/error.hpp"
#include "capd/parallel.hpp"
#include "capd/random.hpp"

namespace capd {

namespace {

double zsl_top1(const CapdModel& model, const FeatureTable& features,
                std::span<const std::size_t> rows, unsigned threads) {
  const auto predictions = predict_batch(model, Mode::zsl, features, rows, threads);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    hits += predictions[i].label == features[rows[i]].class_id ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

double gzsl_hm(const CapdModel& model, const FeatureTable& features,
               std::span<const std::size_t> rows, unsigned threads) {
  const auto predictions = predict_batch(model, Mode::gzsl, features, rows, threads);
  std::vector<ClassId> predicted;
  std::vector<ClassId> truth;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    predicted.push_back(predictions[i].label);
    truth.push_back(features[rows[i]].class_id);
  }
  ExperimentSplit groups;
  groups.seen_ids = model.seen_ids;
  groups.unseen_ids = model.unseen_ids;
  return *gzsl_report(predicted, truth, groups).hm;
}

std::vector<std::size_t> rows_in(const FeatureTable& features, std::span<const std::size_t> rows,
                                 const std::set<ClassId>& classes) {
  std::vector<std::size_t> out;
  for (const std::size_t row : rows) {
    if (classes.contains(features[row].class_id)) {
      out.push_back(row);
    }
  }
  return out;
}

std::vector<double> candidates(const std::optional<double>& fixed, std::span<const double> grid) {
  if (fixed) {
    return {*fixed};
  }
  return {grid.begin(), grid.end()};
}

}  // namespace

std::map<ClassId, MixingCoefficients> build_mixers(const EmbeddingTable& embeddings,
                                                   std::span<const ClassId> seen_ids,
                                                   std::span<const ClassId> unseen_ids,
                                                   const PsdMatrix& m, double lambda_u,
                                                   SupportMode support) {
  std::map<ClassId, MixingCoefficients> mixers;
  for (const ClassId u : unseen_ids) {
    const Vector& e_u = embeddings.at(u);
    if (support == SupportMode::full || seen_ids.size() < 2) {
      mixers.emplace(u, solve_alpha(embeddings, seen_ids, m, e_u, lambda_u, u));
    } else {
      const auto selection = auto_select_support(embeddings, seen_ids, m, e_u);
      mixers.emplace(u, solve_beta(embeddings, selection.support, m, e_u, lambda_u, u));
    }
  }
  return mixers;
}

CapdModel fit_zsl(const FeatureTable& features, const EmbeddingTable& embeddings,
                  std::span<const ClassId> seen_ids, std::span<const ClassId> unseen_ids,
                  std::span<const std::size_t> train_rows, const SgdHyper& sgd, double lambda_u,
                  SupportMode support, const MetricHyper& metric, std::size_t pair_budget,
                  std::uint64_t seed, unsigned threads) {
  CapdModel model;
  model.seen_ids.assign(seen_ids.begin(), seen_ids.end());
  model.unseen_ids.assign(unseen_ids.begin(), unseen_ids.end());
  model.embeddings = embeddings;
  model.bank = train_all(features, train_rows, embeddings, seen_ids, sgd, seed, threads);
  const auto pairs = build_pairs(model.bank, features, train_rows, pair_budget, seed);
  model.metric = learn_metric(pairs, metric);
  model.mixers = build_mixers(embeddings, seen_ids, unseen_ids, model.metric.M, lambda_u, support);
  model.settings = {sgd, lambda_u, support, seed};
  return model;
}

SelectedHyper select_hyperparameters(const FeatureTable& features,
                                     const EmbeddingTable& embeddings,
                                     const ExperimentSplit& split, const TrainConfig& cfg) {
  SelectedHyper out;
  if (cfg.lambda_s) out.lambda_s = *cfg.lambda_s;
  if (cfg.lambda_u) out.lambda_u = *cfg.lambda_u;
  if (cfg.lambda_gamma) out.lambda_gamma = *cfg.lambda_gamma;

  const bool tune_gamma = cfg.mode == Mode::gzsl && !cfg.lambda_gamma;
  if (cfg.lambda_s && cfg.lambda_u && !tune_gamma) {
    return out;
  }
  if (split.seen_ids.size() < 3) {
    spdlog::warn("too few seen classes for a validation split; using default regularization");
    return out;
  }

  auto shuffled = split.seen_ids;
  auto rng = Rng::for_stream(cfg.seed, 0, stream::kValidation);
  rng.shuffle(std::span(shuffled));
  const auto n_unseen = shuffled.size() / 2;
  std::vector<ClassId> val_unseen(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_unseen));
  std::vector<ClassId> val_seen(shuffled.begin() + static_cast<std::ptrdiff_t>(n_unseen), shuffled.end());
  std::sort(val_unseen.begin(), val_unseen.end());
  std::sort(val_seen.begin(), val_seen.end());

  const auto train_rows = features.rows_of(split.seen_train);
  auto val_train = rows_in(features, train_rows, {val_seen.begin(), val_seen.end()});
  const auto val_test = rows_in(features, train_rows, {val_unseen.begin(), val_unseen.end()});

  // In GZSL mode a slice of every validation-seen class is held out so the
  // harmonic mean can be measured.
  std::vector<std::size_t> val_seen_test;
  if (tune_gamma) {
    std::vector<std::size_t> kept;
    for (const ClassId c : val_seen) {
      auto rows = rows_in(features, val_train, {c});
      auto class_rng = Rng::for_stream(cfg.seed, c, stream::kValidation);
      class_rng.shuffle(std::span(rows));
      const auto n_train = static_cast<std::size_t>(
          std::ceil(kGzslTrainFraction * static_cast<double>(rows.size())));
      kept.insert(kept.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
      val_seen_test.insert(val_seen_test.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train),
                           rows.end());
    }
    std::sort(kept.begin(), kept.end());
    std::sort(val_seen_test.begin(), val_seen_test.end());
    val_train = std::move(kept);
  }

  std::optional<CapdModel> best;
  double best_score = -1.0;
  for (const double lambda_s : candidates(cfg.lambda_s, kLambdaSGrid)) {
    SgdHyper sgd{lambda_s, cfg.learning_rate, cfg.epochs};
    auto model = fit_zsl(features, embeddings, val_seen, val_unseen, val_train, sgd, out.lambda_u,
                         cfg.support, cfg.metric, cfg.pair_budget, cfg.seed, cfg.threads);
    const double score = zsl_top1(model, features, val_test, cfg.threads);
    spdlog::debug("validation: lambda_s = {} -> top-1 {:.4f}", lambda_s, score);
    if (score > best_score) {
      best_score = score;
      best = std::move(model);
      out.lambda_s = lambda_s;
    }
  }

  if (!cfg.lambda_u) {
    best_score = -1.0;
    double chosen = out.lambda_u;
    for (const double lambda_u : kLambdaUGrid) {
      best->mixers = build_mixers(embeddings, val_seen, val_unseen, best->metric.M, lambda_u, cfg.support);
      const double score = zsl_top1(*best, features, val_test, cfg.threads);
      spdlog::debug("validation: lambda_u = {} -> top-1 {:.4f}", lambda_u, score);
      if (score > best_score) {
        best_score = score;
        chosen = lambda_u;
      }
    }
    out.lambda_u = chosen;
    best->mixers = build_mixers(embeddings, val_seen, val_unseen, best->metric.M, chosen, cfg.support);
  }

  if (tune_gamma && !val_seen_test.empty()) {
    auto test_rows = val_seen_test;
    test_rows.insert(test_rows.end(), val_test.begin(), val_test.end());
    const auto full = build_mixers(embeddings, val_seen, val_unseen, best->metric.M, out.lambda_u,
                                   SupportMode::full);
    best_score = -1.0;
    for (const double lambda_gamma : kLambdaGammaGrid) {
      best->gzsl = train_gamma(embeddings, val_seen, val_unseen, full,
                               {cfg.gamma_step, cfg.gamma_iterations, lambda_gamma});
      const double score = gzsl_hm(*best, features, test_rows, cfg.threads);
      spdlog::debug("validation: lambda_gamma = {} -> HM {:.4f}", lambda_gamma, score);
      if (score > best_score) {
        best_score = score;
        out.lambda_gamma = lambda_gamma;
      }
    }
  }
  spdlog::info("selected lambda_s = {}, lambda_u = {}, lambda_gamma = {}", out.lambda_s,
               out.lambda_u, out.lambda_gamma);
  return out;
}

CapdModel train_model(const FeatureTable& features, const EmbeddingTable& embeddings,
                      const ExperimentSplit& split, const TrainConfig& cfg) {
  if ((cfg.mode == Mode::fsl || cfg.mode == Mode::osl) && split.fsl_shots.empty()) {
    throw ValidationError(fmt::format("{} training needs a split with shots (split mode is {})",
                                      to_string(cfg.mode), to_string(split.mode)));
  }
  check_consistent(features, embeddings);
  const auto hyper = select_hyperparameters(features, embeddings, split, cfg);
  const SgdHyper sgd{hyper.lambda_s, cfg.learning_rate, cfg.epochs};
  const auto train_rows = features.rows_of(split.seen_train);

  spdlog::info("training {} seen classifiers on {} instances", split.seen_ids.size(),
               train_rows.size());
  auto model = fit_zsl(features, embeddings, split.seen_ids, split.unseen_ids, train_rows, sgd,
                       hyper.lambda_u, cfg.support, cfg.metric, cfg.pair_budget, cfg.seed,
                       cfg.threads);

  if (cfg.mode == Mode::gzsl) {
    const auto full = cfg.support == SupportMode::full
                          ? model.mixers
                          : build_mixers(embeddings, split.seen_ids, split.unseen_ids,
                                         model.metric.M, hyper.lambda_u, SupportMode::full);
    model.gzsl = train_gamma(embeddings, split.seen_ids, split.unseen_ids, full,
                             {cfg.gamma_step, cfg.gamma_iterations, hyper.lambda_gamma});
  }

  if (cfg.mode == Mode::fsl || cfg.mode == Mode::osl) {
    spdlog::info("training {} unseen classifiers on {} shots", split.unseen_ids.size(),
                 split.all_shots().size());
    FslModel fsl;
    fsl.unseen_bank =
        train_unseen_classifiers(split, features, embeddings, sgd, cfg.seed, cfg.threads);
    auto deltas = compute_deltas(model, fsl.unseen_bank, features, train_rows, cfg.delta_mode,
                                 cfg.threads);
    fsl.deltas = std::move(deltas.deltas);
    fsl.mode = cfg.delta_mode;
    fsl.fallback = deltas.fallback;
    model.fsl = std::move(fsl);
  }
  model.validate();
  return model;
}

Prediction predict(const CapdModel& model, Mode mode, const Vector& x) {
  switch (mode) {
    case Mode::zsl:
      return predict_zsl(model, x);
    case Mode::gzsl:
      return predict_gzsl(model, x);
    case Mode::fsl:
    case Mode::osl:
      return predict_fsl(model, x);
  }
  return predict_zsl(model, x);
}

std::vector<Prediction> predict_batch(const CapdModel& model, Mode mode,
                                      const FeatureTable& features,
                                      std::span<const std::size_t> rows, unsigned threads) {
  std::vector<Prediction> out(rows.size());
  parallel_for(rows.size(), threads,
               [&](std::size_t i) { out[i] = predict(model, mode, features[rows[i]].x); });
  return out;
}

PredictionSet make_prediction_set(const FeatureTable& features, std::span<const std::size_t> rows,
                                  const std::vector<Prediction>& predictions) {
  if (rows.size() != predictions.size()) {
    throw ValidationError("rows and predictions differ in length");
  }
  PredictionSet set;
  if (predictions.empty()) {
    return set;
  }
  for (const auto& [c, _] : predictions.front().scores) {
    set.scores.class_ids.push_back(c);
  }
  const auto n_classes = static_cast<Eigen::Index>(set.scores.class_ids.size());
  set.scores.scores.resize(static_cast<Eigen::Index>(rows.size()), n_classes);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    set.scores.instance_ids.push_back(features[rows[i]].id);
    set.predicted.push_back(predictions[i].label);
    const auto& scores = predictions[i].scores;
    if (static_cast<Eigen::Index>(scores.size()) != n_classes) {
      throw ValidationError("predictions carry different candidate class sets");
    }
    Eigen::Index j = 0;
    for (const auto& [c, v] : scores) {
      set.scores.scores(static_cast<Eigen::Index>(i), j++) = v;
    }
  }
  return set;
}

std::string format_predictions_csv(const PredictionSet& set) {
  fmt::memory_buffer out;
  fmt::format_to(std::back_inserter(out), "instance_id,predicted_class");
  for (const ClassId c : set.scores.class_ids) {
    fmt::format_to(std::back_inserter(out), ",score_{}", c);
  }
  out.push_back('\n');
  for (std::size_t i = 0; i < set.predicted.size(); ++i) {
    fmt::format_to(std::back_inserter(out), "{},{}", set.scores.instance_ids[i], set.predicted[i]);
    for (Eigen::Index j = 0; j < set.scores.scores.cols(); ++j) {
      fmt::format_to(std::back_inserter(out), ",{}", set.scores.scores(static_cast<Eigen::Index>(i), j));
    }
    out.push_back('\n');
  }
  return fmt::to_string(out);
}

void write_predictions_csv(const std::filesystem::path& path, const PredictionSet& set) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  }
  out << format_predictions_csv(set);
}

PredictionSet read_predictions_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  }
  const auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      cells.push_back(cell);
    }
    return cells;
  };
  const auto parse_id = [](const std::string& text, std::size_t line) {
    ClassId v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw FormatError(fmt::format("bad class id '{}'", text), line);
    }
    return v;
  };

  PredictionSet set;
  std::string line;
  std::size_t number = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (number == 1) {
      if (cells.size() < 2 || cells[0] != "instance_id" || cells[1] != "predicted_class") {
        throw FormatError("prediction header must be instance_id,predicted_class,score_<id>...", 1);
      }
      for (std::size_t i = 2; i < cells.size(); ++i) {
        if (cells[i].rfind("score_", 0) != 0) {
          throw FormatError(fmt::format("bad score column '{}'", cells[i]), 1);
        }
        set.scores.class_ids.push_back(parse_id(cells[i].substr(6), 1));
      }
      continue;
    }
    if (cells.size() != set.scores.class_ids.size() + 2) {
      throw FormatError("prediction row has the wrong number of cells", number);
    }
    set.scores.instance_ids.push_back(cells[0]);
    set.predicted.push_back(parse_id(cells[1], number));
    std::vector<double> values;
    for (std::size_t i = 2; i < cells.size(); ++i) {
      double v = 0.0;
      const auto& text = cells[i];
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw FormatError(fmt::format("bad score '{}'", text), number);
      }
      values.push_back(v);
    }
    rows.push_back(std::move(values));
  }
  if (number == 0) {
    throw FormatError("prediction file is empty");
  }
  set.scores.scores.resize(static_cast<Eigen::Index>(rows.size()),
                           static_cast<Eigen::Index>(set.scores.class_ids.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      set.scores.scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return set;
}

}  // namespace capd
