#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "capd/data_model.hpp"
#include "capd/evaluation.hpp"
#include "capd/fsl_updater.hpp"
#include "capd/gzsl_balancer.hpp"
#include "capd/model.hpp"
#include "capd/zsl_engine.hpp"

namespace capd {

// Candidate regularization weights tried on the validation split when the
// corresponding value is not fixed.
inline constexpr double kLambdaSGrid[] = {1e-4, 1e-3, 1e-2, 1e-1};
inline constexpr double kLambdaUGrid[] = {1e-3, 1e-2, 1e-1, 1.0};
inline constexpr double kLambdaGammaGrid[] = {1e-4, 1e-3, 1e-2};

inline constexpr double kDefaultLambdaU = 1e-2;

struct TrainConfig {
  Mode mode = Mode::zsl;
  SupportMode support = SupportMode::full;
  // Unset values are chosen on a validation split of the seen classes.
  std::optional<double> lambda_s;
  std::optional<double> lambda_u;
  std::optional<double> lambda_gamma;
  double learning_rate = 0.005;
  int epochs = 100;
  MetricHyper metric;
  std::size_t pair_budget = kDefaultPairBudget;
  double gamma_step = 0.01;
  int gamma_iterations = 500;
  DeltaMode delta_mode = DeltaMode::global;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct SelectedHyper {
  double lambda_s = 1e-3;
  double lambda_u = kDefaultLambdaU;
  double lambda_gamma = 1e-3;
};

/// Fills unset regularization weights. Half of the seen classes (a seeded
/// draw) act as unseen; lambda_s and lambda_u maximize validation ZSL top-1,
/// lambda_gamma maximizes the validation harmonic mean in GZSL mode. Seen
/// sets too small to split fall back to the defaults.
SelectedHyper select_hyperparameters(const FeatureTable& features,
                                     const EmbeddingTable& embeddings,
                                     const ExperimentSplit& split, const TrainConfig& cfg);

/// Seen bank, metric and mixers for the given seen/unseen classes, trained on
/// `train_rows`.
CapdModel fit_zsl(const FeatureTable& features, const EmbeddingTable& embeddings,
                  std::span<const ClassId> seen_ids, std::span<const ClassId> unseen_ids,
                  std::span<const std::size_t> train_rows, const SgdHyper& sgd, double lambda_u,
                  SupportMode support, const MetricHyper& metric, std::size_t pair_budget,
                  std::uint64_t seed, unsigned threads);

/// Mixers for every unseen class under `support`.
std::map<ClassId, MixingCoefficients> build_mixers(const EmbeddingTable& embeddings,
                                                   std::span<const ClassId> seen_ids,
                                                   std::span<const ClassId> unseen_ids,
                                                   const PsdMatrix& m, double lambda_u,
                                                   SupportMode support);

/// Full training for the split's mode: ZSL parts, plus gamma for GZSL, plus
/// shot classifiers and fusion weights for FSL/OSL.
CapdModel train_model(const FeatureTable& features, const EmbeddingTable& embeddings,
                      const ExperimentSplit& split, const TrainConfig& cfg);

Prediction predict(const CapdModel& model, Mode mode, const Vector& x);

/// Predictions for `rows`, in order. Parallel over instances.
std::vector<Prediction> predict_batch(const CapdModel& model, Mode mode,
                                      const FeatureTable& features,
                                      std::span<const std::size_t> rows, unsigned threads = 1);

/// Predicted labels plus the full score table, as stored in a prediction CSV.
struct PredictionSet {
  std::vector<ClassId> predicted;
  ScoreTable scores;
};

PredictionSet make_prediction_set(const FeatureTable& features, std::span<const std::size_t> rows,
                                  const std::vector<Prediction>& predictions);

// `instance_id,predicted_class,score_<id>...`, one row per instance.
std::string format_predictions_csv(const PredictionSet& set);
void write_predictions_csv(const std::filesystem::path& path, const PredictionSet& set);
PredictionSet read_predictions_csv(const std::filesystem::path& path);

}  // namespace capd
