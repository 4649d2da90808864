#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "capd/data_model.hpp"
#include "capd/metric_learning.hpp"
#include "capd/seen_classifier.hpp"
#include "capd/semantic_mixer.hpp"

namespace capd {

/// Generalization coefficients for seen CAPDs: column s of `gammas` is the
/// mixture gamma_s over all seen CAPDs (rows and columns follow seen_ids).
struct GammaModel {
  std::vector<ClassId> seen_ids;
  Matrix gammas;
  double lambda_gamma = 0.0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  std::vector<double> trace;  // objective after each accepted step
};

enum class DeltaMode { global, per_class };

std::string to_string(DeltaMode mode);
DeltaMode parse_delta_mode(const std::string& text);

struct DeltaPair {
  double delta = 0.5;        // weight of the mixture-derived unseen CAPD
  double delta_prime = 0.5;  // weight of the shot-trained unseen CAPD
};

struct FslModel {
  ClassifierBank unseen_bank;
  std::map<ClassId, DeltaPair> deltas;
  DeltaMode mode = DeltaMode::global;
  bool fallback = false;  // A + B was not positive; deltas defaulted to 0.5
};

/// Hyperparameters the model was trained with, kept for provenance.
struct ModelSettings {
  SgdHyper sgd;
  double lambda_u = 0.0;
  SupportMode support = SupportMode::full;
  std::uint64_t seed = 0;
};

/// Everything needed at prediction time.
struct CapdModel {
  ClassifierBank bank;  // seen classes
  MetricModel metric;
  EmbeddingTable embeddings;
  std::vector<ClassId> seen_ids;
  std::vector<ClassId> unseen_ids;
  std::map<ClassId, MixingCoefficients> mixers;
  std::optional<GammaModel> gzsl;
  std::optional<FslModel> fsl;
  ModelSettings settings;

  // Throws ValidationError on dimensional or coverage inconsistencies.
  void validate() const;
};

}  // namespace capd
