#pragma once

#include <cstdint>
#include <map>
#include <span>

#include "capd/model.hpp"
#include "capd/zsl_engine.hpp"

namespace capd {

/// Trains one projector per unseen class on the revealed shots, with the
/// other unseen classes' shots as negatives.
ClassifierBank train_unseen_classifiers(const ExperimentSplit& split, const FeatureTable& features,
                                        const EmbeddingTable& embeddings, const SgdHyper& hyper,
                                        std::uint64_t seed, unsigned threads = 1);

struct DeltaResult {
  std::map<ClassId, DeltaPair> deltas;
  double mixture_total = 0.0;  // A
  double shot_total = 0.0;     // B
  bool fallback = false;
};

/// Fusion weights from seen training features. Global mode:
///   A = sum_x max_u <p_u(x), e_u>,  B = sum_x max_u <p'_u(x), e_u>,
///   delta = A / (A + B), delta' = B / (A + B), shared by every unseen class.
/// Per-class mode fixes u inside the sums instead of taking the max.
/// Negative totals are clamped at zero; if A + B is not positive both
/// weights fall back to 0.5. Sums run in row order.
DeltaResult compute_deltas(const CapdModel& model, const ClassifierBank& unseen_bank,
                           const FeatureTable& features, std::span<const std::size_t> seen_rows,
                           DeltaMode mode = DeltaMode::global, unsigned threads = 1);

/// Argmax over unseen classes of <delta p_u + delta' p'_u, e_u>.
Prediction predict_fsl(const CapdModel& model, const Vector& x);

}  // namespace capd
