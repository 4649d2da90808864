#pragma once

#include <map>
#include <span>

#include "capd/model.hpp"
#include "capd/zsl_engine.hpp"

namespace capd {

struct GammaHyper {
  double step = 0.01;
  int iterations = 500;
  double lambda_gamma = 1e-3;
};

struct GammaObjective {
  double value = 0.0;
  Matrix grads;  // column s is the gradient w.r.t. gamma_s
};

/// Squared difference between the mean elementwise-squared seen
/// reconstruction residual (E gamma_s - e_s)^2 and the mean unseen residual
/// (E alpha_u - e_u)^2, plus (lambda / 2) sum ||gamma_s||^2. `gammas` is
/// S x S with column s = gamma_s; `full_mixers` must hold full-mode alpha_u
/// for every unseen id.
GammaObjective gzsl_objective_and_grads(const Matrix& gammas, const EmbeddingTable& embeddings,
                                        std::span<const ClassId> seen_ids,
                                        std::span<const ClassId> unseen_ids,
                                        const std::map<ClassId, MixingCoefficients>& full_mixers,
                                        double lambda_gamma);

/// Gradient descent from gamma_s = one-hot(s). A step is kept only if it
/// lowers the objective; otherwise the step size halves.
GammaModel train_gamma(const EmbeddingTable& embeddings, std::span<const ClassId> seen_ids,
                       std::span<const ClassId> unseen_ids,
                       const std::map<ClassId, MixingCoefficients>& full_mixers,
                       const GammaHyper& hyper);

/// Joint prediction over seen and unseen classes, scoring seen classes with
/// their generalized CAPDs P gamma_s.
Prediction predict_gzsl(const CapdModel& model, const Vector& x);

}  // namespace capd
