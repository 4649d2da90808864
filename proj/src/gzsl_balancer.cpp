#include "capd/gzsl_balancer.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "capd/error.hpp"

namespace capd {

namespace {

// Constant c = (1/U) sum_u (E alpha_u - e_u)^2.
Vector mean_unseen_residual(const EmbeddingTable& embeddings, std::span<const ClassId> seen_ids,
                            std::span<const ClassId> unseen_ids,
                            const std::map<ClassId, MixingCoefficients>& full_mixers) {
  if (unseen_ids.empty()) {
    throw ValidationError("GZSL objective needs at least one unseen class");
  }
  const Matrix E = embeddings.columns(seen_ids);
  Vector c = Vector::Zero(E.rows());
  for (const ClassId u : unseen_ids) {
    const auto it = full_mixers.find(u);
    if (it == full_mixers.end()) {
      throw ValidationError(fmt::format("GZSL objective: missing alpha for unseen class {}", u));
    }
    const auto& mix = it->second;
    if (mix.mode != MixingMode::full ||
        !std::equal(mix.support.begin(), mix.support.end(), seen_ids.begin(), seen_ids.end())) {
      throw ValidationError(
          fmt::format("GZSL objective: alpha for unseen class {} is not a full-mode mixture", u));
    }
    c += (E * mix.weights - embeddings.at(u)).array().square().matrix();
  }
  return c / static_cast<double>(unseen_ids.size());
}

GammaObjective evaluate(const Matrix& gammas, const Matrix& E, const Vector& c, double lambda) {
  const auto S = E.cols();
  const Matrix residual = E * gammas - E;  // column s: E gamma_s - e_s
  const Vector mean_seen = residual.array().square().rowwise().sum().matrix() / static_cast<double>(S);
  const Vector gap = mean_seen - c;
  GammaObjective out;
  out.value = gap.squaredNorm() + 0.5 * lambda * gammas.squaredNorm();
  out.grads = (4.0 / static_cast<double>(S)) * E.transpose() * (residual.array().colwise() * gap.array()).matrix() +
              lambda * gammas;
  return out;
}

}  // namespace

GammaObjective gzsl_objective_and_grads(const Matrix& gammas, const EmbeddingTable& embeddings,
                                        std::span<const ClassId> seen_ids,
                                        std::span<const ClassId> unseen_ids,
                                        const std::map<ClassId, MixingCoefficients>& full_mixers,
                                        double lambda_gamma) {
  const auto S = static_cast<Eigen::Index>(seen_ids.size());
  if (gammas.rows() != S || gammas.cols() != S) {
    throw ValidationError(
        fmt::format("gammas must be {}x{}, got {}x{}", S, S, gammas.rows(), gammas.cols()));
  }
  const Vector c = mean_unseen_residual(embeddings, seen_ids, unseen_ids, full_mixers);
  return evaluate(gammas, embeddings.columns(seen_ids), c, lambda_gamma);
}

GammaModel train_gamma(const EmbeddingTable& embeddings, std::span<const ClassId> seen_ids,
                       std::span<const ClassId> unseen_ids,
                       const std::map<ClassId, MixingCoefficients>& full_mixers,
                       const GammaHyper& hyper) {
  if (hyper.iterations < 0 || !(hyper.step > 0.0) || !(hyper.lambda_gamma >= 0.0)) {
    throw ValidationError("gamma hyperparameters out of range");
  }
  const auto S = static_cast<Eigen::Index>(seen_ids.size());
  const Matrix E = embeddings.columns(seen_ids);
  const Vector c = mean_unseen_residual(embeddings, seen_ids, unseen_ids, full_mixers);

  GammaModel model;
  model.seen_ids.assign(seen_ids.begin(), seen_ids.end());
  model.lambda_gamma = hyper.lambda_gamma;
  model.gammas = Matrix::Identity(S, S);

  auto current = evaluate(model.gammas, E, c, hyper.lambda_gamma);
  model.initial_objective = current.value;
  model.trace.push_back(current.value);
  double step = hyper.step;
  for (int it = 0; it < hyper.iterations; ++it) {
    const Matrix candidate = model.gammas - step * current.grads;
    auto next = evaluate(candidate, E, c, hyper.lambda_gamma);
    if (next.value < current.value) {
      model.gammas = candidate;
      current = std::move(next);
      model.trace.push_back(current.value);
    } else {
      step *= 0.5;
    }
  }
  model.final_objective = current.value;
  return model;
}

Prediction predict_gzsl(const CapdModel& model, const Vector& x) {
  if (!model.gzsl) {
    throw ValidationError("GZSL prediction needs a trained gamma model");
  }
  const Matrix P = model.bank.capds(x);
  const Matrix generalized = P * model.gzsl->gammas;
  Prediction out;
  for (std::size_t i = 0; i < model.seen_ids.size(); ++i) {
    const ClassId s = model.seen_ids[i];
    out.scores[s] = generalized.col(static_cast<Eigen::Index>(i)).dot(model.embeddings.at(s));
  }
  for (const ClassId u : model.unseen_ids) {
    out.scores[u] = unseen_capd_from(model, P, u).dot(model.embeddings.at(u));
  }
  out.label = argmax_label(out.scores);
  return out;
}

}  // namespace capd
