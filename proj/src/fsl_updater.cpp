#include "capd/fsl_updater.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "capd/error.hpp"
#include "capd/parallel.hpp"

namespace capd {

ClassifierBank train_unseen_classifiers(const ExperimentSplit& split, const FeatureTable& features,
                                        const EmbeddingTable& embeddings, const SgdHyper& hyper,
                                        std::uint64_t seed, unsigned threads) {
  std::vector<ClassId> with_shots;
  for (const ClassId u : split.unseen_ids) {
    const auto it = split.fsl_shots.find(u);
    if (it == split.fsl_shots.end() || it->second.empty()) {
      throw ValidationError(fmt::format("unseen class {} has no shots", u));
    }
    with_shots.push_back(u);
  }
  if (with_shots.size() < 2) {
    throw ValidationError(
        "few-shot training needs shots from at least 2 unseen classes (no negatives otherwise)");
  }
  const auto shots = split.all_shots();
  const auto rows = features.rows_of(shots);
  return train_all(features, rows, embeddings, with_shots, hyper, seed, threads);
}

DeltaResult compute_deltas(const CapdModel& model, const ClassifierBank& unseen_bank,
                           const FeatureTable& features, std::span<const std::size_t> seen_rows,
                           DeltaMode mode, unsigned threads) {
  const auto& unseen = model.unseen_ids;
  if (unseen_bank.ids() != unseen) {
    throw ValidationError("unseen classifier bank does not cover the model's unseen classes");
  }
  const auto U = static_cast<Eigen::Index>(unseen.size());
  const Matrix Eu = model.embeddings.columns(unseen);

  // Per row: responses <p_u, e_u> and <p'_u, e_u> for every u.
  std::vector<Vector> mixture(seen_rows.size());
  std::vector<Vector> shot(seen_rows.size());
  parallel_for(seen_rows.size(), threads, [&](std::size_t i) {
    const Vector& x = features[seen_rows[i]].x;
    const Matrix P = model.bank.capds(x);
    const Matrix Pp = unseen_bank.capds(x);
    mixture[i].resize(U);
    shot[i].resize(U);
    for (Eigen::Index j = 0; j < U; ++j) {
      mixture[i][j] = unseen_capd_from(model, P, unseen[static_cast<std::size_t>(j)]).dot(Eu.col(j));
      shot[i][j] = Pp.col(j).dot(Eu.col(j));
    }
  });

  DeltaResult out;
  const auto normalize = [&](double a, double b) {
    a = std::max(a, 0.0);
    b = std::max(b, 0.0);
    if (!(a + b > 0.0)) {
      out.fallback = true;
      return DeltaPair{0.5, 0.5};
    }
    const double delta = a / (a + b);
    // delta' is derived from delta so that the pair sums to one exactly.
    return DeltaPair{delta, 1.0 - delta};
  };

  if (mode == DeltaMode::global) {
    double a = 0.0;
    double b = 0.0;
    for (std::size_t i = 0; i < seen_rows.size(); ++i) {
      a += mixture[i].maxCoeff();
      b += shot[i].maxCoeff();
    }
    out.mixture_total = a;
    out.shot_total = b;
    const auto pair = normalize(a, b);
    for (const ClassId u : unseen) {
      out.deltas[u] = pair;
    }
  } else {
    for (Eigen::Index j = 0; j < U; ++j) {
      double a = 0.0;
      double b = 0.0;
      for (std::size_t i = 0; i < seen_rows.size(); ++i) {
        a += mixture[i][j];
        b += shot[i][j];
      }
      out.mixture_total += a;
      out.shot_total += b;
      out.deltas[unseen[static_cast<std::size_t>(j)]] = normalize(a, b);
    }
  }
  if (out.fallback) {
    spdlog::warn("fusion weights: response totals are not positive; using delta = delta' = 0.5");
  }
  return out;
}

Prediction predict_fsl(const CapdModel& model, const Vector& x) {
  if (!model.fsl) {
    throw ValidationError("few-shot prediction needs a trained few-shot model");
  }
  const auto& fsl = *model.fsl;
  const Matrix P = model.bank.capds(x);
  const Matrix Pp = fsl.unseen_bank.capds(x);
  Prediction out;
  for (std::size_t j = 0; j < model.unseen_ids.size(); ++j) {
    const ClassId u = model.unseen_ids[j];
    const auto& w = fsl.deltas.at(u);
    const Vector fused =
        w.delta * unseen_capd_from(model, P, u) + w.delta_prime * Pp.col(static_cast<Eigen::Index>(j));
    out.scores[u] = fused.dot(model.embeddings.at(u));
  }
  out.label = argmax_label(out.scores);
  return out;
}

}  // namespace capd
