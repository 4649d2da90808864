#include "capd/zsl_engine.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "capd/error.hpp"

namespace capd {

std::string to_string(DeltaMode mode) { return mode == DeltaMode::global ? "global" : "per_class"; }

DeltaMode parse_delta_mode(const std::string& text) {
  if (text == "global") return DeltaMode::global;
  if (text == "per_class") return DeltaMode::per_class;
  throw ValidationError(fmt::format("unknown delta mode '{}' (expected global|per_class)", text));
}

void CapdModel::validate() const {
  if (bank.ids() != seen_ids) {
    throw ValidationError("model: seen classifier bank does not match the seen ids");
  }
  if (!std::is_sorted(seen_ids.begin(), seen_ids.end()) ||
      !std::is_sorted(unseen_ids.begin(), unseen_ids.end())) {
    throw ValidationError("model: class ids must be ascending");
  }
  const auto d = embeddings.dimension();
  if (bank.semantic_dim() != d || metric.M.dimension() != d) {
    throw ValidationError("model: semantic dimensions disagree");
  }
  const std::set<ClassId> seen(seen_ids.begin(), seen_ids.end());
  for (const ClassId c : seen_ids) {
    embeddings.at(c);
  }
  for (const ClassId u : unseen_ids) {
    embeddings.at(u);
    if (seen.contains(u)) {
      throw ValidationError(fmt::format("model: class {} is both seen and unseen", u));
    }
    const auto it = mixers.find(u);
    if (it == mixers.end()) {
      throw ValidationError(fmt::format("model: no mixing coefficients for unseen class {}", u));
    }
    const auto& mix = it->second;
    if (mix.unseen_id != u || mix.support.size() != static_cast<std::size_t>(mix.weights.size())) {
      throw ValidationError(fmt::format("model: malformed mixer for unseen class {}", u));
    }
    for (const ClassId s : mix.support) {
      if (!seen.contains(s)) {
        throw ValidationError(fmt::format("model: mixer for {} uses non-seen class {}", u, s));
      }
    }
  }
  if (gzsl) {
    const auto S = static_cast<Eigen::Index>(seen_ids.size());
    if (gzsl->seen_ids != seen_ids || gzsl->gammas.rows() != S || gzsl->gammas.cols() != S) {
      throw ValidationError("model: gamma coefficients do not match the seen classes");
    }
  }
  if (fsl) {
    if (fsl->unseen_bank.ids() != unseen_ids ||
        fsl->unseen_bank.feature_dim() != bank.feature_dim() ||
        fsl->unseen_bank.semantic_dim() != d) {
      throw ValidationError("model: unseen classifier bank does not match the unseen classes");
    }
    for (const ClassId u : unseen_ids) {
      if (!fsl->deltas.contains(u)) {
        throw ValidationError(fmt::format("model: no fusion weights for unseen class {}", u));
      }
    }
  }
}

ClassId argmax_label(const std::map<ClassId, double>& scores) {
  if (scores.empty()) {
    throw ValidationError("cannot take the argmax of an empty score map");
  }
  auto best = scores.begin();
  for (auto it = std::next(scores.begin()); it != scores.end(); ++it) {
    if (it->second > best->second) {
      best = it;
    }
  }
  return best->first;
}

Vector unseen_capd_from(const CapdModel& model, const Matrix& seen_capds, ClassId unseen_id) {
  const auto it = model.mixers.find(unseen_id);
  if (it == model.mixers.end()) {
    throw ValidationError(fmt::format("no mixing coefficients for unseen class {}", unseen_id));
  }
  const auto& mix = it->second;
  Vector p = Vector::Zero(seen_capds.rows());
  for (std::size_t i = 0; i < mix.support.size(); ++i) {
    const auto pos = std::lower_bound(model.seen_ids.begin(), model.seen_ids.end(), mix.support[i]);
    p += mix.weights[static_cast<Eigen::Index>(i)] *
         seen_capds.col(static_cast<Eigen::Index>(pos - model.seen_ids.begin()));
  }
  return p;
}

Vector unseen_capd(const CapdModel& model, const Vector& x, ClassId unseen_id) {
  if (!model.mixers.contains(unseen_id)) {
    throw ValidationError(fmt::format("no mixing coefficients for unseen class {}", unseen_id));
  }
  return unseen_capd_from(model, model.bank.capds(x), unseen_id);
}

Prediction predict_zsl(const CapdModel& model, const Vector& x) {
  if (model.unseen_ids.empty()) {
    throw ValidationError("model has no unseen classes");
  }
  const Matrix P = model.bank.capds(x);
  Prediction out;
  for (const ClassId u : model.unseen_ids) {
    out.scores[u] = unseen_capd_from(model, P, u).dot(model.embeddings.at(u));
  }
  out.label = argmax_label(out.scores);
  return out;
}

}  // namespace capd
