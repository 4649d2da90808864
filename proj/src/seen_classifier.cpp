#include "capd/seen_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "capd/error.hpp"
#include "capd/parallel.hpp"
#include "capd/random.hpp"

namespace capd {

namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double ez = std::exp(z);
  return ez / (1.0 + ez);
}

// For the projector of class s, the ranking direction a - e_s for each label c:
// a = e_c for negatives and the mean of the other embeddings for positives.
// L for a sample of class c is then <W^T x, direction(c)>.
std::map<ClassId, Vector> ranking_directions(ClassId s, const EmbeddingTable& embeddings,
                                             std::span<const ClassId> class_ids) {
  if (class_ids.size() < 2) {
    throw ValidationError(
        fmt::format("class {}: training needs at least 2 classes (the negative branch is empty)", s));
  }
  if (std::find(class_ids.begin(), class_ids.end(), s) == class_ids.end()) {
    throw ValidationError(fmt::format("class {} is not in the training label set", s));
  }
  const Vector& e_s = embeddings.at(s);
  Vector others = Vector::Zero(e_s.size());
  for (const ClassId t : class_ids) {
    if (t != s) {
      others += embeddings.at(t);
    }
  }
  others /= static_cast<double>(class_ids.size() - 1);

  std::map<ClassId, Vector> directions;
  for (const ClassId c : class_ids) {
    directions.emplace(c, (c == s ? others : embeddings.at(c)) - e_s);
  }
  return directions;
}

const Vector& direction_for(const std::map<ClassId, Vector>& directions, ClassId c) {
  const auto it = directions.find(c);
  if (it == directions.end()) {
    throw ValidationError(fmt::format("sample class {} is not in the training label set", c));
  }
  return it->second;
}

double objective_with(const Matrix& W, double lambda_s, const FeatureTable& features,
                      std::span<const std::size_t> rows,
                      const std::map<ClassId, Vector>& directions) {
  double sum = 0.0;
  for (const std::size_t row : rows) {
    const auto& inst = features[row];
    const Vector p = W.transpose() * inst.x;
    sum += softplus(p.dot(direction_for(directions, inst.class_id)));
  }
  const double mean = rows.empty() ? 0.0 : sum / static_cast<double>(rows.size());
  return mean + 0.5 * lambda_s * W.squaredNorm();
}

}  // namespace

ClassifierBank::ClassifierBank(std::map<ClassId, ClassProjector> projectors)
    : projectors_(std::move(projectors)) {
  if (projectors_.empty()) {
    throw ValidationError("classifier bank is empty");
  }
  k_ = projectors_.begin()->second.W.rows();
  d_ = projectors_.begin()->second.W.cols();
  for (const auto& [id, proj] : projectors_) {
    if (proj.class_id != id) {
      throw ValidationError(fmt::format("projector keyed {} carries class id {}", id, proj.class_id));
    }
    if (proj.W.rows() != k_ || proj.W.cols() != d_) {
      throw ValidationError(fmt::format("projector {} is {}x{}, bank expects {}x{}", id,
                                        proj.W.rows(), proj.W.cols(), k_, d_));
    }
    if (!proj.W.allFinite()) {
      throw ValidationError(fmt::format("projector {} has non-finite weights", id));
    }
  }
}

const ClassProjector& ClassifierBank::at(ClassId c) const {
  const auto it = projectors_.find(c);
  if (it == projectors_.end()) {
    throw ValidationError(fmt::format("no projector for class {}", c));
  }
  return it->second;
}

std::vector<ClassId> ClassifierBank::ids() const {
  std::vector<ClassId> ids;
  ids.reserve(projectors_.size());
  for (const auto& [id, _] : projectors_) {
    ids.push_back(id);
  }
  return ids;
}

Matrix ClassifierBank::capds(const Vector& x) const {
  if (x.size() != k_) {
    throw ValidationError(fmt::format("feature has dimension {}, bank expects {}", x.size(), k_));
  }
  Matrix P(d_, static_cast<Eigen::Index>(projectors_.size()));
  Eigen::Index j = 0;
  for (const auto& [_, proj] : projectors_) {
    P.col(j++).noalias() = proj.W.transpose() * x;
  }
  return P;
}

Vector compute_capd(const ClassProjector& w, const Vector& x) {
  if (x.size() != w.W.rows()) {
    throw ValidationError(fmt::format("feature has dimension {}, projector {} expects {}", x.size(),
                                      w.class_id, w.W.rows()));
  }
  return w.W.transpose() * x;
}

LossGradient loss_and_gradient(const ClassProjector& w, const Vector& x, ClassId c,
                               const EmbeddingTable& embeddings, std::span<const ClassId> class_ids) {
  const auto directions = ranking_directions(w.class_id, embeddings, class_ids);
  const Vector& v = direction_for(directions, c);
  if (v.size() != w.W.cols()) {
    throw ValidationError("embedding dimension does not match the projector");
  }
  const Vector p = compute_capd(w, x);
  const double L = p.dot(v);
  return {softplus(L), sigmoid(L) * x * v.transpose()};
}

double classifier_objective(const ClassProjector& w, const FeatureTable& features,
                            std::span<const std::size_t> rows, const EmbeddingTable& embeddings,
                            std::span<const ClassId> class_ids) {
  const auto directions = ranking_directions(w.class_id, embeddings, class_ids);
  return objective_with(w.W, w.hyper.lambda_s, features, rows, directions);
}

ClassProjector train_classifier(ClassId class_id, const FeatureTable& features,
                                std::span<const std::size_t> rows, const EmbeddingTable& embeddings,
                                std::span<const ClassId> class_ids, const SgdHyper& hyper,
                                std::uint64_t seed) {
  const auto directions = ranking_directions(class_id, embeddings, class_ids);
  std::set<ClassId> covered;
  for (const std::size_t row : rows) {
    const ClassId c = features[row].class_id;
    direction_for(directions, c);
    covered.insert(c);
  }
  if (covered.size() < 2) {
    throw ValidationError(fmt::format(
        "class {}: training samples cover {} class(es); at least 2 are required", class_id,
        covered.size()));
  }
  if (hyper.epochs < 0 || !(hyper.learning_rate >= 0.0) || !(hyper.lambda_s >= 0.0)) {
    throw ValidationError("SGD hyperparameters must be nonnegative");
  }

  const auto k = features.dimension();
  const auto d = embeddings.dimension();
  ClassProjector out;
  out.class_id = class_id;
  out.hyper = hyper;
  out.W.resize(k, d);

  auto init_rng = Rng::for_stream(seed, class_id, stream::kInit);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(k));
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < k; ++i) {
      out.W(i, j) = stddev * init_rng.normal();
    }
  }
  out.initial_objective = objective_with(out.W, hyper.lambda_s, features, rows, directions);

  if (hyper.learning_rate > 0.0) {
    auto order_rng = Rng::for_stream(seed, class_id, stream::kShuffle);
    std::vector<std::size_t> order(rows.begin(), rows.end());
    const double decay = 1.0 - hyper.learning_rate * hyper.lambda_s;
    Vector p(d);
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
      order_rng.shuffle(std::span(order));
      for (const std::size_t row : order) {
        const auto& inst = features[row];
        const Vector& v = directions.at(inst.class_id);
        p.noalias() = out.W.transpose() * inst.x;
        const double scale = hyper.learning_rate * sigmoid(p.dot(v));
        // W <- W - lr * (sigma(L) x v^T + lambda_s W)
        out.W *= decay;
        out.W.noalias() -= (scale * inst.x) * v.transpose();
      }
    }
    if (!out.W.allFinite()) {
      throw SolverError(fmt::format("class {}: SGD diverged (non-finite weights)", class_id));
    }
  }
  out.final_objective = objective_with(out.W, hyper.lambda_s, features, rows, directions);
  return out;
}

ClassifierBank train_all(const FeatureTable& features, std::span<const std::size_t> rows,
                         const EmbeddingTable& embeddings, std::span<const ClassId> class_ids,
                         const SgdHyper& hyper, std::uint64_t seed, unsigned threads) {
  std::vector<ClassProjector> trained(class_ids.size());
  parallel_for(class_ids.size(), threads, [&](std::size_t i) {
    const ClassId c = class_ids[i];
    try {
      trained[i] = train_classifier(c, features, rows, embeddings, class_ids, hyper, seed);
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("training class {} failed: {}", c, e.what()));
    } catch (const SolverError& e) {
      throw SolverError(fmt::format("training class {} failed: {}", c, e.what()));
    }
  });
  std::map<ClassId, ClassProjector> projectors;
  for (auto& proj : trained) {
    const ClassId id = proj.class_id;
    projectors.emplace(id, std::move(proj));
  }
  return ClassifierBank(std::move(projectors));
}

}  // namespace capd
