#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "capd/data_model.hpp"
#include "capd/linalg.hpp"

namespace capd {

struct SgdHyper {
  double lambda_s = 1e-3;
  double learning_rate = 0.005;
  int epochs = 100;
};

/// One class's k x d projection; its CAPD for a feature x is W^T x.
struct ClassProjector {
  ClassId class_id = 0;
  Matrix W;
  SgdHyper hyper;
  double initial_objective = 0.0;
  double final_objective = 0.0;
};

class ClassifierBank {
 public:
  ClassifierBank() = default;
  explicit ClassifierBank(std::map<ClassId, ClassProjector> projectors);

  std::size_t size() const { return projectors_.size(); }
  Eigen::Index feature_dim() const { return k_; }
  Eigen::Index semantic_dim() const { return d_; }
  const std::map<ClassId, ClassProjector>& projectors() const { return projectors_; }
  const ClassProjector& at(ClassId c) const;
  std::vector<ClassId> ids() const;

  // d x size() matrix of CAPDs, columns in ascending class id order.
  Matrix capds(const Vector& x) const;

 private:
  std::map<ClassId, ClassProjector> projectors_;
  Eigen::Index k_ = 0;
  Eigen::Index d_ = 0;
};

Vector compute_capd(const ClassProjector& w, const Vector& x);

struct LossGradient {
  double loss = 0.0;
  Matrix grad;
};

/// Per-sample term of the class-s objective: log(1 + exp(L)) with
///   L = <p, e_c> - <p, e_s>           for a negative sample (c != s),
///   L = <p, mean_{t != s} e_t> - <p, e_s>  for a positive sample (c == s),
/// where p = W^T x. The gradient excludes the weight-decay term.
/// `class_ids` is the label set the sample is drawn from.
LossGradient loss_and_gradient(const ClassProjector& w, const Vector& x, ClassId c,
                               const EmbeddingTable& embeddings, std::span<const ClassId> class_ids);

/// Full class-s objective over `rows`: mean per-sample loss plus
/// (lambda_s / 2) ||W||_F^2.
double classifier_objective(const ClassProjector& w, const FeatureTable& features,
                            std::span<const std::size_t> rows, const EmbeddingTable& embeddings,
                            std::span<const ClassId> class_ids);

/// SGD on the class objective. W starts from N(0, 1/k) drawn from the
/// (seed, class_id) stream; each epoch visits `rows` in a fresh shuffle with
/// single-sample updates and weight decay lambda_s * W at every step.
ClassProjector train_classifier(ClassId class_id, const FeatureTable& features,
                                std::span<const std::size_t> rows, const EmbeddingTable& embeddings,
                                std::span<const ClassId> class_ids, const SgdHyper& hyper,
                                std::uint64_t seed);

/// One projector per class in `class_ids`, trained on `rows`. Classes may be
/// trained concurrently (`threads` > 1) without changing the result.
ClassifierBank train_all(const FeatureTable& features, std::span<const std::size_t> rows,
                         const EmbeddingTable& embeddings, std::span<const ClassId> class_ids,
                         const SgdHyper& hyper, std::uint64_t seed, unsigned threads = 1);

}  // namespace capd
