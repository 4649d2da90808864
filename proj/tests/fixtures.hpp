#pragma once

#include <map>
#include <vector>

#include "capd/model.hpp"
#include "capd/random.hpp"

namespace fixture {

using namespace capd;

inline Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  return m;
}

inline Vector random_vector(Rng& rng, Eigen::Index n) { return random_matrix(rng, n, 1); }

inline ClassifierBank random_bank(Rng& rng, const std::vector<ClassId>& ids, Eigen::Index k, Eigen::Index d) {
  std::map<ClassId, ClassProjector> p;
  for (const ClassId c : ids) p[c] = {c, random_matrix(rng, k, d), {}, 0, 0};
  return ClassifierBank(std::move(p));
}

// Hand-assembled model: S seen ids 1..S, U unseen ids S+1..S+U, random
// projectors, identity metric and random full-support mixers.
inline CapdModel random_model(Rng& rng, int S, int U, Eigen::Index k, Eigen::Index d) {
  CapdModel m;
  std::map<ClassId, Vector> e;
  for (ClassId c = 1; c <= S + U; ++c) {
    e[c] = random_vector(rng, d);
    (c <= S ? m.seen_ids : m.unseen_ids).push_back(c);
  }
  m.embeddings = EmbeddingTable(std::move(e));
  m.bank = random_bank(rng, m.seen_ids, k, d);
  m.metric.M = PsdMatrix::identity(d);
  for (const ClassId u : m.unseen_ids) {
    MixingCoefficients mix;
    mix.unseen_id = u;
    mix.support = m.seen_ids;
    mix.weights = random_vector(rng, S);
    m.mixers[u] = mix;
  }
  return m;
}

}  // namespace fixture
