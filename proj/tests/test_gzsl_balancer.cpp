#include <gtest/gtest.h>

#include "capd/error.hpp"
#include "capd/gzsl_balancer.hpp"
#include "capd/semantic_mixer.hpp"
#include "capd/zsl_engine.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace capd;

namespace {

struct Problem {
  EmbeddingTable emb;
  std::vector<ClassId> seen, unseen;
  std::map<ClassId, MixingCoefficients> mixers;
};

Problem random_problem(Rng& rng, int S, int U, int d, double lambda_u = 0.1) {
  Problem p;
  std::map<ClassId, Vector> e;
  for (ClassId c = 1; c <= S + U; ++c) {
    e[c] = fixture::random_vector(rng, d);
    (c <= S ? p.seen : p.unseen).push_back(c);
  }
  p.emb = EmbeddingTable(std::move(e));
  for (const ClassId u : p.unseen) p.mixers[u] = solve_alpha(p.emb, p.seen, PsdMatrix::identity(d), p.emb.at(u), lambda_u, u);
  return p;
}

// Objective evaluated from its definition with explicit loops.
double objective_oracle(const Matrix& G, const Problem& p, double lambda) {
  const auto S = p.seen.size(), d = static_cast<std::size_t>(p.emb.dimension());
  std::vector<double> c(d, 0.0), r(d, 0.0);
  for (const ClassId u : p.unseen) {
    const auto& w = p.mixers.at(u).weights;
    for (std::size_t i = 0; i < d; ++i) {
      double v = -p.emb.at(u)[i];
      for (std::size_t s = 0; s < S; ++s) v += w[s] * p.emb.at(p.seen[s])[i];
      c[i] += v * v / static_cast<double>(p.unseen.size());
    }
  }
  double reg = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t i = 0; i < d; ++i) {
      double v = -p.emb.at(p.seen[s])[i];
      for (std::size_t t = 0; t < S; ++t) v += G(t, s) * p.emb.at(p.seen[t])[i];
      r[i] += v * v / static_cast<double>(S);
    }
    for (std::size_t t = 0; t < S; ++t) reg += G(t, s) * G(t, s);
  }
  double value = 0.0;
  for (std::size_t i = 0; i < d; ++i) value += (r[i] - c[i]) * (r[i] - c[i]);
  return value + 0.5 * lambda * reg;
}

}  // namespace

TEST(GzslObjective, ExactReconstructionLeavesRegularizer) {
  // S > d so every unseen embedding is reconstructed exactly at lambda_u -> 0.
  Rng rng(1);
  auto p = random_problem(rng, 6, 2, 3, 1e-10);
  const double lambda = 0.3;
  const auto obj = gzsl_objective_and_grads(Matrix::Identity(6, 6), p.emb, p.seen, p.unseen, p.mixers, lambda);
  EXPECT_NEAR(obj.value, 0.5 * lambda * 6.0, 1e-12);
}

TEST(GzslObjective, ZeroGammaIdentityEmbeddings) {
  std::map<ClassId, Vector> e;
  for (int i = 0; i < 3; ++i) e[i + 1] = Vector::Unit(3, i);
  e[4] = (Vector(3) << 0.5, 0.2, 0.9).finished();
  Problem p{EmbeddingTable(e), {1, 2, 3}, {4}, {}};
  MixingCoefficients mix;
  mix.unseen_id = 4;
  mix.support = p.seen;
  mix.weights = (Vector(3) << 0.4, 0.0, 1.0).finished();
  p.mixers[4] = mix;
  const auto obj = gzsl_objective_and_grads(Matrix::Zero(3, 3), p.emb, p.seen, p.unseen, p.mixers, 0.0);
  // (1/S) sum e_s^2 = (1/3, 1/3, 1/3); c = (E alpha - e_u)^2 = (0.01, 0.04, 0.01)
  const Vector diff = (Vector(3) << 1.0 / 3 - 0.01, 1.0 / 3 - 0.04, 1.0 / 3 - 0.01).finished();
  EXPECT_NEAR(obj.value, diff.squaredNorm(), 1e-14);
}

TEST(GzslObjective, MatchesLoopOracleAndFiniteDifferences) {
  Rng rng(2);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_problem(rng, 4, 2, 3);
    const Matrix G = Matrix::Identity(4, 4) + fixture::random_matrix(rng, 4, 4, 0.3);
    const double lambda = 0.05;
    const auto obj = gzsl_objective_and_grads(G, p.emb, p.seen, p.unseen, p.mixers, lambda);
    EXPECT_NEAR(obj.value, objective_oracle(G, p, lambda), 1e-12 * (1 + obj.value));
    const auto fd = oracle::finite_difference([&](const Matrix& g) { return objective_oracle(g, p, lambda); }, G);
    worst = std::max(worst, oracle::max_relative_error(obj.grads, fd));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(GzslObjective, MissingMixer) {
  Rng rng(3);
  auto p = random_problem(rng, 4, 2, 3);
  p.mixers.erase(p.unseen.back());
  EXPECT_THROW(gzsl_objective_and_grads(Matrix::Identity(4, 4), p.emb, p.seen, p.unseen, p.mixers, 0.1),
               ValidationError);
}

TEST(TrainGamma, ZeroIterationsKeepsIdentity) {
  Rng rng(4);
  const auto p = random_problem(rng, 5, 2, 3);
  const auto g = train_gamma(p.emb, p.seen, p.unseen, p.mixers, {0.01, 0, 1e-3});
  EXPECT_EQ(g.gammas, Matrix::Identity(5, 5));
}

TEST(TrainGamma, ObjectiveNonIncreasing) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_problem(rng, 6, 3, 4);
    const auto g = train_gamma(p.emb, p.seen, p.unseen, p.mixers, {0.01, 200, 1e-3});
    EXPECT_LE(g.final_objective, g.initial_objective);
    for (std::size_t i = 1; i < g.trace.size(); ++i) EXPECT_LE(g.trace[i], g.trace[i - 1]);
    const auto again = train_gamma(p.emb, p.seen, p.unseen, p.mixers, {0.01, 200, 1e-3});
    EXPECT_EQ(g.gammas, again.gammas);
  }
}

TEST(PredictGzsl, IdentityGammaReducesToSeenArgmax) {
  Rng rng(6);
  auto m = fixture::random_model(rng, 4, 2, 5, 3);
  m.gzsl = GammaModel{m.seen_ids, Matrix::Identity(4, 4), 0, 0, 0, {}};
  // Make seen class 2 dominate: its projector scaled up heavily.
  auto projectors = m.bank.projectors();
  const Vector x = fixture::random_vector(rng, 5);
  const Vector e2 = m.embeddings.at(2);
  projectors.at(2).W = 1e6 * x * e2.transpose();
  m.bank = ClassifierBank(projectors);
  for (auto& [u, mix] : m.mixers) mix.weights.setZero();
  const auto pred = predict_gzsl(m, x);
  EXPECT_EQ(pred.label, 2);
  EXPECT_EQ(pred.scores.size(), 6u);
  for (const ClassId s : m.seen_ids) EXPECT_EQ(pred.scores.at(s), compute_capd(m.bank.at(s), x).dot(m.embeddings.at(s)));
}

TEST(PredictGzsl, UnseenWinsWhenLargest) {
  Rng rng(7);
  auto m = fixture::random_model(rng, 3, 2, 4, 3);
  m.gzsl = GammaModel{m.seen_ids, Matrix::Zero(3, 3), 0, 0, 0, {}};
  const Vector x = fixture::random_vector(rng, 4);
  const auto zsl = predict_zsl(m, x);
  const auto pred = predict_gzsl(m, x);
  ClassId best = zsl.label;
  if (zsl.scores.at(best) > 0.0) {
    EXPECT_EQ(pred.label, best);
  }
  for (const ClassId u : m.unseen_ids) EXPECT_EQ(pred.scores.at(u), zsl.scores.at(u));
}

TEST(PredictGzsl, NeedsGamma) {
  Rng rng(8);
  const auto m = fixture::random_model(rng, 3, 2, 4, 3);
  EXPECT_THROW(predict_gzsl(m, Vector::Ones(4)), ValidationError);
}
