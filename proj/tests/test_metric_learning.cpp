#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "capd/error.hpp"
#include "capd/metric_learning.hpp"
#include "capd/random.hpp"
#include "oracles.hpp"

using namespace capd;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (const double x : v) out[i++] = x;
  return out;
}

PairSets random_problem(Rng& rng, int d, int classes, int per_class) {
  std::vector<Vector> capds;
  std::vector<ClassId> labels;
  for (int c = 0; c < classes; ++c) {
    Vector center(d);
    for (int i = 0; i < d; ++i) center[i] = 2.0 * rng.normal();
    for (int n = 0; n < per_class; ++n) {
      Vector x = center;
      for (int i = 0; i < d; ++i) x[i] += (i == 0 ? 2.0 : 0.3) * rng.normal();
      capds.push_back(x);
      labels.push_back(c + 1);
    }
  }
  return make_pair_sets(capds, labels, kDefaultPairBudget, rng.next());
}

}  // namespace

TEST(MakePairSets, EnumeratesSmallSets) {
  const auto p = make_pair_sets({vec({0}), vec({1}), vec({2})}, {1, 1, 2}, kDefaultPairBudget, 0);
  ASSERT_EQ(p.similar.size(), 1u);
  EXPECT_EQ(p.similar[0], (IndexPair{0, 1}));
  ASSERT_EQ(p.dissimilar.size(), 2u);
  EXPECT_EQ(p.dissimilar[0], (IndexPair{0, 2}));
  EXPECT_EQ(p.dissimilar[1], (IndexPair{1, 2}));
}

TEST(MakePairSets, BudgetOfOne) {
  Rng rng(1);
  std::vector<Vector> capds;
  std::vector<ClassId> labels;
  for (int i = 0; i < 12; ++i) {
    capds.push_back(vec({rng.normal()}));
    labels.push_back(1 + i % 3);
  }
  const auto p = make_pair_sets(capds, labels, 1, 5);
  EXPECT_EQ(p.similar.size(), 1u);
  EXPECT_EQ(p.dissimilar.size(), 1u);
}

TEST(MakePairSets, SampledPairsAreValidDistinctAndDeterministic) {
  Rng rng(2);
  std::vector<Vector> capds;
  std::vector<ClassId> labels;
  for (int i = 0; i < 60; ++i) {
    capds.push_back(vec({rng.normal()}));
    labels.push_back(1 + i % 4);
  }
  const auto a = make_pair_sets(capds, labels, 50, 9);
  const auto b = make_pair_sets(capds, labels, 50, 9);
  EXPECT_EQ(a.similar, b.similar);
  EXPECT_EQ(a.dissimilar, b.dissimilar);
  EXPECT_EQ(a.similar.size(), 50u);
  EXPECT_EQ(a.dissimilar.size(), 50u);
  EXPECT_EQ(std::set<IndexPair>(a.similar.begin(), a.similar.end()).size(), 50u);
  for (const auto& [i, j] : a.similar) {
    EXPECT_LT(i, j);
    EXPECT_EQ(labels[i], labels[j]);
  }
  for (const auto& [i, j] : a.dissimilar) {
    EXPECT_LT(i, j);
    EXPECT_NE(labels[i], labels[j]);
  }
}

TEST(MakePairSets, SingleClassRejected) {
  EXPECT_THROW(make_pair_sets({vec({0}), vec({1})}, {1, 1}, 10, 0), ValidationError);
}

TEST(Mahalanobis, EuclideanAndDiagonal) {
  EXPECT_NEAR(mahalanobis(PsdMatrix::identity(2), vec({0, 0}), vec({3, 4})), 5.0, 1e-15);
  Matrix m = Matrix::Identity(2, 2);
  m(0, 0) = 4.0;
  EXPECT_NEAR(mahalanobis(PsdMatrix(m), vec({0, 0}), vec({1, 0})), 2.0, 1e-15);
}

TEST(Mahalanobis, QuadraticFormOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a(4, 4);
    for (int i = 0; i < 16; ++i) a.data()[i] = rng.normal();
    const Matrix M = a * a.transpose();
    Vector x(4), y(4);
    for (int i = 0; i < 4; ++i) {
      x[i] = rng.normal();
      y[i] = rng.normal();
    }
    const double ref = std::sqrt(oracle::quadratic_form(oracle::to_rows(M), oracle::to_vec(x), oracle::to_vec(y)));
    EXPECT_NEAR(mahalanobis(PsdMatrix(M), x, y), ref, 1e-12 * (1.0 + ref));
    EXPECT_NEAR(mahalanobis(PsdMatrix::identity(4), x, y), (x - y).norm(), 1e-12);
  }
}

TEST(Mahalanobis, ZeroOnNullSpace) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 1.0;
  EXPECT_EQ(mahalanobis(PsdMatrix(m), vec({0, 0}), vec({0, 5})), 0.0);
  EXPECT_THROW(mahalanobis(PsdMatrix(m), vec({0}), vec({0, 5})), ValidationError);
}

TEST(LearnMetric, ZeroIterationsReturnsScaledIdentity) {
  Rng rng(4);
  const auto pairs = random_problem(rng, 3, 3, 5);
  const auto model = learn_metric(pairs, {0.1, 0.1, 0});
  double total = 0.0;
  for (const auto& [i, j] : pairs.similar) total += (pairs.capds[i] - pairs.capds[j]).squaredNorm();
  const Matrix expected = Matrix::Identity(3, 3) / total;
  EXPECT_LE((model.M.matrix() - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(similar_pair_sum(model.M, pairs), 1.0, 1e-12);
  EXPECT_EQ(model.trace.size(), 1u);
}

TEST(LearnMetric, TwoDimensionalToy) {
  PairSets pairs;
  pairs.capds = {vec({0, 0}), vec({0, 1}), vec({3, 0})};
  pairs.labels = {1, 1, 2};
  pairs.similar = {{0, 1}};
  pairs.dissimilar = {{0, 2}};
  const auto model = learn_metric(pairs, {});
  const Matrix& M = model.M.matrix();
  // The similar pair pins M(1,1) = 1; nothing bounds M(0,0), and the only
  // dissimilar distance is 9 M(0,0), so ascent keeps growing it.
  EXPECT_NEAR(M(1, 1), 1.0, 1e-9);
  EXPECT_GT(M(0, 0), 1.0);
  EXPECT_NEAR(hard_min_objective(model.M, pairs), 9.0 * M(0, 0), 1e-9 * M(0, 0));
  EXPECT_GE(hard_min_objective(model.M, pairs), 9.0);
  EXPECT_GE(min_eigenvalue(M), -1e-8);
  EXPECT_NEAR(similar_pair_sum(model.M, pairs), 1.0, 1e-9);
}

TEST(LearnMetric, InvariantsOnRandomProblems) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto pairs = random_problem(rng, 2 + trial % 4, 3 + trial % 3, 6);
    const auto model = learn_metric(pairs, {});
    const Matrix& M = model.M.matrix();
    EXPECT_LE((M - M.transpose()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_GE(min_eigenvalue(M), -1e-8);
    EXPECT_LE(std::abs(similar_pair_sum(model.M, pairs) - 1.0), 1e-6);
    EXPECT_GE(hard_min_objective(model.M, pairs), model.trace.front());
    EXPECT_EQ(model.trace.back(), hard_min_objective(model.M, pairs));
    for (std::size_t i = 1; i < model.trace.size(); ++i) EXPECT_GE(model.trace[i], model.trace[i - 1]);
  }
}

TEST(LearnMetric, DegenerateSimilarPairsUseTrace) {
  PairSets pairs;
  pairs.capds = {vec({1, 1}), vec({1, 1}), vec({3, 0})};
  pairs.labels = {1, 1, 2};
  pairs.similar = {{0, 1}};
  pairs.dissimilar = {{0, 2}, {1, 2}};
  const auto model = learn_metric(pairs, {0.1, 0.1, 20});
  EXPECT_TRUE(model.degenerate_constraint);
  EXPECT_NEAR(model.M.matrix().trace(), 2.0, 1e-9);
}

TEST(LearnMetric, EmptyPairSetsRejected) {
  PairSets pairs;
  pairs.capds = {vec({1}), vec({2})};
  pairs.labels = {1, 2};
  pairs.dissimilar = {{0, 1}};
  EXPECT_THROW(learn_metric(pairs, {}), ValidationError);
}

TEST(BuildPairs, UsesOwnClassProjector) {
  std::map<ClassId, ClassProjector> projectors;
  projectors[1] = {1, Matrix::Identity(2, 2), {}, 0, 0};
  projectors[2] = {2, 2.0 * Matrix::Identity(2, 2), {}, 0, 0};
  const ClassifierBank bank(projectors);
  const FeatureTable f({{"a", 1, vec({1, 0})}, {"b", 1, vec({0, 1})}, {"c", 2, vec({1, 1})}});
  const std::vector<std::size_t> rows{0, 1, 2};
  const auto pairs = build_pairs(bank, f, rows, 10, 0);
  EXPECT_EQ(pairs.capds[2], vec({2, 2}));
  EXPECT_EQ(pairs.capds[0], vec({1, 0}));
}
