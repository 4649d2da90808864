#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "capd/data_model.hpp"
#include "capd/numerics.hpp"
#include "capd/seen_classifier.hpp"

namespace capd {

struct IndexPair {
  std::size_t first = 0;
  std::size_t second = 0;

  auto operator<=>(const IndexPair&) const = default;
};

/// CAPDs with labels, and index pairs into them: `similar` pairs share a
/// label, `dissimilar` pairs do not. Pairs are stored with first < second,
/// sorted.
struct PairSets {
  std::vector<Vector> capds;
  std::vector<ClassId> labels;
  std::vector<IndexPair> similar;
  std::vector<IndexPair> dissimilar;
};

inline constexpr std::size_t kDefaultPairBudget = 10'000;

/// Builds pair sets from labeled CAPDs. Each kind is enumerated in full when
/// it fits in `budget`, otherwise drawn uniformly without replacement.
PairSets make_pair_sets(std::vector<Vector> capds, std::vector<ClassId> labels,
                        std::size_t budget, std::uint64_t seed);

/// CAPD of each sample under its own class's projector, then make_pair_sets.
PairSets build_pairs(const ClassifierBank& bank, const FeatureTable& features,
                     std::span<const std::size_t> rows, std::size_t budget, std::uint64_t seed);

struct MetricHyper {
  // Softmin temperature as a multiple of the median dissimilar squared
  // distance under the initial metric.
  double temperature_scale = 0.1;
  double step = 0.1;
  int iterations = 200;
};

struct MetricModel {
  PsdMatrix M = PsdMatrix::identity(1);
  // Hard-min dissimilar squared distance, at the start and after each outer
  // iteration.
  std::vector<double> trace;
  double temperature = 0.0;
  // The similar pairs all coincide, so the budget constraint cannot be
  // normalized; trace(M) = d was used instead.
  bool degenerate_constraint = false;
};

double mahalanobis(const PsdMatrix& m, const Vector& a, const Vector& b);
double mahalanobis(const MetricModel& m, const Vector& a, const Vector& b);

double hard_min_objective(const PsdMatrix& m, const PairSets& pairs);
double similar_pair_sum(const PsdMatrix& m, const PairSets& pairs);

/// Maximizes the smallest dissimilar squared distance subject to the
/// similar-pair sum being at most one. Projected gradient ascent on a softmin
/// surrogate; every iterate is PSD-projected and rescaled onto the budget,
/// and a step is kept only if it raises the hard-min objective (otherwise the
/// step size halves).
MetricModel learn_metric(const PairSets& pairs, const MetricHyper& hyper);

}  // namespace capd
