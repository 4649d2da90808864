#include "capd/metric_learning.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "capd/error.hpp"
#include "capd/random.hpp"

namespace capd {

namespace {

// Floyd's algorithm: `count` distinct values from [0, total).
std::set<std::uint64_t> sample_distinct(std::uint64_t total, std::uint64_t count, Rng& rng) {
  std::set<std::uint64_t> picked;
  for (std::uint64_t j = total - count; j < total; ++j) {
    const auto t = rng.index(j + 1);
    if (!picked.insert(t).second) {
      picked.insert(j);
    }
  }
  return picked;
}

// Inverse of the row-major enumeration of pairs i < j over n items.
IndexPair decode_pair(std::uint64_t r, std::uint64_t n) {
  std::uint64_t i = 0;
  while (r >= n - 1 - i) {
    r -= n - 1 - i;
    ++i;
  }
  return {static_cast<std::size_t>(i), static_cast<std::size_t>(i + 1 + r)};
}

Matrix difference_columns(const PairSets& pairs, const std::vector<IndexPair>& list) {
  const auto d = pairs.capds.front().size();
  Matrix D(d, static_cast<Eigen::Index>(list.size()));
  for (std::size_t j = 0; j < list.size(); ++j) {
    D.col(static_cast<Eigen::Index>(j)) = pairs.capds[list[j].first] - pairs.capds[list[j].second];
  }
  return D;
}

std::vector<double> squared_distances(const Matrix& M, const Matrix& D) {
  const Eigen::RowVectorXd q = (D.array() * (M * D).array()).colwise().sum();
  return {q.data(), q.data() + q.size()};
}

void validate_pairs(const PairSets& pairs) {
  if (pairs.capds.size() != pairs.labels.size()) {
    throw ValidationError("pair sets: capds and labels differ in length");
  }
  if (pairs.capds.empty()) {
    throw ValidationError("pair sets hold no CAPDs");
  }
  const auto d = pairs.capds.front().size();
  for (const auto& p : pairs.capds) {
    if (p.size() != d) {
      throw ValidationError("pair sets: CAPDs differ in dimension");
    }
  }
  const auto check = [&](const std::vector<IndexPair>& list, bool same) {
    for (const auto& [a, b] : list) {
      if (a >= pairs.capds.size() || b >= pairs.capds.size()) {
        throw ValidationError("pair index out of range");
      }
      if ((pairs.labels[a] == pairs.labels[b]) != same) {
        throw ValidationError(same ? "similar pair with different labels"
                                   : "dissimilar pair with equal labels");
      }
    }
  };
  check(pairs.similar, true);
  check(pairs.dissimilar, false);
}

}  // namespace

PairSets make_pair_sets(std::vector<Vector> capds, std::vector<ClassId> labels,
                        std::size_t budget, std::uint64_t seed) {
  if (capds.size() != labels.size()) {
    throw ValidationError("capds and labels differ in length");
  }
  PairSets out;
  out.capds = std::move(capds);
  out.labels = std::move(labels);
  const std::uint64_t n = out.capds.size();

  std::map<ClassId, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) {
    members[out.labels[i]].push_back(i);
  }
  if (members.size() < 2) {
    throw ValidationError("pair construction needs at least 2 classes; no dissimilar pair exists");
  }

  std::uint64_t total_similar = 0;
  for (const auto& [_, idx] : members) {
    total_similar += idx.size() * (idx.size() - 1) / 2;
  }
  const std::uint64_t total_pairs = n * (n - 1) / 2;
  const std::uint64_t total_dissimilar = total_pairs - total_similar;

  auto rng = Rng::for_stream(seed, 0, stream::kPairs);

  if (total_similar <= budget) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (out.labels[i] == out.labels[j]) {
          out.similar.push_back({i, j});
        }
      }
    }
  } else {
    for (auto r : sample_distinct(total_similar, budget, rng)) {
      for (const auto& [_, idx] : members) {
        const std::uint64_t m = idx.size();
        const std::uint64_t count = m * (m - 1) / 2;
        if (r < count) {
          const auto local = decode_pair(r, m);
          out.similar.push_back({idx[local.first], idx[local.second]});
          break;
        }
        r -= count;
      }
    }
  }

  if (total_dissimilar <= budget) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (out.labels[i] != out.labels[j]) {
          out.dissimilar.push_back({i, j});
        }
      }
    }
  } else {
    std::set<IndexPair> picked;
    while (picked.size() < budget) {
      const auto r = rng.index(total_pairs);
      const auto pair = decode_pair(r, n);
      if (out.labels[pair.first] != out.labels[pair.second]) {
        picked.insert(pair);
      }
    }
    out.dissimilar.assign(picked.begin(), picked.end());
  }

  std::sort(out.similar.begin(), out.similar.end());
  std::sort(out.dissimilar.begin(), out.dissimilar.end());
  return out;
}

PairSets build_pairs(const ClassifierBank& bank, const FeatureTable& features,
                     std::span<const std::size_t> rows, std::size_t budget, std::uint64_t seed) {
  std::vector<Vector> capds;
  std::vector<ClassId> labels;
  capds.reserve(rows.size());
  labels.reserve(rows.size());
  for (const std::size_t row : rows) {
    const auto& inst = features[row];
    capds.push_back(compute_capd(bank.at(inst.class_id), inst.x));
    labels.push_back(inst.class_id);
  }
  return make_pair_sets(std::move(capds), std::move(labels), budget, seed);
}

double mahalanobis(const PsdMatrix& m, const Vector& a, const Vector& b) {
  if (a.size() != m.dimension() || b.size() != m.dimension()) {
    throw ValidationError(fmt::format("mahalanobis: vectors of size {} and {} with a {}x{} metric",
                                      a.size(), b.size(), m.dimension(), m.dimension()));
  }
  const Vector diff = a - b;
  return std::sqrt(std::max(0.0, diff.dot(m.matrix() * diff)));
}

double mahalanobis(const MetricModel& m, const Vector& a, const Vector& b) {
  return mahalanobis(m.M, a, b);
}

double hard_min_objective(const PsdMatrix& m, const PairSets& pairs) {
  if (pairs.dissimilar.empty()) {
    throw ValidationError("no dissimilar pairs");
  }
  const auto q = squared_distances(m.matrix(), difference_columns(pairs, pairs.dissimilar));
  return *std::min_element(q.begin(), q.end());
}

double similar_pair_sum(const PsdMatrix& m, const PairSets& pairs) {
  if (pairs.similar.empty()) {
    return 0.0;
  }
  const auto q = squared_distances(m.matrix(), difference_columns(pairs, pairs.similar));
  double sum = 0.0;
  for (const double v : q) {
    sum += v;
  }
  return sum;
}

MetricModel learn_metric(const PairSets& pairs, const MetricHyper& hyper) {
  validate_pairs(pairs);
  if (pairs.similar.empty() || pairs.dissimilar.empty()) {
    throw ValidationError("metric learning needs nonempty similar and dissimilar pair sets");
  }
  if (hyper.iterations < 0 || !(hyper.step > 0.0) || !(hyper.temperature_scale > 0.0)) {
    throw ValidationError("metric hyperparameters must be positive");
  }
  const auto d = pairs.capds.front().size();
  const Matrix Ds = difference_columns(pairs, pairs.similar);
  const Matrix Dd = difference_columns(pairs, pairs.dissimilar);
  const Matrix scatter = Ds * Ds.transpose();
  const double similar_total = scatter.trace();

  MetricModel model;
  model.degenerate_constraint = !(similar_total > 0.0);

  // Places M on the feasible boundary: similar sum = 1, or trace = d when the
  // similar pairs carry no spread.
  const auto normalize = [&](Matrix M) -> std::optional<Matrix> {
    const double s = model.degenerate_constraint ? M.trace() / static_cast<double>(d)
                                                 : M.cwiseProduct(scatter).sum();
    if (!(s > 0.0) || !std::isfinite(s)) {
      return std::nullopt;
    }
    return Matrix(M / s);
  };

  Matrix M = *normalize(Matrix::Identity(d, d));
  if (model.degenerate_constraint) {
    spdlog::warn("metric learning: similar pairs coincide; normalizing trace(M) = d instead");
  }

  const auto hard_min = [&](const Matrix& m) {
    const auto q = squared_distances(m, Dd);
    return *std::min_element(q.begin(), q.end());
  };

  auto q0 = squared_distances(M, Dd);
  std::nth_element(q0.begin(), q0.begin() + static_cast<std::ptrdiff_t>(q0.size() / 2), q0.end());
  model.temperature = hyper.temperature_scale * q0[q0.size() / 2];

  double current = hard_min(M);
  model.trace.push_back(current);
  if (!(model.temperature > 0.0)) {
    spdlog::warn("metric learning: dissimilar pairs have zero median distance; keeping the start");
    model.M = PsdMatrix(M);
    return model;
  }

  double step = hyper.step;
  for (int it = 0; it < hyper.iterations; ++it) {
    const auto q = squared_distances(M, Dd);
    const Vector w = softmin_weights(q, model.temperature);
    const Matrix G = Dd * w.asDiagonal() * Dd.transpose();
    const double g_norm = G.norm();
    if (g_norm > 0.0) {
      const Matrix raw = M + (step * M.norm() / g_norm) * G;
      const auto candidate = normalize(psd_project(0.5 * (raw + raw.transpose())).matrix());
      if (candidate) {
        const double value = hard_min(*candidate);
        if (value > current) {
          M = *candidate;
          current = value;
        } else {
          step *= 0.5;
        }
      } else {
        step *= 0.5;
      }
    }
    model.trace.push_back(current);
  }
  model.M = PsdMatrix(0.5 * (M + M.transpose()));
  return model;
}

}  // namespace capd
