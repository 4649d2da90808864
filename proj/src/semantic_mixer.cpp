#include "capd/semantic_mixer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "capd/error.hpp"

namespace capd {

namespace {

constexpr double kAutoSelectBandwidth = 1.0;

MixingCoefficients solve_on(const EmbeddingTable& embeddings, std::span<const ClassId> support,
                            const PsdMatrix& m, const Vector& e_u, double lambda_u,
                            ClassId unseen_id, MixingMode mode) {
  if (support.empty()) {
    throw ValidationError("mixing support is empty");
  }
  if (!std::is_sorted(support.begin(), support.end())) {
    throw ValidationError("mixing support must be in ascending class id order");
  }
  if (e_u.size() != embeddings.dimension()) {
    throw ValidationError("unseen embedding dimension does not match the table");
  }
  const Matrix E = embeddings.columns(support);
  MixingCoefficients out;
  out.unseen_id = unseen_id;
  out.mode = mode;
  out.support.assign(support.begin(), support.end());
  out.weights = ridge_solve_metric(E, m, e_u, lambda_u);
  const Vector r = E * out.weights - e_u;
  out.reconstruction_error = std::max(0.0, r.dot(m.matrix() * r));
  return out;
}

}  // namespace

std::string to_string(SupportMode mode) {
  return mode == SupportMode::full ? "full" : "reduced-auto";
}

SupportMode parse_support_mode(const std::string& text) {
  if (text == "full") return SupportMode::full;
  if (text == "reduced-auto") return SupportMode::reduced_auto;
  throw ValidationError(fmt::format("unknown support mode '{}' (expected full|reduced-auto)", text));
}

double reconstruction_error(const EmbeddingTable& embeddings, std::span<const ClassId> support,
                            const PsdMatrix& m, const Vector& e_u, const Vector& weights) {
  const Vector r = embeddings.columns(support) * weights - e_u;
  return std::max(0.0, r.dot(m.matrix() * r));
}

MixingCoefficients solve_alpha(const EmbeddingTable& embeddings, std::span<const ClassId> seen_ids,
                               const PsdMatrix& m, const Vector& e_u, double lambda_u,
                               ClassId unseen_id) {
  return solve_on(embeddings, seen_ids, m, e_u, lambda_u, unseen_id, MixingMode::full);
}

MixingCoefficients solve_beta(const EmbeddingTable& embeddings, std::span<const ClassId> support,
                              const PsdMatrix& m, const Vector& e_u, double lambda_u,
                              ClassId unseen_id) {
  return solve_on(embeddings, support, m, e_u, lambda_u, unseen_id, MixingMode::reduced);
}

SupportSelection auto_select_support(const EmbeddingTable& embeddings,
                                     std::span<const ClassId> seen_ids, const PsdMatrix& m,
                                     const Vector& e_u) {
  const std::size_t S = seen_ids.size();
  if (S < 2) {
    throw ValidationError("automatic support selection needs at least 2 seen classes");
  }
  SupportSelection out;
  out.distances.reserve(S);
  for (const ClassId s : seen_ids) {
    const Vector diff = e_u - embeddings.at(s);
    out.distances.push_back(std::sqrt(std::max(0.0, diff.dot(m.matrix() * diff))));
  }
  const double mean = std::accumulate(out.distances.begin(), out.distances.end(), 0.0) /
                      static_cast<double>(S);

  std::size_t count = S;
  if (mean > 0.0) {
    std::vector<double> normalized(S);
    for (std::size_t i = 0; i < S; ++i) {
      normalized[i] = out.distances[i] / mean;
    }
    std::vector<double> density(S);
    for (std::size_t i = 0; i < S; ++i) {
      density[i] = gaussian_kde(normalized, kAutoSelectBandwidth, normalized[i]);
    }
    const double mean_density =
        std::accumulate(density.begin(), density.end(), 0.0) / static_cast<double>(S);
    // Relative slack so that equal densities are not split by summation rounding.
    const double threshold = mean_density * (1.0 - 1e-12);
    count = static_cast<std::size_t>(
        std::count_if(density.begin(), density.end(), [&](double f) { return f >= threshold; }));
    count = std::clamp<std::size_t>(count, 1, S);
  } else {
    out.degenerate = true;
    spdlog::warn("support selection: every seen embedding coincides with the unseen one; using all");
  }

  std::vector<std::size_t> order(S);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (out.distances[a] != out.distances[b]) {
      return out.distances[a] < out.distances[b];
    }
    return seen_ids[a] < seen_ids[b];
  });
  out.count = count;
  for (std::size_t i = 0; i < count; ++i) {
    out.support.push_back(seen_ids[order[i]]);
  }
  std::sort(out.support.begin(), out.support.end());
  return out;
}

}  // namespace capd
