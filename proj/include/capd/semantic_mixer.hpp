#pragma once

#include <span>
#include <string>
#include <vector>

#include "capd/data_model.hpp"
#include "capd/numerics.hpp"

namespace capd {

enum class MixingMode { full, reduced };
enum class SupportMode { full, reduced_auto };

std::string to_string(SupportMode mode);
SupportMode parse_support_mode(const std::string& text);

/// Weights reconstructing one unseen embedding from seen embeddings; the same
/// weights mix the seen CAPDs into that class's CAPD.
struct MixingCoefficients {
  ClassId unseen_id = 0;
  MixingMode mode = MixingMode::full;
  std::vector<ClassId> support;  // ascending
  Vector weights;                // aligned with support
  double reconstruction_error = 0.0;
};

// (E w - e)^T M (E w - e) for the support columns of E.
double reconstruction_error(const EmbeddingTable& embeddings, std::span<const ClassId> support,
                            const PsdMatrix& m, const Vector& e_u, const Vector& weights);

/// Ridge reconstruction of e_u over all seen classes under metric M.
MixingCoefficients solve_alpha(const EmbeddingTable& embeddings, std::span<const ClassId> seen_ids,
                               const PsdMatrix& m, const Vector& e_u, double lambda_u,
                               ClassId unseen_id = 0);

/// Ridge reconstruction restricted to `support`. With the full seen set as
/// support this is bitwise identical to solve_alpha.
MixingCoefficients solve_beta(const EmbeddingTable& embeddings, std::span<const ClassId> support,
                              const PsdMatrix& m, const Vector& e_u, double lambda_u,
                              ClassId unseen_id = 0);

struct SupportSelection {
  std::size_t count = 0;
  std::vector<ClassId> support;  // ascending class id
  std::vector<double> distances; // aligned with the seen ids passed in
  bool degenerate = false;
};

/// Picks how many and which seen classes describe e_u. Distances to every
/// seen embedding are mean-normalized and a unit-bandwidth Gaussian KDE is
/// fitted to them; N counts the classes whose own density is at least the
/// mean density (clamped to [1, S]) and the support is the N nearest classes,
/// ties going to the smaller id.
SupportSelection auto_select_support(const EmbeddingTable& embeddings,
                                     std::span<const ClassId> seen_ids, const PsdMatrix& m,
                                     const Vector& e_u);

}  // namespace capd
