#pragma once

#include <map>

#include "capd/model.hpp"

namespace capd {

struct Prediction {
  ClassId label = 0;
  std::map<ClassId, double> scores;
};

// Highest score wins; exact ties go to the smallest class id.
ClassId argmax_label(const std::map<ClassId, double>& scores);

/// Unseen CAPD: the mixer-weighted sum of the support classes' seen CAPDs.
Vector unseen_capd(const CapdModel& model, const Vector& x, ClassId unseen_id);

// Same, from a precomputed seen CAPD matrix (columns in bank id order).
Vector unseen_capd_from(const CapdModel& model, const Matrix& seen_capds, ClassId unseen_id);

/// Conventional zero-shot prediction: argmax over unseen classes of
/// <p_u, e_u>, with the raw score map.
Prediction predict_zsl(const CapdModel& model, const Vector& x);

}  // namespace capd
