#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "capd/data_model.hpp"
#include "capd/linalg.hpp"

namespace capd {

double top1_accuracy(std::span<const ClassId> predictions, std::span<const ClassId> truth);

// Accuracy within each true class, for every class present in `truth`.
std::map<ClassId, double> per_class_accuracy(std::span<const ClassId> predictions,
                                             std::span<const ClassId> truth);

// 2ab / (a + b), and 0 when both are 0. Scale-free, so percentages work too.
double harmonic_mean(double acc_s, double acc_u);

/// Per-instance scores over a fixed set of candidate classes.
struct ScoreTable {
  std::vector<std::string> instance_ids;
  std::vector<ClassId> class_ids;
  Matrix scores;  // instance x class
};

using PrCurve = std::vector<std::pair<double, double>>;  // (recall, precision)

// Non-interpolated AP of one ranking given relevance in rank order.
double average_precision(const std::vector<bool>& relevance_by_rank);

/// Mean over classes of the exact average precision, ranking all instances
/// by that class's score (descending, ties by ascending instance id).
double mean_average_precision(const ScoreTable& table, std::span<const ClassId> truth);

// (recall, precision) after each rank position for class column `column`.
PrCurve precision_recall_curve(const ScoreTable& table, std::span<const ClassId> truth,
                               std::size_t column);

/// Square count matrix over `labels`; rows are true classes, columns are
/// predictions.
struct ConfusionMatrix {
  std::vector<ClassId> labels;
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;
};

ConfusionMatrix confusion_matrix(std::span<const ClassId> predictions,
                                 std::span<const ClassId> truth, std::vector<ClassId> labels);

struct EvalReport {
  std::size_t count = 0;
  double top1 = 0.0;
  std::map<ClassId, double> per_class;
  std::optional<double> acc_s;
  std::optional<double> acc_u;
  std::optional<double> hm;
  std::optional<double> map_score;
  ConfusionMatrix confusion;
  std::map<ClassId, PrCurve> pr_curves;
};

/// Recognition report: top-1, per-class accuracy, confusion over `labels`
/// and, when `scores` is given, mAP and PR curves over its classes.
EvalReport evaluate(std::span<const ClassId> predictions, std::span<const ClassId> truth,
                    std::vector<ClassId> labels, const ScoreTable* scores = nullptr);

/// GZSL report: acc_s and acc_u are mean per-class accuracies over the seen
/// and unseen test classes, hm their harmonic mean.
EvalReport gzsl_report(std::span<const ClassId> predictions, std::span<const ClassId> truth,
                       const ExperimentSplit& split, const ScoreTable* scores = nullptr);

// report.txt (key = value), per_class.csv, confusion.csv and pr/class_<id>.csv.
void write_report(const std::filesystem::path& dir, const EvalReport& report);

}  // namespace capd
