#include "capd/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "capd/error.hpp"

namespace capd {

namespace {

void check_aligned(std::span<const ClassId> predictions, std::span<const ClassId> truth) {
  if (predictions.size() != truth.size()) {
    throw ValidationError(fmt::format("{} predictions for {} ground-truth labels",
                                      predictions.size(), truth.size()));
  }
  if (truth.empty()) {
    throw ValidationError("evaluation needs at least one instance");
  }
}

// Instance order for one class column: score descending, ties by id.
std::vector<std::size_t> ranking(const ScoreTable& table, std::size_t column) {
  std::vector<std::size_t> order(table.instance_ids.size());
  std::iota(order.begin(), order.end(), 0);
  const auto col = static_cast<Eigen::Index>(column);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = table.scores(static_cast<Eigen::Index>(a), col);
    const double sb = table.scores(static_cast<Eigen::Index>(b), col);
    if (sa != sb) {
      return sa > sb;
    }
    return table.instance_ids[a] < table.instance_ids[b];
  });
  return order;
}

std::vector<bool> relevance(const ScoreTable& table, std::span<const ClassId> truth,
                            std::size_t column) {
  const ClassId c = table.class_ids[column];
  std::vector<bool> rel;
  rel.reserve(truth.size());
  for (const auto i : ranking(table, column)) {
    rel.push_back(truth[i] == c);
  }
  if (std::none_of(rel.begin(), rel.end(), [](bool r) { return r; })) {
    throw ValidationError(fmt::format("class {} has no positive test instance", c));
  }
  return rel;
}

void check_table(const ScoreTable& table, std::span<const ClassId> truth) {
  if (table.instance_ids.size() != truth.size() ||
      table.scores.rows() != static_cast<Eigen::Index>(truth.size()) ||
      table.scores.cols() != static_cast<Eigen::Index>(table.class_ids.size())) {
    throw ValidationError("score table shape does not match the ground truth");
  }
  if (table.class_ids.empty() || truth.empty()) {
    throw ValidationError("score table is empty");
  }
}

double mean_of(const std::map<ClassId, double>& values, const std::vector<ClassId>& keys) {
  double sum = 0.0;
  for (const ClassId c : keys) {
    sum += values.at(c);
  }
  return sum / static_cast<double>(keys.size());
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  }
  return out;
}

}  // namespace

double top1_accuracy(std::span<const ClassId> predictions, std::span<const ClassId> truth) {
  check_aligned(predictions, truth);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    hits += predictions[i] == truth[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::map<ClassId, double> per_class_accuracy(std::span<const ClassId> predictions,
                                             std::span<const ClassId> truth) {
  check_aligned(predictions, truth);
  std::map<ClassId, std::pair<std::size_t, std::size_t>> tally;  // (hits, total)
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& [hits, total] = tally[truth[i]];
    hits += predictions[i] == truth[i] ? 1 : 0;
    ++total;
  }
  std::map<ClassId, double> out;
  for (const auto& [c, t] : tally) {
    out[c] = static_cast<double>(t.first) / static_cast<double>(t.second);
  }
  return out;
}

double harmonic_mean(double acc_s, double acc_u) {
  if (!(acc_s >= 0.0) || !(acc_u >= 0.0) || !std::isfinite(acc_s) || !std::isfinite(acc_u)) {
    throw ValidationError("harmonic mean needs finite nonnegative accuracies");
  }
  const double sum = acc_s + acc_u;
  return sum == 0.0 ? 0.0 : 2.0 * acc_s * acc_u / sum;
}

double average_precision(const std::vector<bool>& relevance_by_rank) {
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t rank = 0; rank < relevance_by_rank.size(); ++rank) {
    if (relevance_by_rank[rank]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0) {
    throw ValidationError("average precision needs at least one relevant item");
  }
  return sum / static_cast<double>(hits);
}

double mean_average_precision(const ScoreTable& table, std::span<const ClassId> truth) {
  check_table(table, truth);
  double sum = 0.0;
  for (std::size_t c = 0; c < table.class_ids.size(); ++c) {
    sum += average_precision(relevance(table, truth, c));
  }
  return sum / static_cast<double>(table.class_ids.size());
}

PrCurve precision_recall_curve(const ScoreTable& table, std::span<const ClassId> truth,
                               std::size_t column) {
  check_table(table, truth);
  if (column >= table.class_ids.size()) {
    throw ValidationError("PR curve column out of range");
  }
  const auto rel = relevance(table, truth, column);
  const auto positives = static_cast<double>(std::count(rel.begin(), rel.end(), true));
  PrCurve curve;
  curve.reserve(rel.size());
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < rel.size(); ++rank) {
    hits += rel[rank] ? 1 : 0;
    curve.emplace_back(static_cast<double>(hits) / positives,
                       static_cast<double>(hits) / static_cast<double>(rank + 1));
  }
  return curve;
}

ConfusionMatrix confusion_matrix(std::span<const ClassId> predictions,
                                 std::span<const ClassId> truth, std::vector<ClassId> labels) {
  check_aligned(predictions, truth);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  const auto index_of = [&](ClassId c) {
    const auto it = std::lower_bound(labels.begin(), labels.end(), c);
    if (it == labels.end() || *it != c) {
      throw ValidationError(fmt::format("class {} is outside the confusion label set", c));
    }
    return static_cast<Eigen::Index>(it - labels.begin());
  };
  ConfusionMatrix out;
  const auto n = static_cast<Eigen::Index>(labels.size());
  out.counts.setZero(n, n);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++out.counts(index_of(truth[i]), index_of(predictions[i]));
  }
  out.labels = std::move(labels);
  return out;
}

EvalReport evaluate(std::span<const ClassId> predictions, std::span<const ClassId> truth,
                    std::vector<ClassId> labels, const ScoreTable* scores) {
  EvalReport report;
  report.count = truth.size();
  report.top1 = top1_accuracy(predictions, truth);
  report.per_class = per_class_accuracy(predictions, truth);
  labels.insert(labels.end(), truth.begin(), truth.end());
  labels.insert(labels.end(), predictions.begin(), predictions.end());
  report.confusion = confusion_matrix(predictions, truth, std::move(labels));
  if (scores) {
    report.map_score = mean_average_precision(*scores, truth);
    for (std::size_t c = 0; c < scores->class_ids.size(); ++c) {
      report.pr_curves[scores->class_ids[c]] = precision_recall_curve(*scores, truth, c);
    }
  }
  return report;
}

EvalReport gzsl_report(std::span<const ClassId> predictions, std::span<const ClassId> truth,
                       const ExperimentSplit& split, const ScoreTable* scores) {
  std::vector<ClassId> labels = split.seen_ids;
  labels.insert(labels.end(), split.unseen_ids.begin(), split.unseen_ids.end());
  auto report = evaluate(predictions, truth, labels, scores);

  const std::set<ClassId> seen(split.seen_ids.begin(), split.seen_ids.end());
  const std::set<ClassId> unseen(split.unseen_ids.begin(), split.unseen_ids.end());
  std::vector<ClassId> seen_present;
  std::vector<ClassId> unseen_present;
  for (const auto& [c, _] : report.per_class) {
    if (seen.contains(c)) {
      seen_present.push_back(c);
    } else if (unseen.contains(c)) {
      unseen_present.push_back(c);
    } else {
      throw ValidationError(fmt::format("test class {} is neither seen nor unseen", c));
    }
  }
  if (seen_present.empty() || unseen_present.empty()) {
    throw ValidationError("GZSL evaluation needs both seen and unseen test instances");
  }
  report.acc_s = mean_of(report.per_class, seen_present);
  report.acc_u = mean_of(report.per_class, unseen_present);
  report.hm = harmonic_mean(*report.acc_s, *report.acc_u);
  return report;
}

void write_report(const std::filesystem::path& dir, const EvalReport& report) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "report.txt");
    out << fmt::format("instances = {}\n", report.count);
    out << fmt::format("top1 = {}\n", report.top1);
    if (report.acc_s) out << fmt::format("acc_s = {}\n", *report.acc_s);
    if (report.acc_u) out << fmt::format("acc_u = {}\n", *report.acc_u);
    if (report.hm) out << fmt::format("hm = {}\n", *report.hm);
    if (report.map_score) out << fmt::format("map = {}\n", *report.map_score);
  }
  {
    auto out = open_out(dir / "per_class.csv");
    out << "class_id,accuracy\n";
    for (const auto& [c, acc] : report.per_class) {
      out << fmt::format("{},{}\n", c, acc);
    }
  }
  {
    auto out = open_out(dir / "confusion.csv");
    out << "true\\predicted";
    for (const ClassId c : report.confusion.labels) {
      out << fmt::format(",{}", c);
    }
    out << '\n';
    for (Eigen::Index i = 0; i < report.confusion.counts.rows(); ++i) {
      out << report.confusion.labels[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < report.confusion.counts.cols(); ++j) {
        out << ',' << report.confusion.counts(i, j);
      }
      out << '\n';
    }
  }
  if (!report.pr_curves.empty()) {
    std::filesystem::create_directories(dir / "pr");
    for (const auto& [c, curve] : report.pr_curves) {
      auto out = open_out(dir / "pr" / fmt::format("class_{}.csv", c));
      out << "recall,precision\n";
      for (const auto& [r, p] : curve) {
        out << fmt::format("{},{}\n", r, p);
      }
    }
  }
}

}  // namespace capd
