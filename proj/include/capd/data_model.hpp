#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "capd/linalg.hpp"

namespace capd {

struct Instance {
  std::string id;
  ClassId class_id = 0;
  Vector x;
};

/// Labeled visual feature vectors, all of one dimension k. Row order is the
/// file order and is preserved everywhere downstream.
class FeatureTable {
 public:
  FeatureTable() = default;
  explicit FeatureTable(std::vector<Instance> instances);

  std::size_t size() const { return instances_.size(); }
  Eigen::Index dimension() const { return dimension_; }
  const std::vector<Instance>& instances() const { return instances_; }
  const Instance& operator[](std::size_t row) const { return instances_[row]; }

  bool contains(const std::string& id) const { return by_id_.contains(id); }
  std::size_t row_of(const std::string& id) const;
  std::vector<std::size_t> rows_of(std::span<const std::string> ids) const;

  // Rows of one class, in table order.
  std::vector<std::size_t> rows_of_class(ClassId c) const;
  std::vector<ClassId> class_ids() const;

 private:
  std::vector<Instance> instances_;
  std::unordered_map<std::string, std::size_t> by_id_;
  Eigen::Index dimension_ = 0;
};

/// Per-class semantic embedding vectors of one dimension d, keyed by class id.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::map<ClassId, Vector> entries);

  std::size_t size() const { return entries_.size(); }
  Eigen::Index dimension() const { return dimension_; }
  const std::map<ClassId, Vector>& entries() const { return entries_; }

  bool contains(ClassId c) const { return entries_.contains(c); }
  const Vector& at(ClassId c) const;
  std::vector<ClassId> ids() const;

  // d x n matrix whose columns are the embeddings of `ids`, in order.
  Matrix columns(std::span<const ClassId> ids) const;

  EmbeddingTable normalized() const;

 private:
  std::map<ClassId, Vector> entries_;
  Eigen::Index dimension_ = 0;
};

enum class Mode { zsl, gzsl, fsl, osl };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& text);

struct SplitConfig {
  std::vector<ClassId> seen;
  std::vector<ClassId> unseen;
  Mode mode = Mode::zsl;
  int shots = 3;
  std::uint64_t seed = 0;
};

/// Seen/unseen partition plus the instance-level train/test/shot assignment.
/// Instance lists are kept in feature-table order.
struct ExperimentSplit {
  std::vector<ClassId> seen_ids;    // ascending
  std::vector<ClassId> unseen_ids;  // ascending
  std::vector<std::string> seen_train;
  std::vector<std::string> seen_test;
  std::map<ClassId, std::vector<std::string>> fsl_shots;
  Mode mode = Mode::zsl;
  int shots = 0;
  std::uint64_t seed = 0;

  // Instances to be predicted and scored under `mode`: unseen instances
  // (minus shots) plus, in GZSL, the held-out seen instances.
  std::vector<std::string> test_instances(const FeatureTable& features) const;

  // All shot instance ids, ordered by class then draw order.
  std::vector<std::string> all_shots() const;

  bool operator==(const ExperimentSplit&) const = default;
};

// Fraction of each seen class kept for training in GZSL mode (rounded up).
inline constexpr double kGzslTrainFraction = 0.8;

FeatureTable load_features(const std::filesystem::path& path);
EmbeddingTable load_embeddings(const std::filesystem::path& path, bool l2_normalize = false);
SplitConfig load_split_config(const std::filesystem::path& path);

void write_features(const std::filesystem::path& path, const FeatureTable& table);
void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);
void write_split_config(const std::filesystem::path& path, const SplitConfig& cfg);

// Parsers over in-memory text; the loaders above are thin wrappers.
FeatureTable parse_features(const std::string& text);
EmbeddingTable parse_embeddings(const std::string& text, bool l2_normalize = false);
SplitConfig parse_split_config(const std::string& text);

ExperimentSplit make_split(const FeatureTable& features, const EmbeddingTable& embeddings,
                           const SplitConfig& cfg, std::uint64_t seed);

// Checks that every class in the feature table has an embedding of the
// expected dimension.
void check_consistent(const FeatureTable& features, const EmbeddingTable& embeddings);

}  // namespace capd
