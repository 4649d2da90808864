#include "capd/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "capd/error.hpp"
#include "capd/random.hpp"

namespace capd {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

double parse_real(std::string_view cell, std::size_t line) {
  double value = 0.0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc() || ptr != end || cell.empty()) {
    throw FormatError(fmt::format("parse error: '{}' is not a number", cell), line);
  }
  if (!std::isfinite(value)) {
    throw FormatError(fmt::format("parse error: non-finite value '{}'", cell), line);
  }
  return value;
}

ClassId parse_class_id(std::string_view cell, std::size_t line) {
  ClassId value = 0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc() || ptr != end || cell.empty()) {
    throw FormatError(fmt::format("parse error: '{}' is not an integer class id", cell), line);
  }
  if (value < 1) {
    throw FormatError(fmt::format("class id {} must be >= 1", value), line);
  }
  return value;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  }
  out << content;
}

// Yields (1-based line number, line) for every non-blank line.
template <typename Fn>
void for_each_line(const std::string& text, Fn&& fn) {
  std::size_t number = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) {
      end = text.size();
    }
    ++number;
    const std::string_view line(text.data() + start, end - start);
    if (!trim(line).empty()) {
      fn(number, line);
    }
    start = end + 1;
  }
}

void check_header(const std::vector<std::string_view>& cells, std::size_t fixed,
                  std::string_view prefix, std::size_t line) {
  for (std::size_t i = fixed; i < cells.size(); ++i) {
    if (cells[i] != fmt::format("{}{}", prefix, i - fixed)) {
      throw FormatError(fmt::format("header column {} should be '{}{}', got '{}'", i, prefix,
                                    i - fixed, cells[i]),
                        line);
    }
  }
}

std::vector<ClassId> parse_id_list(std::string_view value, std::size_t line) {
  value = trim(value);
  if (value.size() < 2 || value.front() != '[' || value.back() != ']') {
    throw FormatError("id list must be written as [a, b, ...]", line);
  }
  std::vector<ClassId> ids;
  const auto inner = trim(value.substr(1, value.size() - 2));
  if (inner.empty()) {
    return ids;
  }
  for (const auto cell : split_commas(inner)) {
    ids.push_back(parse_class_id(cell, line));
  }
  return ids;
}

std::string join_ids(std::span<const ClassId> ids) {
  return fmt::format("[{}]", fmt::join(ids, ", "));
}

}  // namespace

// ---------------------------------------------------------------------------
// FeatureTable

FeatureTable::FeatureTable(std::vector<Instance> instances) : instances_(std::move(instances)) {
  if (instances_.empty()) {
    throw ValidationError("feature table is empty");
  }
  dimension_ = instances_.front().x.size();
  if (dimension_ < 1) {
    throw ValidationError("feature dimension must be >= 1");
  }
  by_id_.reserve(instances_.size());
  for (std::size_t row = 0; row < instances_.size(); ++row) {
    const auto& inst = instances_[row];
    if (inst.x.size() != dimension_) {
      throw ValidationError(fmt::format("instance '{}' has dimension {}, expected {}", inst.id,
                                        inst.x.size(), dimension_));
    }
    if (inst.class_id < 1) {
      throw ValidationError(fmt::format("instance '{}' has class id {} < 1", inst.id, inst.class_id));
    }
    if (!inst.x.allFinite()) {
      throw ValidationError(fmt::format("instance '{}' has non-finite features", inst.id));
    }
    if (!by_id_.emplace(inst.id, row).second) {
      throw ValidationError(fmt::format("duplicate instance_id '{}'", inst.id));
    }
  }
}

std::size_t FeatureTable::row_of(const std::string& id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) {
    throw ValidationError(fmt::format("unknown instance_id '{}'", id));
  }
  return it->second;
}

std::vector<std::size_t> FeatureTable::rows_of(std::span<const std::string> ids) const {
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  for (const auto& id : ids) {
    rows.push_back(row_of(id));
  }
  return rows;
}

std::vector<std::size_t> FeatureTable::rows_of_class(ClassId c) const {
  std::vector<std::size_t> rows;
  for (std::size_t row = 0; row < instances_.size(); ++row) {
    if (instances_[row].class_id == c) {
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<ClassId> FeatureTable::class_ids() const {
  std::set<ClassId> ids;
  for (const auto& inst : instances_) {
    ids.insert(inst.class_id);
  }
  return {ids.begin(), ids.end()};
}

// ---------------------------------------------------------------------------
// EmbeddingTable

EmbeddingTable::EmbeddingTable(std::map<ClassId, Vector> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) {
    throw ValidationError("embedding table is empty");
  }
  dimension_ = entries_.begin()->second.size();
  if (dimension_ < 1) {
    throw ValidationError("embedding dimension must be >= 1");
  }
  for (const auto& [id, e] : entries_) {
    if (id < 1) {
      throw ValidationError(fmt::format("class id {} must be >= 1", id));
    }
    if (e.size() != dimension_) {
      throw ValidationError(
          fmt::format("class {} embedding has dimension {}, expected {}", id, e.size(), dimension_));
    }
    if (!e.allFinite()) {
      throw ValidationError(fmt::format("class {} embedding is not finite", id));
    }
    if ((e.array() == 0.0).all()) {
      throw ValidationError(fmt::format("class {} has an all-zero embedding", id));
    }
  }
}

const Vector& EmbeddingTable::at(ClassId c) const {
  const auto it = entries_.find(c);
  if (it == entries_.end()) {
    throw ValidationError(fmt::format("no embedding for class {}", c));
  }
  return it->second;
}

std::vector<ClassId> EmbeddingTable::ids() const {
  std::vector<ClassId> ids;
  ids.reserve(entries_.size());
  for (const auto& [id, _] : entries_) {
    ids.push_back(id);
  }
  return ids;
}

Matrix EmbeddingTable::columns(std::span<const ClassId> ids) const {
  Matrix out(dimension_, static_cast<Eigen::Index>(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = at(ids[j]);
  }
  return out;
}

EmbeddingTable EmbeddingTable::normalized() const {
  auto entries = entries_;
  for (auto& [_, e] : entries) {
    e /= e.norm();
  }
  return EmbeddingTable(std::move(entries));
}

// ---------------------------------------------------------------------------
// Modes

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::zsl:
      return "zsl";
    case Mode::gzsl:
      return "gzsl";
    case Mode::fsl:
      return "fsl";
    case Mode::osl:
      return "osl";
  }
  return "zsl";
}

Mode parse_mode(const std::string& text) {
  if (text == "zsl") return Mode::zsl;
  if (text == "gzsl") return Mode::gzsl;
  if (text == "fsl") return Mode::fsl;
  if (text == "osl") return Mode::osl;
  throw ValidationError(fmt::format("unknown mode '{}' (expected zsl|gzsl|fsl|osl)", text));
}

// ---------------------------------------------------------------------------
// File formats

FeatureTable parse_features(const std::string& text) {
  std::vector<Instance> instances;
  std::size_t width = 0;
  bool header_seen = false;
  for_each_line(text, [&](std::size_t line, std::string_view raw) {
    const auto cells = split_commas(raw);
    if (!header_seen) {
      if (cells.size() < 3 || cells[0] != "instance_id" || cells[1] != "class_id") {
        throw FormatError("features header must be instance_id,class_id,f0,...", line);
      }
      check_header(cells, 2, "f", line);
      width = cells.size();
      header_seen = true;
      return;
    }
    if (cells.size() != width) {
      throw FormatError(
          fmt::format("format error: row has {} cells, expected {}", cells.size(), width), line);
    }
    Instance inst;
    inst.id = std::string(cells[0]);
    if (inst.id.empty()) {
      throw FormatError("empty instance_id", line);
    }
    inst.class_id = parse_class_id(cells[1], line);
    inst.x.resize(static_cast<Eigen::Index>(width - 2));
    for (std::size_t i = 2; i < width; ++i) {
      inst.x[static_cast<Eigen::Index>(i - 2)] = parse_real(cells[i], line);
    }
    instances.push_back(std::move(inst));
  });
  if (!header_seen) {
    throw FormatError("features file is empty");
  }
  return FeatureTable(std::move(instances));
}

EmbeddingTable parse_embeddings(const std::string& text, bool l2_normalize) {
  std::map<ClassId, Vector> entries;
  std::size_t width = 0;
  bool header_seen = false;
  for_each_line(text, [&](std::size_t line, std::string_view raw) {
    const auto cells = split_commas(raw);
    if (!header_seen) {
      if (cells.size() < 2 || cells[0] != "class_id") {
        throw FormatError("embeddings header must be class_id,e0,...", line);
      }
      check_header(cells, 1, "e", line);
      width = cells.size();
      header_seen = true;
      return;
    }
    if (cells.size() != width) {
      throw FormatError(
          fmt::format("format error: row has {} cells, expected {}", cells.size(), width), line);
    }
    const ClassId id = parse_class_id(cells[0], line);
    Vector e(static_cast<Eigen::Index>(width - 1));
    for (std::size_t i = 1; i < width; ++i) {
      e[static_cast<Eigen::Index>(i - 1)] = parse_real(cells[i], line);
    }
    if ((e.array() == 0.0).all()) {
      throw FormatError(fmt::format("class {} has an all-zero embedding", id), line);
    }
    if (!entries.emplace(id, std::move(e)).second) {
      throw FormatError(fmt::format("duplicate class_id {}", id), line);
    }
  });
  if (!header_seen) {
    throw FormatError("embeddings file is empty");
  }
  EmbeddingTable table(std::move(entries));
  return l2_normalize ? table.normalized() : table;
}

SplitConfig parse_split_config(const std::string& text) {
  SplitConfig cfg;
  bool has_seen = false;
  bool has_unseen = false;
  bool has_shots = false;
  for_each_line(text, [&](std::size_t line, std::string_view raw) {
    auto content = raw.substr(0, raw.find('#'));
    if (trim(content).empty()) {
      return;
    }
    const auto eq = content.find('=');
    if (eq == std::string_view::npos) {
      throw FormatError("expected 'key = value'", line);
    }
    const auto key = trim(content.substr(0, eq));
    const auto value = trim(content.substr(eq + 1));
    if (key == "seen") {
      cfg.seen = parse_id_list(value, line);
      has_seen = true;
    } else if (key == "unseen") {
      cfg.unseen = parse_id_list(value, line);
      has_unseen = true;
    } else if (key == "mode") {
      try {
        cfg.mode = parse_mode(std::string(value));
      } catch (const ValidationError& e) {
        throw FormatError(e.what(), line);
      }
    } else if (key == "shots") {
      const auto* end = value.data() + value.size();
      const auto [ptr, ec] = std::from_chars(value.data(), end, cfg.shots);
      if (ec != std::errc() || ptr != end || cfg.shots < 1) {
        throw FormatError(fmt::format("shots must be a positive integer, got '{}'", value), line);
      }
      has_shots = true;
    } else if (key == "seed") {
      const auto* end = value.data() + value.size();
      const auto [ptr, ec] = std::from_chars(value.data(), end, cfg.seed);
      if (ec != std::errc() || ptr != end) {
        throw FormatError(fmt::format("seed must be an unsigned integer, got '{}'", value), line);
      }
    } else {
      throw FormatError(fmt::format("unknown key '{}'", key), line);
    }
  });
  if (!has_seen || !has_unseen) {
    throw FormatError("split config needs both 'seen' and 'unseen'");
  }
  if (cfg.mode == Mode::osl && !has_shots) {
    cfg.shots = 1;
  }
  return cfg;
}

FeatureTable load_features(const std::filesystem::path& path) {
  return parse_features(read_file(path));
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, bool l2_normalize) {
  return parse_embeddings(read_file(path), l2_normalize);
}

SplitConfig load_split_config(const std::filesystem::path& path) {
  return parse_split_config(read_file(path));
}

void write_features(const std::filesystem::path& path, const FeatureTable& table) {
  fmt::memory_buffer out;
  fmt::format_to(std::back_inserter(out), "instance_id,class_id");
  for (Eigen::Index i = 0; i < table.dimension(); ++i) {
    fmt::format_to(std::back_inserter(out), ",f{}", i);
  }
  out.push_back('\n');
  for (const auto& inst : table.instances()) {
    fmt::format_to(std::back_inserter(out), "{},{}", inst.id, inst.class_id);
    for (const double v : inst.x) {
      fmt::format_to(std::back_inserter(out), ",{}", v);
    }
    out.push_back('\n');
  }
  write_file(path, fmt::to_string(out));
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
  fmt::memory_buffer out;
  fmt::format_to(std::back_inserter(out), "class_id");
  for (Eigen::Index i = 0; i < table.dimension(); ++i) {
    fmt::format_to(std::back_inserter(out), ",e{}", i);
  }
  out.push_back('\n');
  for (const auto& [id, e] : table.entries()) {
    fmt::format_to(std::back_inserter(out), "{}", id);
    for (const double v : e) {
      fmt::format_to(std::back_inserter(out), ",{}", v);
    }
    out.push_back('\n');
  }
  write_file(path, fmt::to_string(out));
}

void write_split_config(const std::filesystem::path& path, const SplitConfig& cfg) {
  write_file(path, fmt::format("seen = {}\nunseen = {}\nmode = {}\nshots = {}\nseed = {}\n",
                               join_ids(cfg.seen), join_ids(cfg.unseen), to_string(cfg.mode),
                               cfg.shots, cfg.seed));
}

// ---------------------------------------------------------------------------
// Splits

void check_consistent(const FeatureTable& features, const EmbeddingTable& embeddings) {
  for (const ClassId c : features.class_ids()) {
    if (!embeddings.contains(c)) {
      throw ValidationError(fmt::format("class {} has features but no embedding", c));
    }
  }
}

std::vector<std::string> ExperimentSplit::test_instances(const FeatureTable& features) const {
  const std::set<ClassId> unseen(unseen_ids.begin(), unseen_ids.end());
  std::set<std::string> shots;
  for (const auto& [_, ids] : fsl_shots) {
    shots.insert(ids.begin(), ids.end());
  }
  const std::set<std::string> held_out(seen_test.begin(), seen_test.end());
  std::vector<std::string> out;
  for (const auto& inst : features.instances()) {
    if (unseen.contains(inst.class_id)) {
      if (!shots.contains(inst.id)) {
        out.push_back(inst.id);
      }
    } else if (mode == Mode::gzsl && held_out.contains(inst.id)) {
      out.push_back(inst.id);
    }
  }
  return out;
}

std::vector<std::string> ExperimentSplit::all_shots() const {
  std::vector<std::string> out;
  for (const auto& [_, ids] : fsl_shots) {
    out.insert(out.end(), ids.begin(), ids.end());
  }
  return out;
}

ExperimentSplit make_split(const FeatureTable& features, const EmbeddingTable& embeddings,
                           const SplitConfig& cfg, std::uint64_t seed) {
  check_consistent(features, embeddings);
  if (cfg.seen.empty() || cfg.unseen.empty()) {
    throw ValidationError("split needs at least one seen and one unseen class");
  }
  std::set<ClassId> seen(cfg.seen.begin(), cfg.seen.end());
  std::set<ClassId> unseen(cfg.unseen.begin(), cfg.unseen.end());
  if (seen.size() != cfg.seen.size() || unseen.size() != cfg.unseen.size()) {
    throw ValidationError("duplicate class id in split config");
  }
  for (const ClassId c : unseen) {
    if (seen.contains(c)) {
      throw ValidationError(fmt::format("class {} is listed as both seen and unseen", c));
    }
  }

  ExperimentSplit split;
  split.seen_ids.assign(seen.begin(), seen.end());
  split.unseen_ids.assign(unseen.begin(), unseen.end());
  split.mode = cfg.mode;
  split.seed = seed;
  split.shots = 0;

  std::map<ClassId, std::vector<std::size_t>> rows_by_class;
  for (std::size_t row = 0; row < features.size(); ++row) {
    rows_by_class[features[row].class_id].push_back(row);
  }
  for (const ClassId c : split.seen_ids) {
    if (!embeddings.contains(c) || rows_by_class[c].empty()) {
      throw ValidationError(fmt::format("seen class {} is missing from the features or embeddings", c));
    }
  }
  for (const ClassId c : split.unseen_ids) {
    if (!embeddings.contains(c) || rows_by_class[c].empty()) {
      throw ValidationError(
          fmt::format("unseen class {} is missing from the features or embeddings", c));
    }
  }

  std::set<std::size_t> test_rows;
  if (cfg.mode == Mode::gzsl) {
    for (const ClassId c : split.seen_ids) {
      auto rows = rows_by_class[c];
      if (rows.size() < 2) {
        throw ValidationError(fmt::format(
            "seen class {} has {} instance(s); GZSL needs at least 2 for the train/test split", c,
            rows.size()));
      }
      auto rng = Rng::for_stream(seed, c, stream::kSplit);
      rng.shuffle(std::span(rows));
      const auto n_train = static_cast<std::size_t>(
          std::ceil(kGzslTrainFraction * static_cast<double>(rows.size())));
      test_rows.insert(rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
    }
  }
  const std::set<ClassId> seen_lookup(split.seen_ids.begin(), split.seen_ids.end());
  for (std::size_t row = 0; row < features.size(); ++row) {
    if (!seen_lookup.contains(features[row].class_id)) {
      continue;
    }
    (test_rows.contains(row) ? split.seen_test : split.seen_train).push_back(features[row].id);
  }

  if (cfg.mode == Mode::fsl || cfg.mode == Mode::osl) {
    split.shots = cfg.mode == Mode::osl ? 1 : cfg.shots;
    if (split.shots < 1) {
      throw ValidationError("shot count must be >= 1");
    }
    for (const ClassId u : split.unseen_ids) {
      auto rows = rows_by_class[u];
      if (static_cast<std::size_t>(split.shots) > rows.size()) {
        throw ValidationError(fmt::format("unseen class {} has {} instance(s), fewer than {} shots",
                                          u, rows.size(), split.shots));
      }
      // Partial Fisher-Yates: the first `shots` positions are a uniform draw
      // without replacement.
      auto rng = Rng::for_stream(seed, u, stream::kShots);
      auto& picked = split.fsl_shots[u];
      for (std::size_t i = 0; i < static_cast<std::size_t>(split.shots); ++i) {
        const auto j = i + rng.index(rows.size() - i);
        std::swap(rows[i], rows[j]);
        picked.push_back(features[rows[i]].id);
      }
    }
  }
  return split;
}

}  // namespace capd
