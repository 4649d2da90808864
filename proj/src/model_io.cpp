#include "capd/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "capd/error.hpp"

namespace capd {

namespace {

constexpr char kMagic[8] = {'C', 'A', 'P', 'D', 'M', 'O', 'D', 'L'};
constexpr char kTrailer[8] = {'C', 'A', 'P', 'D', 'E', 'N', 'D', '\0'};
constexpr std::uint32_t kHasGamma = 1u << 0;
constexpr std::uint32_t kHasFsl = 1u << 1;

class Writer {
 public:
  void bytes(const char* data, std::size_t n) { out_.append(data, n); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { little(v, 4); }
  void u64(std::uint64_t v) { little(v, 8); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  // Row-major, regardless of Eigen's column-major storage.
  void matrix(const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        f64(m(i, j));
      }
    }
  }
  std::string take() { return std::move(out_); }

 private:
  void little(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) {
      out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& data) : data_(data) {}

  void expect(const char* tag, std::size_t n, const char* what) {
    need(n);
    if (std::memcmp(data_.data() + pos_, tag, n) != 0) {
      throw FormatError(fmt::format("model file: bad {}", what));
    }
    pos_ += n;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(little(4)); }
  std::uint64_t u64() { return little(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t count(std::uint64_t limit) {
    const auto v = u64();
    if (v > limit) {
      throw FormatError(fmt::format("model file: implausible count {}", v));
    }
    return static_cast<std::size_t>(v);
  }
  Matrix matrix(Eigen::Index rows, Eigen::Index cols) {
    need(static_cast<std::size_t>(rows * cols) * 8);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        m(i, j) = f64();
      }
    }
    return m;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
      throw FormatError("model file is truncated");
    }
  }
  std::uint64_t little(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    }
    return v;
  }
  const std::string& data_;
  std::size_t pos_ = 0;
};

void write_bank(Writer& w, const ClassifierBank& bank) {
  for (const auto& [_, proj] : bank.projectors()) {
    w.f64(proj.initial_objective);
    w.f64(proj.final_objective);
    w.matrix(proj.W);
  }
}

ClassifierBank read_bank(Reader& r, const std::vector<ClassId>& ids, Eigen::Index k,
                         Eigen::Index d, const SgdHyper& hyper) {
  std::map<ClassId, ClassProjector> projectors;
  for (const ClassId c : ids) {
    ClassProjector proj;
    proj.class_id = c;
    proj.hyper = hyper;
    proj.initial_objective = r.f64();
    proj.final_objective = r.f64();
    proj.W = r.matrix(k, d);
    projectors.emplace(c, std::move(proj));
  }
  return ClassifierBank(std::move(projectors));
}

constexpr std::uint64_t kMaxDim = 1u << 24;

}  // namespace

std::string serialize_model(const CapdModel& model) {
  model.validate();
  const auto k = model.bank.feature_dim();
  const auto d = model.embeddings.dimension();
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kModelFormatVersion);
  w.u32((model.gzsl ? kHasGamma : 0u) | (model.fsl ? kHasFsl : 0u));
  w.u64(static_cast<std::uint64_t>(k));
  w.u64(static_cast<std::uint64_t>(d));
  w.u64(model.seen_ids.size());
  w.u64(model.unseen_ids.size());
  for (const ClassId c : model.seen_ids) w.i64(c);
  for (const ClassId c : model.unseen_ids) w.i64(c);
  for (const ClassId c : model.seen_ids) w.matrix(model.embeddings.at(c).transpose());
  for (const ClassId c : model.unseen_ids) w.matrix(model.embeddings.at(c).transpose());

  const auto& s = model.settings;
  w.f64(s.sgd.lambda_s);
  w.f64(s.sgd.learning_rate);
  w.i64(s.sgd.epochs);
  w.f64(s.lambda_u);
  w.u8(s.support == SupportMode::full ? 0 : 1);
  w.u64(s.seed);

  write_bank(w, model.bank);

  w.matrix(model.metric.M.matrix());
  w.f64(model.metric.temperature);
  w.u8(model.metric.degenerate_constraint ? 1 : 0);
  w.u64(model.metric.trace.size());
  for (const double v : model.metric.trace) w.f64(v);

  for (const ClassId u : model.unseen_ids) {
    const auto& mix = model.mixers.at(u);
    w.u8(mix.mode == MixingMode::full ? 0 : 1);
    w.u64(mix.support.size());
    for (const ClassId c : mix.support) w.i64(c);
    for (const double v : mix.weights) w.f64(v);
    w.f64(mix.reconstruction_error);
  }

  if (model.gzsl) {
    w.f64(model.gzsl->lambda_gamma);
    w.f64(model.gzsl->initial_objective);
    w.f64(model.gzsl->final_objective);
    w.matrix(model.gzsl->gammas);
  }
  if (model.fsl) {
    w.u8(model.fsl->mode == DeltaMode::global ? 0 : 1);
    w.u8(model.fsl->fallback ? 1 : 0);
    write_bank(w, model.fsl->unseen_bank);
    for (const ClassId u : model.unseen_ids) {
      w.f64(model.fsl->deltas.at(u).delta);
      w.f64(model.fsl->deltas.at(u).delta_prime);
    }
  }
  w.bytes(kTrailer, sizeof kTrailer);
  return w.take();
}

CapdModel deserialize_model(const std::string& bytes) {
  Reader r(bytes);
  r.expect(kMagic, sizeof kMagic, "magic");
  const auto version = r.u32();
  if (version != kModelFormatVersion) {
    throw FormatError(fmt::format("model file: unsupported version {}", version));
  }
  const auto flags = r.u32();
  const auto k = static_cast<Eigen::Index>(r.count(kMaxDim));
  const auto d = static_cast<Eigen::Index>(r.count(kMaxDim));
  const auto S = r.count(kMaxDim);
  const auto U = r.count(kMaxDim);

  CapdModel model;
  for (std::size_t i = 0; i < S; ++i) model.seen_ids.push_back(r.i64());
  for (std::size_t i = 0; i < U; ++i) model.unseen_ids.push_back(r.i64());
  std::map<ClassId, Vector> entries;
  for (const ClassId c : model.seen_ids) entries[c] = r.matrix(1, d).transpose();
  for (const ClassId c : model.unseen_ids) entries[c] = r.matrix(1, d).transpose();
  model.embeddings = EmbeddingTable(std::move(entries));

  auto& s = model.settings;
  s.sgd.lambda_s = r.f64();
  s.sgd.learning_rate = r.f64();
  s.sgd.epochs = static_cast<int>(r.i64());
  s.lambda_u = r.f64();
  s.support = r.u8() == 0 ? SupportMode::full : SupportMode::reduced_auto;
  s.seed = r.u64();

  model.bank = read_bank(r, model.seen_ids, k, d, s.sgd);

  model.metric.M = PsdMatrix(r.matrix(d, d));
  model.metric.temperature = r.f64();
  model.metric.degenerate_constraint = r.u8() != 0;
  const auto trace_len = r.count(1u << 30);
  for (std::size_t i = 0; i < trace_len; ++i) model.metric.trace.push_back(r.f64());

  for (const ClassId u : model.unseen_ids) {
    MixingCoefficients mix;
    mix.unseen_id = u;
    mix.mode = r.u8() == 0 ? MixingMode::full : MixingMode::reduced;
    const auto n = r.count(S);
    for (std::size_t i = 0; i < n; ++i) mix.support.push_back(r.i64());
    mix.weights.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) mix.weights[static_cast<Eigen::Index>(i)] = r.f64();
    mix.reconstruction_error = r.f64();
    model.mixers.emplace(u, std::move(mix));
  }

  if (flags & kHasGamma) {
    GammaModel g;
    g.seen_ids = model.seen_ids;
    g.lambda_gamma = r.f64();
    g.initial_objective = r.f64();
    g.final_objective = r.f64();
    g.gammas = r.matrix(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(S));
    model.gzsl = std::move(g);
  }
  if (flags & kHasFsl) {
    FslModel f;
    f.mode = r.u8() == 0 ? DeltaMode::global : DeltaMode::per_class;
    f.fallback = r.u8() != 0;
    f.unseen_bank = read_bank(r, model.unseen_ids, k, d, s.sgd);
    for (const ClassId u : model.unseen_ids) {
      DeltaPair p;
      p.delta = r.f64();
      p.delta_prime = r.f64();
      f.deltas[u] = p;
    }
    model.fsl = std::move(f);
  }
  r.expect(kTrailer, sizeof kTrailer, "trailer");
  if (!r.at_end()) {
    throw FormatError("model file has trailing bytes");
  }
  model.validate();
  return model;
}

void save_model(const std::filesystem::path& path, const CapdModel& model) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

CapdModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError(fmt::format("cannot open model '{}'", path.string()));
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_model(buffer.str());
}

}  // namespace capd
