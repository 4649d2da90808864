// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "capd/evaluation.hpp"
#include "capd/gzsl_balancer.hpp"
#include "capd/metric_learning.hpp"
#include "capd/numerics.hpp"
#include "capd/pipeline.hpp"
#include "capd/random.hpp"
#include "capd/semantic_mixer.hpp"
#include "capd/seen_classifier.hpp"
#include "capd/synthgen.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace capd;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", n, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void guarded(int n, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(n, false, fmt::format("threw: {}", e.what()));
  }
}

EmbeddingTable random_embeddings(Rng& rng, int classes, Eigen::Index d) {
  std::map<ClassId, Vector> e;
  for (ClassId c = 1; c <= classes; ++c) e[c] = fixture::random_vector(rng, d);
  return EmbeddingTable(std::move(e));
}

std::vector<ClassId> range_ids(int from, int to) {
  std::vector<ClassId> ids;
  for (ClassId c = from; c <= to; ++c) ids.push_back(c);
  return ids;
}

std::vector<std::size_t> test_rows(const SynthData& data) {
  return data.features.rows_of(data.split.test_instances(data.features));
}

std::vector<ClassId> truth_of(const FeatureTable& f, const std::vector<std::size_t>& rows) {
  std::vector<ClassId> t;
  for (const auto r : rows) t.push_back(f[r].class_id);
  return t;
}

std::vector<ClassId> labels_of(const std::vector<Prediction>& p) {
  std::vector<ClassId> l;
  for (const auto& x : p) l.push_back(x.label);
  return l;
}

SynthData benchmark(Mode mode, std::uint64_t seed) {
  auto cfg = synth_preset("small");
  cfg.mode = mode;
  cfg.seed = seed;
  return generate(cfg);
}

TrainConfig defaults(Mode mode, std::uint64_t seed, unsigned threads = 1) {
  TrainConfig tc;
  tc.mode = mode;
  tc.seed = seed;
  tc.threads = threads;
  return tc;
}

double zsl_top1(const CapdModel& model, const SynthData& data, Mode as = Mode::zsl) {
  const auto rows = test_rows(data);
  const auto preds = predict_batch(model, as, data.features, rows);
  return top1_accuracy(labels_of(preds), truth_of(data.features, rows));
}

// Classifier objective: mean softplus loss plus weight decay, gradient
// assembled from the per-sample gradients.
void criterion1() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.index(7));
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.index(5));
    const int S = 2 + static_cast<int>(rng.index(4));
    const auto emb = random_embeddings(rng, S, d);
    const auto ids = range_ids(1, S);
    std::vector<Instance> inst;
    for (int i = 0; i < 3 * S; ++i) inst.push_back({fmt::format("x{}", i), 1 + i % S, fixture::random_vector(rng, k)});
    const FeatureTable f(inst);
    std::vector<std::size_t> rows(f.size());
    std::iota(rows.begin(), rows.end(), 0);
    ClassProjector w{1 + static_cast<ClassId>(rng.index(static_cast<std::size_t>(S))),
                     fixture::random_matrix(rng, k, d, 0.3), {1e-2, 0.005, 1}, 0, 0};
    Matrix grad = w.hyper.lambda_s * w.W;
    for (const auto r : rows) grad += loss_and_gradient(w, f[r].x, f[r].class_id, emb, ids).grad / static_cast<double>(rows.size());
    const auto fd = oracle::finite_difference(
        [&](const Matrix& W) {
          auto probe = w;
          probe.W = W;
          return classifier_objective(probe, f, rows, emb, ids);
        },
        w.W);
    worst = std::max(worst, oracle::max_relative_error(grad, fd));
  }
  const double secs = seconds_since(t0);
  report(1, worst <= 1e-5 && secs < 5.0,
         fmt::format("seen classifier gradient max rel err {:.3e} (<= 1e-5), {:.2f}s (< 5s)", worst, secs));
}

void criterion2() {
  const auto t0 = Clock::now();
  Rng rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.index(5));
    const int S = 2 + static_cast<int>(rng.index(4));
    const int U = 1 + static_cast<int>(rng.index(3));
    const auto emb = random_embeddings(rng, S + U, d);
    const auto seen = range_ids(1, S);
    const auto unseen = range_ids(S + 1, S + U);
    std::map<ClassId, MixingCoefficients> mixers;
    for (const ClassId u : unseen) mixers[u] = solve_alpha(emb, seen, PsdMatrix::identity(d), emb.at(u), 0.1, u);
    const double lambda = 1e-2;
    const Matrix G = Matrix::Identity(S, S) + fixture::random_matrix(rng, S, S, 0.3);
    const auto obj = gzsl_objective_and_grads(G, emb, seen, unseen, mixers, lambda);
    const auto fd = oracle::finite_difference(
        [&](const Matrix& g) { return gzsl_objective_and_grads(g, emb, seen, unseen, mixers, lambda).value; }, G);
    worst = std::max(worst, oracle::max_relative_error(obj.grads, fd));
  }
  const double secs = seconds_since(t0);
  report(2, worst <= 1e-5 && secs < 5.0,
         fmt::format("gamma objective gradient max rel err {:.3e} (<= 1e-5), {:.2f}s (< 5s)", worst, secs));
}

void criterion3() {
  Rng rng(303);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.index(9));
    const int S = 2 + static_cast<int>(rng.index(7));
    const auto emb = random_embeddings(rng, S + 1, d);
    const auto seen = range_ids(1, S);
    const Matrix A = fixture::random_matrix(rng, d, d);
    const PsdMatrix M(A * A.transpose() / static_cast<double>(d));
    const double lambda = std::pow(10.0, -3.0 + 3.0 * rng.uniform());
    const auto mix = solve_alpha(emb, seen, M, emb.at(S + 1), lambda, S + 1);
    const auto ref = oracle::ridge_normal_equations(oracle::to_rows(emb.columns(seen)), oracle::to_rows(M.matrix()),
                                                    oracle::to_vec(emb.at(S + 1)), lambda);
    const Vector r = Eigen::Map<const Vector>(ref.data(), static_cast<Eigen::Index>(ref.size()));
    worst = std::max(worst, (mix.weights - r).norm() / std::max(r.norm(), 1e-300));
  }
  // One-hot recovery: e_u duplicates seen class 3.
  auto emb = random_embeddings(rng, 6, 8);
  std::map<ClassId, Vector> e = emb.entries();
  e[7] = e.at(3);
  const EmbeddingTable dup(e);
  const auto seen = range_ids(1, 6);
  const auto mix = solve_alpha(dup, seen, PsdMatrix::identity(8), dup.at(7), 1e-9, 7);
  Vector onehot = Vector::Zero(6);
  onehot[2] = 1.0;
  const double onehot_err = (mix.weights - onehot).cwiseAbs().maxCoeff();
  report(3, worst <= 1e-8 && onehot_err <= 1e-4,
         fmt::format("ridge vs normal-equation oracle rel err {:.3e} (<= 1e-8); one-hot max err {:.3e} (<= 1e-4)",
                     worst, onehot_err));
}

void criterion4() {
  const auto t0 = Clock::now();
  Rng rng(404);
  double asym = 0.0, min_eig = 1e300, budget = 0.0, gain = 1e300;
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 2 + trial % 4, classes = 3 + trial % 3;
    std::vector<Vector> capds;
    std::vector<ClassId> labels;
    for (int c = 0; c < classes; ++c) {
      Vector center = 2.0 * fixture::random_vector(rng, d);
      for (int n = 0; n < 6; ++n) {
        Vector x = center;
        for (int i = 0; i < d; ++i) x[i] += (i == 0 ? 2.0 : 0.3) * rng.normal();
        capds.push_back(x);
        labels.push_back(c + 1);
      }
    }
    const auto pairs = make_pair_sets(capds, labels, kDefaultPairBudget, rng.next());
    const auto model = learn_metric(pairs, {});
    const Matrix& M = model.M.matrix();
    asym = std::max(asym, (M - M.transpose()).cwiseAbs().maxCoeff());
    min_eig = std::min(min_eig, min_eigenvalue(M));
    budget = std::max(budget, std::abs(similar_pair_sum(model.M, pairs) - 1.0));
    // Initialization: identity rescaled onto the constraint.
    double total = 0.0;
    for (const auto& [i, j] : pairs.similar) total += (pairs.capds[i] - pairs.capds[j]).squaredNorm();
    const PsdMatrix M0(Matrix::Identity(d, d) / total);
    gain = std::min(gain, hard_min_objective(model.M, pairs) - hard_min_objective(M0, pairs));
  }
  const double secs = seconds_since(t0);
  report(4, asym <= 1e-10 && min_eig >= -1e-8 && budget <= 1e-6 && gain >= 0.0 && secs < 30.0,
         fmt::format("asym {:.1e}, min eig {:.3e} (>= -1e-8), budget dev {:.1e} (<= 1e-6), "
                     "min hard-min gain {:.3e} (>= 0), {:.2f}s (< 30s)",
                     asym, min_eig, budget, gain, secs));
}

void criterion5() {
  const auto t0 = Clock::now();
  const auto data = benchmark(Mode::zsl, 0);
  const auto model = train_model(data.features, data.embeddings, data.split, defaults(Mode::zsl, 0));
  const double top1 = zsl_top1(model, data);
  const double secs = seconds_since(t0);
  report(5, top1 >= 0.90 && secs < 60.0,
         fmt::format("synthetic ZSL top-1 {:.4f} (>= 0.90), {:.2f}s single-threaded (< 60s)", top1, secs));
}

void criterion6() {
  const auto data = benchmark(Mode::gzsl, 0);
  const auto model = train_model(data.features, data.embeddings, data.split, defaults(Mode::gzsl, 0));
  auto identity = model;
  identity.gzsl->gammas = Matrix::Identity(model.gzsl->gammas.rows(), model.gzsl->gammas.cols());
  const auto rows = test_rows(data);
  const auto truth = truth_of(data.features, rows);
  const auto trained_preds = predict_batch(model, Mode::gzsl, data.features, rows);
  const auto identity_preds = predict_batch(identity, Mode::gzsl, data.features, rows);
  const double hm_trained = *gzsl_report(labels_of(trained_preds), truth, data.split).hm;
  const double hm_identity = *gzsl_report(labels_of(identity_preds), truth, data.split).hm;
  bool unchanged = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Vector& x = data.features[rows[i]].x;
    for (const ClassId u : model.unseen_ids) {
      const Vector a = unseen_capd(model, x, u);
      const Vector b = unseen_capd(identity, x, u);
      unchanged = unchanged && a == b && trained_preds[i].scores.at(u) == identity_preds[i].scores.at(u);
    }
  }
  report(6, hm_trained >= hm_identity && unchanged,
         fmt::format("HM trained {:.4f} vs identity {:.4f} (>=); unseen CAPDs and scores bitwise unchanged: {}",
                     hm_trained, hm_identity, unchanged ? "yes" : "no"));
}

void criterion7() {
  double fsl_sum = 0.0, zsl_sum = 0.0;
  bool exact = true;
  const int seeds = 10;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto data = benchmark(Mode::fsl, static_cast<std::uint64_t>(seed));
    const auto model = train_model(data.features, data.embeddings, data.split,
                                   defaults(Mode::fsl, static_cast<std::uint64_t>(seed)));
    for (const auto& [u, p] : model.fsl->deltas) exact = exact && p.delta + p.delta_prime == 1.0;
    // Same model and test instances; ZSL ignores the shot classifiers.
    fsl_sum += zsl_top1(model, data, Mode::fsl);
    zsl_sum += zsl_top1(model, data, Mode::zsl);
  }
  const double fsl = fsl_sum / seeds, zsl = zsl_sum / seeds;
  report(7, fsl >= zsl && exact,
         fmt::format("mean 3-shot FSL top-1 {:.4f} vs ZSL {:.4f} over {} seeds (>=); delta + delta' == 1 exactly: {}",
                     fsl, zsl, seeds, exact ? "yes" : "no"));
}

void criterion8() {
  const double a = harmonic_mean(43.2, 61.7);
  const double b = harmonic_mean(25.1, 4.2);
  report(8, std::abs(a - 50.8) <= 0.05 && std::abs(b - 7.2) <= 0.05,
         fmt::format("HM(43.2, 61.7) = {:.4f} (50.8 +- 0.05), HM(25.1, 4.2) = {:.4f} (7.2 +- 0.05)", a, b));
}

void criterion9() {
  const auto data = benchmark(Mode::zsl, 0);
  auto full_cfg = defaults(Mode::zsl, 0);
  const auto full = train_model(data.features, data.embeddings, data.split, full_cfg);
  const auto S = full.seen_ids.size();
  bool in_range = true;
  double n_sum = 0.0;
  for (const ClassId u : full.unseen_ids) {
    const auto sel = auto_select_support(full.embeddings, full.seen_ids, full.metric.M, full.embeddings.at(u));
    in_range = in_range && sel.count >= 1 && sel.count <= S && sel.support.size() == sel.count;
    n_sum += static_cast<double>(sel.count);
  }
  const double mean_n = n_sum / static_cast<double>(full.unseen_ids.size());
  auto reduced_cfg = full_cfg;
  reduced_cfg.support = SupportMode::reduced_auto;
  const auto reduced = train_model(data.features, data.embeddings, data.split, reduced_cfg);
  const double full_top1 = zsl_top1(full, data);
  const double reduced_top1 = zsl_top1(reduced, data);
  report(9, in_range && mean_n <= 0.8 * static_cast<double>(S) && reduced_top1 >= full_top1 - 0.05,
         fmt::format("N in [1, S]: {}; mean N {:.2f} (<= {:.1f}); reduced top-1 {:.4f} vs full {:.4f} (within 5pp)",
                     in_range ? "yes" : "no", mean_n, 0.8 * static_cast<double>(S), reduced_top1, full_top1));
}

void criterion10() {
  std::vector<std::string> csv;
  for (const unsigned threads : {1u, 4u}) {
    const auto data = benchmark(Mode::gzsl, 10);
    const auto model = train_model(data.features, data.embeddings, data.split, defaults(Mode::gzsl, 10, threads));
    const auto rows = test_rows(data);
    const auto preds = predict_batch(model, Mode::gzsl, data.features, rows, threads);
    csv.push_back(format_predictions_csv(make_prediction_set(data.features, rows, preds)));
  }
  report(10, csv[0] == csv[1],
         fmt::format("prediction CSVs at 1 and 4 threads byte-identical: {} ({} bytes)",
                     csv[0] == csv[1] ? "yes" : "no", csv[0].size()));
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  guarded(1, criterion1);
  guarded(2, criterion2);
  guarded(3, criterion3);
  guarded(4, criterion4);
  guarded(5, criterion5);
  guarded(6, criterion6);
  guarded(7, criterion7);
  guarded(8, criterion8);
  guarded(9, criterion9);
  guarded(10, criterion10);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
