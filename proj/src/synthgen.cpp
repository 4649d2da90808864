#include "capd/synthgen.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "capd/error.hpp"
#include "capd/random.hpp"

namespace capd {

SynthData generate(const SynthConfig& cfg) {
  if (cfg.seen < 1 || cfg.unseen < 1 || cfg.seen + cfg.unseen < 3) {
    throw ValidationError("synthetic config needs S, U >= 1 and S + U >= 3");
  }
  if (cfg.semantic_dim < 1 || cfg.feature_dim < 1 || cfg.samples_per_class < 1) {
    throw ValidationError("synthetic dimensions and sample counts must be positive");
  }
  if (!(cfg.noise_sigma >= 0.0)) {
    throw ValidationError("noise sigma must be nonnegative");
  }
  if (cfg.feature_dim < cfg.semantic_dim) {
    spdlog::warn("synthetic config: feature dim {} < semantic dim {}", cfg.feature_dim,
                 cfg.semantic_dim);
  }
  const int classes = cfg.seen + cfg.unseen;
  const Eigen::Index d = cfg.semantic_dim;
  const Eigen::Index k = cfg.feature_dim;
  auto rng = Rng::for_stream(cfg.seed, 0, stream::kSynth);

  std::map<ClassId, Vector> entries;
  for (ClassId c = 1; c <= classes; ++c) {
    Vector e(d);
    do {
      for (Eigen::Index i = 0; i < d; ++i) {
        e[i] = rng.normal();
      }
    } while (e.norm() == 0.0);
    entries.emplace(c, e / e.norm());
  }

  Matrix G(k, d);
  const double g_std = 1.0 / std::sqrt(static_cast<double>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < k; ++i) {
      G(i, j) = g_std * rng.normal();
    }
  }

  std::vector<Instance> instances;
  instances.reserve(static_cast<std::size_t>(classes * cfg.samples_per_class));
  for (ClassId c = 1; c <= classes; ++c) {
    const Vector mean = G * entries.at(c);
    for (int n = 0; n < cfg.samples_per_class; ++n) {
      Instance inst;
      inst.id = fmt::format("c{:03}_{:04}", c, n);
      inst.class_id = c;
      inst.x = mean;
      if (cfg.noise_sigma > 0.0) {
        for (Eigen::Index i = 0; i < k; ++i) {
          inst.x[i] += cfg.noise_sigma * rng.normal();
        }
      }
      instances.push_back(std::move(inst));
    }
  }

  SplitConfig split_cfg;
  for (ClassId c = 1; c <= classes; ++c) {
    (c <= cfg.seen ? split_cfg.seen : split_cfg.unseen).push_back(c);
  }
  split_cfg.mode = cfg.mode;
  split_cfg.shots = cfg.mode == Mode::osl ? 1 : cfg.shots;
  split_cfg.seed = cfg.seed;

  SynthData out{FeatureTable(std::move(instances)), EmbeddingTable(std::move(entries)), split_cfg,
                {}, std::move(G)};
  out.split = make_split(out.features, out.embeddings, out.split_config, cfg.seed);
  return out;
}

SynthConfig synth_preset(const std::string& name) {
  SynthConfig cfg;
  if (name == "small") {
    return cfg;
  }
  if (name == "tiny") {
    cfg.seen = 4;
    cfg.unseen = 3;
    cfg.semantic_dim = 5;
    cfg.feature_dim = 8;
    cfg.samples_per_class = 12;
    cfg.noise_sigma = 0.05;
    return cfg;
  }
  throw ValidationError(fmt::format("unknown synthetic preset '{}' (expected small|tiny)", name));
}

}  // namespace capd
