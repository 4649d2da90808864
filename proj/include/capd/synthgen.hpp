#pragma once

#include <cstdint>
#include <string>

#include "capd/data_model.hpp"

namespace capd {

/// Planted linear benchmark: features are a fixed random linear map of the
/// class embedding plus isotropic Gaussian noise.
struct SynthConfig {
  int seen = 20;
  int unseen = 5;
  int semantic_dim = 10;
  int feature_dim = 30;
  int samples_per_class = 50;
  double noise_sigma = 0.01;
  std::uint64_t seed = 0;
  Mode mode = Mode::zsl;
  int shots = 3;
};

struct SynthData {
  FeatureTable features;
  EmbeddingTable embeddings;
  SplitConfig split_config;
  ExperimentSplit split;
  Matrix generator;  // k x d map from embeddings to feature means
};

/// Class ids run 1..S+U; the last U are unseen. Embeddings are uniform on the
/// unit sphere, the map has N(0, 1/d) entries, and x = G e_class + noise.
SynthData generate(const SynthConfig& cfg);

// Named configurations: "small" is the S=20/U=5/d=10/k=30 benchmark, "tiny" a
// quick S=4/U=3 smoke set.
SynthConfig synth_preset(const std::string& name);

}  // namespace capd
