#pragma once

#include <cstdint>
#include <vector>

#include "pcmea/featurizers.hpp"
#include "pcmea/kg.hpp"

namespace pcmea {

/// A generated source/target pair with its ground-truth alignment.
struct SyntheticBenchmark {
  KnowledgeGraph source;
  KnowledgeGraph target;
  /// Full ground truth: (i, permutation[i]) for every source entity i.
  SeedAlignmentSet gold;
  std::vector<EntityIndex> permutation;
  ModalFeatureBundle source_features;
  ModalFeatureBundle target_features;

  /// Splits the ground truth into train/test seeds and packages the graphs.
  MMKGPair make_pair(double train_fraction, std::uint64_t split_seed) const;
};

struct SyntheticOptions {
  std::size_t triples_per_entity = 3;
  std::size_t max_attributes_per_entity = 4;
  /// Visual channels [0, noisy_channels) receive noise amplified by
  /// `noisy_channel_gain`; the rest receive plain `structure_noise` noise.
  double noisy_channel_fraction = 0.5;
  double noisy_channel_gain = 15.0;
};

/// Target graph = entity-permuted copy of the source with a `structure_noise`
/// fraction of relation and attribute triples rewired, and visual features
/// perturbed by additive Gaussian noise scaled by `structure_noise`.
SyntheticBenchmark generate_synthetic_pair(std::size_t n_entities, std::size_t n_relations,
                                           std::size_t n_attributes, std::size_t feature_dim,
                                           double structure_noise, std::uint64_t rng_seed,
                                           const SyntheticOptions& options = {});

}  // namespace pcmea
