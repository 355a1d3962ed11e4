#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pcmea/kg.hpp"
#include "pcmea/matrix.hpp"

namespace pcmea {

enum class TripleKind : std::uint8_t { Relation, Attribute };

/// Top-N relation or attribute names ranked by triple frequency over both
/// graphs, most frequent first, ties broken lexicographically.
struct BowVocabulary {
  TripleKind kind = TripleKind::Relation;
  std::vector<std::string> ids;
  std::size_t capacity = 0;
};

/// Raw per-entity inputs of one graph. Every matrix has one row per entity.
struct ModalFeatureBundle {
  Matrix bow_rel;
  Matrix bow_attr;
  Matrix text_rel;
  Matrix text_attr;
  Matrix visual;
  std::vector<bool> visual_present;

  std::size_t num_entities() const { return static_cast<std::size_t>(visual.rows()); }
  /// Row counts agree and text/visual entries are finite.
  void validate(std::size_t expected_entities) const;
};

BowVocabulary build_bow_vocab(const MMKGPair& pair, TripleKind kind, std::size_t n);

/// Count matrix: entry (e, k) counts vocab name k among e's triples (head or
/// tail side for relations, subject side for attributes).
Matrix bow_features(const KnowledgeGraph& kg, const BowVocabulary& vocab);

/// Sorted, deduplicated names attached to the entity, joined by spaces.
std::string serialize_triples(const KnowledgeGraph& kg, EntityIndex entity, TripleKind kind);

using FeatureMap = std::map<EntityIndex, Vector>;

/// Reads a `count dim` header followed by `id f1 .. fdim` rows.
FeatureMap load_feature_file(const std::filesystem::path& path, std::size_t expected_dim);
/// Dimension announced by a feature file header.
std::size_t feature_file_dim(const std::filesystem::path& path);
void write_feature_file(const FeatureMap& features, std::size_t dim,
                        const std::filesystem::path& path);

/// Deterministic unit-norm stand-in for a language-model sentence encoder.
Vector stub_text_encoder(const std::string& text, std::size_t dim, std::uint64_t rng_seed);

/// Text features for every entity of `kg` from the stub encoder.
Matrix stub_text_features(const KnowledgeGraph& kg, TripleKind kind, std::size_t dim,
                          std::uint64_t rng_seed);

struct ImputedFeatures {
  Matrix values;
  std::vector<bool> present;
};

/// Fills entities absent from `features` with the mean of the present rows
/// (zeros if none are present).
ImputedFeatures impute_missing_visual(const FeatureMap& features, std::size_t num_entities,
                                      std::size_t dim);

/// Dense matrix from a feature map that must cover every entity.
Matrix dense_features(const FeatureMap& features, std::size_t num_entities, std::size_t dim);

}  // namespace pcmea
