#include "pcmea/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "pcmea/error.hpp"
#include "pcmea/random.hpp"

namespace pcmea {

namespace {

// Skewed draw so a handful of relations dominate, like real KGs.
std::uint32_t skewed_index(Rng& rng, std::size_t n) {
  const double u = uniform_unit(rng);
  return static_cast<std::uint32_t>(std::min<std::size_t>(n - 1, static_cast<std::size_t>(u * u * n)));
}

ModalFeatureBundle side_features(const KnowledgeGraph& kg, const BowVocabulary& rel_vocab,
                                 const BowVocabulary& attr_vocab, Matrix visual,
                                 std::size_t feature_dim, std::uint64_t text_seed) {
  ModalFeatureBundle b;
  b.bow_rel = bow_features(kg, rel_vocab);
  b.bow_attr = bow_features(kg, attr_vocab);
  b.text_rel = stub_text_features(kg, TripleKind::Relation, feature_dim, text_seed);
  b.text_attr = stub_text_features(kg, TripleKind::Attribute, feature_dim, text_seed + 1);
  b.visual = std::move(visual);
  b.visual_present.assign(kg.num_entities(), true);
  return b;
}

}  // namespace

MMKGPair SyntheticBenchmark::make_pair(double train_fraction, std::uint64_t split_seed) const {
  auto [train, test] = split_seeds(gold, train_fraction, split_seed);
  MMKGPair pair{source, target, std::move(train), std::move(test)};
  pair.validate();
  return pair;
}

SyntheticBenchmark generate_synthetic_pair(std::size_t n_entities, std::size_t n_relations,
                                           std::size_t n_attributes, std::size_t feature_dim,
                                           double structure_noise, std::uint64_t rng_seed,
                                           const SyntheticOptions& options) {
  if (n_entities < 4) throw ArgumentError("synthetic pair needs at least 4 entities");
  if (n_relations < 1 || n_attributes < 1 || feature_dim < 1) {
    throw ArgumentError("relation, attribute and feature counts must be positive");
  }
  if (!(structure_noise >= 0.0 && structure_noise <= 1.0)) {
    throw ArgumentError("structure_noise must lie in [0, 1]");
  }

  Rng rng(rng_seed);
  SyntheticBenchmark out;
  auto& src = out.source;
  auto& tgt = out.target;
  for (std::size_t i = 0; i < n_entities; ++i) {
    src.entities.push_back("s" + std::to_string(i));
    tgt.entities.push_back("t" + std::to_string(i));
  }
  for (std::size_t r = 0; r < n_relations; ++r) src.relations.push_back("rel" + std::to_string(r));
  for (std::size_t a = 0; a < n_attributes; ++a) src.attributes.push_back("attr" + std::to_string(a));
  tgt.relations = src.relations;
  tgt.attributes = src.attributes;

  const auto n = static_cast<std::uint32_t>(n_entities);
  std::set<RelationTriple> seen;
  const std::size_t n_triples = options.triples_per_entity * n_entities;
  while (src.relation_triples.size() < n_triples) {
    const auto h = static_cast<EntityIndex>(uniform_index(rng, n));
    const auto t = static_cast<EntityIndex>(uniform_index(rng, n));
    if (h == t) continue;
    const RelationTriple triple{h, skewed_index(rng, n_relations), t};
    if (seen.insert(triple).second) src.relation_triples.push_back(triple);
  }
  for (EntityIndex e = 0; e < n; ++e) {
    const auto k = 1 + uniform_index(rng, options.max_attributes_per_entity);
    std::set<std::uint32_t> attrs;
    while (attrs.size() < std::min<std::size_t>(k, n_attributes)) attrs.insert(skewed_index(rng, n_attributes));
    for (auto a : attrs) src.attribute_triples.push_back({e, a, "v" + std::to_string(e) + "_" + std::to_string(a)});
  }

  out.permutation.resize(n_entities);
  std::iota(out.permutation.begin(), out.permutation.end(), EntityIndex{0});
  shuffle(std::span<EntityIndex>(out.permutation), rng);
  const auto& perm = out.permutation;

  for (const auto& t : src.relation_triples) {
    RelationTriple mapped{perm[t.head], t.relation, perm[t.tail]};
    if (uniform_unit(rng) < structure_noise) {
      EntityIndex tail;
      do {
        tail = static_cast<EntityIndex>(uniform_index(rng, n));
      } while (tail == mapped.head);
      mapped.tail = tail;
    }
    tgt.relation_triples.push_back(mapped);
  }
  std::sort(tgt.relation_triples.begin(), tgt.relation_triples.end());
  for (const auto& t : src.attribute_triples) {
    AttributeTriple mapped{perm[t.entity], t.attribute, t.value};
    if (uniform_unit(rng) < structure_noise) {
      mapped.attribute = static_cast<std::uint32_t>(uniform_index(rng, n_attributes));
    }
    tgt.attribute_triples.push_back(std::move(mapped));
  }
  std::stable_sort(tgt.attribute_triples.begin(), tgt.attribute_triples.end(),
                   [](const AttributeTriple& a, const AttributeTriple& b) { return a.entity < b.entity; });

  out.gold.role = SeedRole::Train;
  for (EntityIndex i = 0; i < n; ++i) out.gold.pairs.push_back({i, perm[i]});

  const auto d = static_cast<Eigen::Index>(feature_dim);
  const auto noisy = static_cast<Eigen::Index>(std::llround(options.noisy_channel_fraction * d));
  Matrix src_visual(static_cast<Eigen::Index>(n_entities), d);
  for (Eigen::Index i = 0; i < src_visual.rows(); ++i) {
    for (Eigen::Index k = 0; k < d; ++k) src_visual(i, k) = standard_normal(rng);
  }
  Matrix tgt_visual(static_cast<Eigen::Index>(n_entities), d);
  for (Eigen::Index i = 0; i < src_visual.rows(); ++i) {
    for (Eigen::Index k = 0; k < d; ++k) {
      const double gain = k < noisy ? options.noisy_channel_gain : 1.0;
      const double eps = standard_normal(rng);
      tgt_visual(perm[static_cast<std::size_t>(i)], k) = src_visual(i, k) + structure_noise * gain * eps;
    }
  }

  MMKGPair vocab_pair{src, tgt, {}, {}};
  const auto rel_vocab = build_bow_vocab(vocab_pair, TripleKind::Relation, n_relations);
  const auto attr_vocab = build_bow_vocab(vocab_pair, TripleKind::Attribute, n_attributes);
  const std::uint64_t text_seed = rng_seed ^ 0x5EEDULL;
  out.source_features = side_features(src, rel_vocab, attr_vocab, std::move(src_visual), feature_dim, text_seed);
  out.target_features = side_features(tgt, rel_vocab, attr_vocab, std::move(tgt_visual), feature_dim, text_seed);
  return out;
}

}  // namespace pcmea
