#include "pcmea/dataset.hpp"

#include "pcmea/error.hpp"

namespace pcmea {

namespace {

constexpr std::uint64_t kTextSalt = 0x7E47ULL;

FeatureMap to_map(const Matrix& m) {
  FeatureMap out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.emplace(static_cast<EntityIndex>(i), m.row(i).transpose());
  return out;
}

void write_side(const KnowledgeGraph& kg, const ModalFeatureBundle& f, const std::filesystem::path& dir) {
  write_kg(kg, dir / "rel_triples.tsv", dir / "attr_triples.tsv", dir / "entities.txt");
  write_feature_file(to_map(f.text_rel), static_cast<std::size_t>(f.text_rel.cols()), dir / "text_rel.feat");
  write_feature_file(to_map(f.text_attr), static_cast<std::size_t>(f.text_attr.cols()), dir / "text_attr.feat");
  FeatureMap visual;
  for (Eigen::Index i = 0; i < f.visual.rows(); ++i) {
    if (f.visual_present.empty() || f.visual_present[static_cast<std::size_t>(i)]) {
      visual.emplace(static_cast<EntityIndex>(i), f.visual.row(i).transpose());
    }
  }
  write_feature_file(visual, static_cast<std::size_t>(f.visual.cols()), dir / "visual.feat");
}

KnowledgeGraph read_side(const std::filesystem::path& dir) {
  return load_kg(dir / "rel_triples.tsv", dir / "attr_triples.tsv", dir / "entities.txt");
}

Matrix text_features(const KnowledgeGraph& kg, TripleKind kind, const std::filesystem::path& file,
                     const TrainConfig& config) {
  if (std::filesystem::exists(file)) {
    return dense_features(load_feature_file(file, feature_file_dim(file)), kg.num_entities(),
                          feature_file_dim(file));
  }
  return stub_text_features(kg, kind, config.text_dim,
                            config.rng_seed ^ kTextSalt ^ (kind == TripleKind::Attribute ? 1ULL : 0ULL));
}

ModalFeatureBundle side_features(const KnowledgeGraph& kg, const BowVocabulary& rel, const BowVocabulary& attr,
                                 const std::filesystem::path& dir, const TrainConfig& config,
                                 std::size_t visual_dim) {
  ModalFeatureBundle b;
  b.bow_rel = bow_features(kg, rel);
  b.bow_attr = bow_features(kg, attr);
  b.text_rel = text_features(kg, TripleKind::Relation, dir / "text_rel.feat", config);
  b.text_attr = text_features(kg, TripleKind::Attribute, dir / "text_attr.feat", config);
  const auto visual_file = dir / "visual.feat";
  FeatureMap visual;
  if (std::filesystem::exists(visual_file)) visual = load_feature_file(visual_file, visual_dim);
  auto imputed = impute_missing_visual(visual, kg.num_entities(), visual_dim);
  b.visual = std::move(imputed.values);
  b.visual_present = std::move(imputed.present);
  return b;
}

std::size_t visual_dim_of(const std::filesystem::path& a, const std::filesystem::path& b) {
  const bool has_a = std::filesystem::exists(a), has_b = std::filesystem::exists(b);
  if (has_a && has_b && feature_file_dim(a) != feature_file_dim(b)) {
    throw FormatError("source and target visual features differ in dimension");
  }
  if (has_a) return feature_file_dim(a);
  if (has_b) return feature_file_dim(b);
  return 1;
}

}  // namespace

void write_dataset(const SyntheticBenchmark& bench, const std::filesystem::path& dir) {
  write_side(bench.source, bench.source_features, dir / "source");
  write_side(bench.target, bench.target_features, dir / "target");
  write_seeds(bench.gold, bench.source, bench.target, dir / "seeds.tsv");
}

TrainData load_dataset(const std::filesystem::path& dir, const TrainConfig& config) {
  if (!std::filesystem::is_directory(dir)) throw IoError("dataset directory '" + dir.string() + "' not found");
  MMKGPair pair;
  pair.source = read_side(dir / "source");
  pair.target = read_side(dir / "target");
  if (std::filesystem::exists(dir / "train_seeds.tsv") && std::filesystem::exists(dir / "test_seeds.tsv")) {
    pair.train_seeds = load_seeds(dir / "train_seeds.tsv", pair.source, pair.target);
    pair.test_seeds = load_seeds(dir / "test_seeds.tsv", pair.source, pair.target);
    pair.train_seeds.role = SeedRole::Train;
    pair.test_seeds.role = SeedRole::Test;
  } else {
    const auto all = load_seeds(dir / "seeds.tsv", pair.source, pair.target);
    auto [train, test] = split_seeds(all, config.train_fraction, config.rng_seed);
    pair.train_seeds = std::move(train);
    pair.test_seeds = std::move(test);
  }
  pair.validate();

  const auto rel = build_bow_vocab(pair, TripleKind::Relation, config.bow_rel_size);
  const auto attr = build_bow_vocab(pair, TripleKind::Attribute, config.bow_attr_size);
  const auto vdim = visual_dim_of(dir / "source" / "visual.feat", dir / "target" / "visual.feat");
  auto src = side_features(pair.source, rel, attr, dir / "source", config, vdim);
  auto tgt = side_features(pair.target, rel, attr, dir / "target", config, vdim);
  return TrainData::build(std::move(pair), std::move(src), std::move(tgt));
}

}  // namespace pcmea
