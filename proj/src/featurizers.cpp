#include "pcmea/featurizers.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <unordered_map>

#include "pcmea/error.hpp"
#include "pcmea/random.hpp"
#include "text_io.hpp"

namespace pcmea {

namespace {

template <typename Number>
bool parse_number(std::string_view token, Number& out) {
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end;
}

void count_names(const KnowledgeGraph& kg, TripleKind kind,
                 std::unordered_map<std::string, std::size_t>& counts) {
  if (kind == TripleKind::Relation) {
    for (const auto& t : kg.relation_triples) ++counts[kg.relations[t.relation]];
  } else {
    for (const auto& t : kg.attribute_triples) ++counts[kg.attributes[t.attribute]];
  }
}

}  // namespace

void ModalFeatureBundle::validate(std::size_t expected_entities) const {
  const auto n = static_cast<Eigen::Index>(expected_entities);
  for (const Matrix* m : {&bow_rel, &bow_attr, &text_rel, &text_attr, &visual}) {
    if (m->rows() != n) {
      throw FormatError("feature matrix has " + std::to_string(m->rows()) + " rows, expected " +
                        std::to_string(expected_entities));
    }
  }
  if (visual_present.size() != expected_entities) {
    throw FormatError("visual presence flags do not cover every entity");
  }
  for (const Matrix* m : {&text_rel, &text_attr, &visual}) {
    if (!m->allFinite()) throw ValidationError("non-finite text or visual feature");
  }
}

BowVocabulary build_bow_vocab(const MMKGPair& pair, TripleKind kind, std::size_t n) {
  if (n < 1) throw ArgumentError("vocabulary size must be at least 1");
  std::unordered_map<std::string, std::size_t> counts;
  count_names(pair.source, kind, counts);
  count_names(pair.target, kind, counts);

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > n) ranked.resize(n);

  BowVocabulary vocab;
  vocab.kind = kind;
  vocab.capacity = n;
  vocab.ids.reserve(ranked.size());
  for (auto& [name, count] : ranked) vocab.ids.push_back(std::move(name));
  return vocab;
}

Matrix bow_features(const KnowledgeGraph& kg, const BowVocabulary& vocab) {
  std::unordered_map<std::string, Eigen::Index> column;
  for (std::size_t k = 0; k < vocab.ids.size(); ++k) {
    column.emplace(vocab.ids[k], static_cast<Eigen::Index>(k));
  }
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(kg.num_entities()),
                            static_cast<Eigen::Index>(vocab.ids.size()));
  if (vocab.kind == TripleKind::Relation) {
    std::vector<Eigen::Index> col_of(kg.relations.size(), -1);
    for (std::size_t r = 0; r < kg.relations.size(); ++r) {
      if (auto it = column.find(kg.relations[r]); it != column.end()) col_of[r] = it->second;
    }
    for (const auto& t : kg.relation_triples) {
      const auto c = col_of[t.relation];
      if (c < 0) continue;
      out(t.head, c) += 1.0;
      out(t.tail, c) += 1.0;
    }
  } else {
    std::vector<Eigen::Index> col_of(kg.attributes.size(), -1);
    for (std::size_t a = 0; a < kg.attributes.size(); ++a) {
      if (auto it = column.find(kg.attributes[a]); it != column.end()) col_of[a] = it->second;
    }
    for (const auto& t : kg.attribute_triples) {
      const auto c = col_of[t.attribute];
      if (c >= 0) out(t.entity, c) += 1.0;
    }
  }
  return out;
}

std::string serialize_triples(const KnowledgeGraph& kg, EntityIndex entity, TripleKind kind) {
  if (entity >= kg.num_entities()) throw ArgumentError("entity index out of range");
  std::set<std::string> names;
  if (kind == TripleKind::Relation) {
    for (const auto& t : kg.relation_triples) {
      if (t.head == entity || t.tail == entity) names.insert(kg.relations[t.relation]);
    }
  } else {
    for (const auto& t : kg.attribute_triples) {
      if (t.entity == entity) names.insert(kg.attributes[t.attribute]);
    }
  }
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out += ' ';
    out += n;
  }
  return out;
}

std::size_t feature_file_dim(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::string line;
  if (!detail::next_line(in, line)) throw FormatError(path.string() + ": missing `count dim` header");
  const auto header = detail::split(line, ' ');
  std::size_t count = 0, dim = 0;
  if (header.size() != 2 || !parse_number(header[0], count) || !parse_number(header[1], dim)) {
    throw ParseError(path.string(), 1, "header must be `count dim`");
  }
  return dim;
}

FeatureMap load_feature_file(const std::filesystem::path& path, std::size_t expected_dim) {
  const auto file = path.string();
  auto in = detail::open_input(path);
  std::string line;
  if (!detail::next_line(in, line)) throw FormatError(file + ": missing `count dim` header");
  const auto header = detail::split(line, ' ');
  std::size_t count = 0, dim = 0;
  if (header.size() != 2 || !parse_number(header[0], count) || !parse_number(header[1], dim)) {
    throw ParseError(file, 1, "header must be `count dim`");
  }
  if (dim != expected_dim) {
    throw FormatError(file + ": feature dimension " + std::to_string(dim) + " does not match expected " +
                      std::to_string(expected_dim));
  }

  FeatureMap features;
  std::size_t line_no = 1;
  while (detail::next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split(line, ' ');
    if (fields.size() != dim + 1) {
      throw FormatError(file + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim + 1) +
                        " fields, got " + std::to_string(fields.size()));
    }
    EntityIndex id = 0;
    if (!parse_number(fields[0], id)) throw ParseError(file, line_no, "bad entity id");
    Vector v(static_cast<Eigen::Index>(dim));
    for (std::size_t k = 0; k < dim; ++k) {
      double x = 0.0;
      if (!parse_number(fields[k + 1], x)) throw ParseError(file, line_no, "bad float");
      if (!std::isfinite(x)) {
        throw ValidationError(file + ":" + std::to_string(line_no) + ": non-finite feature value");
      }
      v(static_cast<Eigen::Index>(k)) = x;
    }
    if (!features.emplace(id, std::move(v)).second) {
      throw ValidationError(file + ":" + std::to_string(line_no) + ": duplicate entity id " +
                            std::to_string(id));
    }
  }
  if (features.size() != count) {
    throw FormatError(file + ": header announces " + std::to_string(count) + " rows, found " +
                      std::to_string(features.size()));
  }
  return features;
}

void write_feature_file(const FeatureMap& features, std::size_t dim,
                        const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << features.size() << ' ' << dim << '\n';
  char buf[64];
  for (const auto& [id, v] : features) {
    if (static_cast<std::size_t>(v.size()) != dim) throw FormatError("feature row has wrong dimension");
    out << id;
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v(k));
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
  detail::finish_output(out, path);
}

Vector stub_text_encoder(const std::string& text, std::size_t dim, std::uint64_t rng_seed) {
  if (dim < 1) throw ArgumentError("encoder dimension must be at least 1");
  Rng rng(fnv1a(text) ^ (rng_seed * 0x9E3779B97F4A7C15ULL));
  Vector v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = standard_normal(rng);
  const double norm = v.norm();
  if (norm > 0.0) {
    v /= norm;
  } else {
    v.setZero();
    v(0) = 1.0;
  }
  return v;
}

Matrix stub_text_features(const KnowledgeGraph& kg, TripleKind kind, std::size_t dim,
                          std::uint64_t rng_seed) {
  Matrix out(static_cast<Eigen::Index>(kg.num_entities()), static_cast<Eigen::Index>(dim));
  for (std::size_t e = 0; e < kg.num_entities(); ++e) {
    out.row(static_cast<Eigen::Index>(e)) =
        stub_text_encoder(serialize_triples(kg, static_cast<EntityIndex>(e), kind), dim, rng_seed)
            .transpose();
  }
  return out;
}

ImputedFeatures impute_missing_visual(const FeatureMap& features, std::size_t num_entities,
                                      std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  ImputedFeatures out;
  out.values = Matrix::Zero(static_cast<Eigen::Index>(num_entities), d);
  out.present.assign(num_entities, false);
  Vector mean = Vector::Zero(d);
  std::size_t n_present = 0;
  for (const auto& [id, v] : features) {
    if (id >= num_entities) {
      throw ValidationError("visual feature for entity " + std::to_string(id) + " out of range");
    }
    if (v.size() != d) throw FormatError("visual feature row has wrong dimension");
    out.values.row(id) = v.transpose();
    out.present[id] = true;
    mean += v;
    ++n_present;
  }
  if (n_present > 0) mean /= static_cast<double>(n_present);
  for (std::size_t e = 0; e < num_entities; ++e) {
    if (!out.present[e]) out.values.row(static_cast<Eigen::Index>(e)) = mean.transpose();
  }
  return out;
}

Matrix dense_features(const FeatureMap& features, std::size_t num_entities, std::size_t dim) {
  Matrix out(static_cast<Eigen::Index>(num_entities), static_cast<Eigen::Index>(dim));
  if (features.size() != num_entities) {
    throw ValidationError("feature file covers " + std::to_string(features.size()) + " of " +
                          std::to_string(num_entities) + " entities");
  }
  for (const auto& [id, v] : features) {
    if (id >= num_entities) throw ValidationError("feature entity id out of range");
    out.row(id) = v.transpose();
  }
  return out;
}

}  // namespace pcmea
