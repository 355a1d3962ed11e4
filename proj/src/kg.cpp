#include "pcmea/kg.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "pcmea/error.hpp"
#include "pcmea/random.hpp"
#include "text_io.hpp"

namespace pcmea {

namespace {

template <typename Names>
void check_unique(const Names& names, const char* what) {
  std::unordered_set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) {
      throw ValidationError(std::string("duplicate ") + what + " name '" + n + "'");
    }
  }
}

// Vocabulary that assigns indices in first-appearance order.
struct Interner {
  std::vector<std::string>& names;
  std::unordered_map<std::string, std::uint32_t> index;

  std::uint32_t operator()(std::string_view name) {
    auto [it, inserted] = index.try_emplace(std::string(name), static_cast<std::uint32_t>(names.size()));
    if (inserted) names.emplace_back(name);
    return it->second;
  }
};

class EntityResolver {
 public:
  EntityResolver(KnowledgeGraph& kg, bool fixed) : kg_(kg), fixed_(fixed) {
    for (std::size_t i = 0; i < kg.entities.size(); ++i) {
      index_.emplace(kg.entities[i], static_cast<EntityIndex>(i));
    }
  }

  EntityIndex operator()(std::string_view name, const std::string& file, std::size_t line) {
    if (auto it = index_.find(std::string(name)); it != index_.end()) return it->second;
    if (fixed_) {
      throw ValidationError(file + ":" + std::to_string(line) + ": unknown entity '" +
                            std::string(name) + "'");
    }
    const auto idx = static_cast<EntityIndex>(kg_.entities.size());
    kg_.entities.emplace_back(name);
    index_.emplace(std::string(name), idx);
    return idx;
  }

 private:
  KnowledgeGraph& kg_;
  bool fixed_;
  std::unordered_map<std::string, EntityIndex> index_;
};

}  // namespace

void KnowledgeGraph::validate() const {
  check_unique(entities, "entity");
  check_unique(relations, "relation");
  check_unique(attributes, "attribute");
  const auto n = entities.size();
  for (const auto& t : relation_triples) {
    if (t.head >= n || t.tail >= n) throw ValidationError("relation triple endpoint out of range");
    if (t.relation >= relations.size()) throw ValidationError("relation index out of range");
  }
  for (const auto& t : attribute_triples) {
    if (t.entity >= n) throw ValidationError("attribute triple entity out of range");
    if (t.attribute >= attributes.size()) throw ValidationError("attribute index out of range");
  }
}

std::unordered_map<std::string, EntityIndex> KnowledgeGraph::entity_index() const {
  std::unordered_map<std::string, EntityIndex> out;
  out.reserve(entities.size());
  for (std::size_t i = 0; i < entities.size(); ++i) out.emplace(entities[i], static_cast<EntityIndex>(i));
  return out;
}

void SeedAlignmentSet::validate() const {
  std::unordered_set<EntityIndex> src, tgt;
  for (const auto& p : pairs) {
    if (!src.insert(p.source).second) {
      throw ValidationError("seed source entity " + std::to_string(p.source) + " appears twice");
    }
    if (!tgt.insert(p.target).second) {
      throw ValidationError("seed target entity " + std::to_string(p.target) + " appears twice");
    }
  }
}

void MMKGPair::validate() const {
  source.validate();
  target.validate();
  train_seeds.validate();
  test_seeds.validate();
  std::unordered_set<EntityIndex> src, tgt;
  for (const auto* set : {&train_seeds, &test_seeds}) {
    for (const auto& p : set->pairs) {
      if (p.source >= source.num_entities() || p.target >= target.num_entities()) {
        throw ValidationError("seed pair references an entity outside its graph");
      }
    }
  }
  for (const auto& p : train_seeds.pairs) {
    src.insert(p.source);
    tgt.insert(p.target);
  }
  for (const auto& p : test_seeds.pairs) {
    if (src.contains(p.source) || tgt.contains(p.target)) {
      throw ValidationError("train and test seeds overlap");
    }
  }
}

std::size_t Adjacency::num_edges() const {
  std::size_t n = 0;
  for (const auto& list : neighbors) n += list.size();
  return n;
}

KnowledgeGraph load_kg(const std::filesystem::path& triples_path,
                       const std::filesystem::path& attr_path,
                       const std::filesystem::path& entity_list_path) {
  KnowledgeGraph kg;
  std::string line;
  const bool fixed = !entity_list_path.empty();
  if (fixed) {
    auto in = detail::open_input(entity_list_path);
    while (detail::next_line(in, line)) {
      if (line.empty()) continue;
      kg.entities.push_back(line);
    }
    check_unique(kg.entities, "entity");
  }

  EntityResolver resolve(kg, fixed);
  Interner relations{kg.relations, {}};
  Interner attributes{kg.attributes, {}};

  {
    const auto file = triples_path.string();
    auto in = detail::open_input(triples_path);
    std::size_t line_no = 0;
    while (detail::next_line(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto fields = detail::split(line, '\t');
      if (fields.size() != 3) {
        throw ParseError(file, line_no,
                         "expected 3 tab-separated fields, got " + std::to_string(fields.size()));
      }
      if (fields[0].empty() || fields[1].empty() || fields[2].empty()) {
        throw ParseError(file, line_no, "empty field");
      }
      const auto h = resolve(fields[0], file, line_no);
      const auto r = relations(fields[1]);
      const auto t = resolve(fields[2], file, line_no);
      kg.relation_triples.push_back({h, r, t});
    }
  }
  {
    const auto file = attr_path.string();
    auto in = detail::open_input(attr_path);
    std::size_t line_no = 0;
    while (detail::next_line(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto first = line.find('\t');
      const auto second = first == std::string::npos ? first : line.find('\t', first + 1);
      if (second == std::string::npos) {
        throw ParseError(file, line_no, "expected entity<TAB>attribute<TAB>value");
      }
      const std::string_view view(line);
      const auto ent = view.substr(0, first);
      const auto attr = view.substr(first + 1, second - first - 1);
      if (ent.empty() || attr.empty()) throw ParseError(file, line_no, "empty field");
      const auto e = resolve(ent, file, line_no);
      kg.attribute_triples.push_back({e, attributes(attr), std::string(view.substr(second + 1))});
    }
  }
  return kg;
}

void write_kg(const KnowledgeGraph& kg, const std::filesystem::path& triples_path,
              const std::filesystem::path& attr_path,
              const std::filesystem::path& entity_list_path) {
  kg.validate();
  {
    auto out = detail::open_output(entity_list_path);
    for (const auto& e : kg.entities) out << e << '\n';
    detail::finish_output(out, entity_list_path);
  }
  {
    auto out = detail::open_output(triples_path);
    for (const auto& t : kg.relation_triples) {
      out << kg.entities[t.head] << '\t' << kg.relations[t.relation] << '\t' << kg.entities[t.tail]
          << '\n';
    }
    detail::finish_output(out, triples_path);
  }
  {
    auto out = detail::open_output(attr_path);
    for (const auto& t : kg.attribute_triples) {
      out << kg.entities[t.entity] << '\t' << kg.attributes[t.attribute] << '\t' << t.value << '\n';
    }
    detail::finish_output(out, attr_path);
  }
}

SeedAlignmentSet load_seeds(const std::filesystem::path& path, const KnowledgeGraph& source,
                            const KnowledgeGraph& target) {
  const auto src_index = source.entity_index();
  const auto tgt_index = target.entity_index();
  const auto file = path.string();
  auto in = detail::open_input(path);
  SeedAlignmentSet seeds;
  std::string line;
  std::size_t line_no = 0;
  while (detail::next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 2) {
      throw ParseError(file, line_no, "expected source<TAB>target");
    }
    const auto s = src_index.find(std::string(fields[0]));
    const auto t = tgt_index.find(std::string(fields[1]));
    if (s == src_index.end()) {
      throw ValidationError(file + ":" + std::to_string(line_no) + ": unknown source entity '" +
                            std::string(fields[0]) + "'");
    }
    if (t == tgt_index.end()) {
      throw ValidationError(file + ":" + std::to_string(line_no) + ": unknown target entity '" +
                            std::string(fields[1]) + "'");
    }
    seeds.pairs.push_back({s->second, t->second});
  }
  seeds.validate();
  return seeds;
}

void write_seeds(const SeedAlignmentSet& seeds, const KnowledgeGraph& source,
                 const KnowledgeGraph& target, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (const auto& p : seeds.pairs) {
    out << source.entities.at(p.source) << '\t' << target.entities.at(p.target) << '\n';
  }
  detail::finish_output(out, path);
}

std::pair<SeedAlignmentSet, SeedAlignmentSet> split_seeds(const SeedAlignmentSet& seeds,
                                                          double train_fraction,
                                                          std::uint64_t rng_seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ArgumentError("train_fraction must lie in (0, 1)");
  }
  if (seeds.size() < 2) throw ArgumentError("need at least two seeds to split");
  std::vector<SeedPair> pairs = seeds.pairs;
  std::sort(pairs.begin(), pairs.end());
  Rng rng(rng_seed);
  shuffle(std::span<SeedPair>(pairs), rng);
  const auto n_train =
      static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(pairs.size())));

  SeedAlignmentSet train, test;
  train.role = SeedRole::Train;
  test.role = SeedRole::Test;
  train.pairs.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(n_train));
  test.pairs.assign(pairs.begin() + static_cast<std::ptrdiff_t>(n_train), pairs.end());
  return {std::move(train), std::move(test)};
}

Adjacency build_adjacency(const KnowledgeGraph& kg) {
  const auto n = kg.num_entities();
  std::vector<std::set<EntityIndex>> sets(n);
  for (std::size_t i = 0; i < n; ++i) sets[i].insert(static_cast<EntityIndex>(i));
  for (const auto& t : kg.relation_triples) {
    if (t.head >= n || t.tail >= n) throw ValidationError("relation triple endpoint out of range");
    sets[t.head].insert(t.tail);
    sets[t.tail].insert(t.head);
  }
  Adjacency adj;
  adj.neighbors.reserve(n);
  for (auto& s : sets) adj.neighbors.emplace_back(s.begin(), s.end());
  return adj;
}

}  // namespace pcmea
