#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace pcmea {

using EntityIndex = std::uint32_t;

enum class GraphSide : std::uint8_t { Source = 0, Target = 1 };

/// Entity reference that remembers which graph it belongs to.
struct EntityId {
  GraphSide side = GraphSide::Source;
  EntityIndex index = 0;

  friend bool operator==(const EntityId&, const EntityId&) = default;
  friend auto operator<=>(const EntityId&, const EntityId&) = default;
};

struct RelationTriple {
  EntityIndex head;
  std::uint32_t relation;
  EntityIndex tail;

  friend bool operator==(const RelationTriple&, const RelationTriple&) = default;
  friend auto operator<=>(const RelationTriple&, const RelationTriple&) = default;
};

struct AttributeTriple {
  EntityIndex entity;
  std::uint32_t attribute;
  std::string value;

  friend bool operator==(const AttributeTriple&, const AttributeTriple&) = default;
};

/// One multi-modal knowledge graph. Entities, relations and attributes are
/// dense indices into the name tables; images live in a separate feature file
/// keyed by entity index.
class KnowledgeGraph {
 public:
  std::vector<std::string> entities;
  std::vector<std::string> relations;
  std::vector<std::string> attributes;
  std::vector<RelationTriple> relation_triples;
  std::vector<AttributeTriple> attribute_triples;

  std::size_t num_entities() const { return entities.size(); }

  /// Throws ValidationError if any triple references an out-of-range index
  /// or a name table has duplicates.
  void validate() const;

  /// Name -> index table for the entity list.
  std::unordered_map<std::string, EntityIndex> entity_index() const;
};

struct SeedPair {
  EntityIndex source;
  EntityIndex target;

  friend bool operator==(const SeedPair&, const SeedPair&) = default;
  friend auto operator<=>(const SeedPair&, const SeedPair&) = default;
};

enum class SeedRole : std::uint8_t { Train, Test };

/// 1-to-1 set of aligned entity pairs.
struct SeedAlignmentSet {
  std::vector<SeedPair> pairs;
  SeedRole role = SeedRole::Train;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  void validate() const;
};

struct MMKGPair {
  KnowledgeGraph source;
  KnowledgeGraph target;
  SeedAlignmentSet train_seeds;
  SeedAlignmentSet test_seeds;

  /// Checks both graphs, both seed sets, and train/test disjointness.
  void validate() const;
  const KnowledgeGraph& graph(GraphSide side) const {
    return side == GraphSide::Source ? source : target;
  }
};

/// Undirected neighbor lists with a self-loop on every entity. Each list is
/// sorted ascending.
struct Adjacency {
  std::vector<std::vector<EntityIndex>> neighbors;

  std::size_t num_nodes() const { return neighbors.size(); }
  std::size_t num_edges() const;
};

/// Reads a graph. Relation lines are `head<TAB>relation<TAB>tail`, attribute
/// lines `entity<TAB>attribute<TAB>value`, and the entity list holds one name
/// per line. Heads, tails and attribute subjects must be names from the
/// entity list. When `entity_list_path` is empty, entities are instead
/// registered in first-appearance order.
KnowledgeGraph load_kg(const std::filesystem::path& triples_path,
                       const std::filesystem::path& attr_path,
                       const std::filesystem::path& entity_list_path);

/// Writes the three files in canonical form (stored order, LF endings).
void write_kg(const KnowledgeGraph& kg, const std::filesystem::path& triples_path,
              const std::filesystem::path& attr_path,
              const std::filesystem::path& entity_list_path);

/// Reads `source<TAB>target` name pairs, resolved against the two graphs.
SeedAlignmentSet load_seeds(const std::filesystem::path& path, const KnowledgeGraph& source,
                            const KnowledgeGraph& target);

void write_seeds(const SeedAlignmentSet& seeds, const KnowledgeGraph& source,
                 const KnowledgeGraph& target, const std::filesystem::path& path);

/// Deterministic train/test partition. The input is sorted canonically before
/// shuffling, so file order does not matter. |train| = round(fraction * |seeds|).
std::pair<SeedAlignmentSet, SeedAlignmentSet> split_seeds(const SeedAlignmentSet& seeds,
                                                          double train_fraction,
                                                          std::uint64_t rng_seed);

Adjacency build_adjacency(const KnowledgeGraph& kg);

}  // namespace pcmea
