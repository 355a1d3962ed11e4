#pragma once

#include <map>
#include <span>
#include <vector>

#include "pcmea/kg.hpp"
#include "pcmea/matrix.hpp"

namespace pcmea {

struct Prediction {
  EntityIndex target = 0;
  double score = 0.0;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

using PredictionMap = std::map<EntityIndex, Prediction>;

struct DictionaryEntry {
  EntityIndex target = 0;
  int epoch = 0;
  double score = 0.0;

  friend bool operator==(const DictionaryEntry&, const DictionaryEntry&) = default;
};

struct PromotedPair {
  SeedPair pair;
  int epoch = 0;
  double score = 0.0;

  friend bool operator==(const PromotedPair&, const PromotedPair&) = default;
};

/// Dynamic prediction dictionary plus the pseudo-labels promoted so far.
struct PseudoLabelStore {
  std::map<EntityIndex, DictionaryEntry> dictionary;
  std::vector<PromotedPair> promoted;

  bool source_promoted(EntityIndex s) const;
  bool target_promoted(EntityIndex t) const;
  std::vector<SeedPair> promoted_pairs() const;

  /// Promoted pairs are 1-to-1 and share no entity with `seeds`.
  void validate(const SeedAlignmentSet& seeds) const;

  friend bool operator==(const PseudoLabelStore&, const PseudoLabelStore&) = default;
};

/// Argmax-cosine target among `candidate_targets` for every source in
/// `unlabeled_sources`; ties go to the lower target index. Rows of the
/// embedding matrices are unit-norm joint vectors indexed by entity.
PredictionMap predict_unlabeled(const Matrix& source_emb, const Matrix& target_emb,
                                std::span<const EntityIndex> unlabeled_sources,
                                std::span<const EntityIndex> candidate_targets);

/// Keeps only predictions that a strict majority of the per-modality
/// predictions agree with.
PredictionMap filter_by_ensemble(const PredictionMap& joint, std::span<const PredictionMap> per_modality);

/// Promotes every source whose stored prediction equals its new one. Several
/// stable sources claiming one target: the highest score wins (lower source
/// index on equal scores) and the rest stay in the dictionary. Every other new
/// prediction overwrites its dictionary entry. Returns the pairs promoted now.
std::vector<PromotedPair> calibrate_pseudo_labels(PseudoLabelStore& store, const PredictionMap& predictions,
                                                  int epoch);

}  // namespace pcmea
