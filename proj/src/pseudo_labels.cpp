#include "pcmea/pseudo_labels.hpp"

#include <algorithm>
#include <set>

#include "pcmea/error.hpp"

namespace pcmea {

bool PseudoLabelStore::source_promoted(EntityIndex s) const {
  return std::any_of(promoted.begin(), promoted.end(), [s](const PromotedPair& p) { return p.pair.source == s; });
}

bool PseudoLabelStore::target_promoted(EntityIndex t) const {
  return std::any_of(promoted.begin(), promoted.end(), [t](const PromotedPair& p) { return p.pair.target == t; });
}

std::vector<SeedPair> PseudoLabelStore::promoted_pairs() const {
  std::vector<SeedPair> out;
  out.reserve(promoted.size());
  for (const auto& p : promoted) out.push_back(p.pair);
  return out;
}

void PseudoLabelStore::validate(const SeedAlignmentSet& seeds) const {
  std::set<EntityIndex> src, tgt;
  for (const auto& s : seeds.pairs) {
    src.insert(s.source);
    tgt.insert(s.target);
  }
  for (const auto& p : promoted) {
    if (!src.insert(p.pair.source).second || !tgt.insert(p.pair.target).second) {
      throw ValidationError("pseudo-labels collide with each other or with seeds");
    }
  }
}

PredictionMap predict_unlabeled(const Matrix& source_emb, const Matrix& target_emb,
                                std::span<const EntityIndex> unlabeled_sources,
                                std::span<const EntityIndex> candidate_targets) {
  PredictionMap out;
  if (candidate_targets.empty()) return out;
  if (source_emb.cols() != target_emb.cols()) throw FormatError("embedding dims differ");
  for (auto s : unlabeled_sources) {
    const auto row = source_emb.row(s);
    bool have = false;
    Prediction best;
    for (auto t : candidate_targets) {
      const double score = row.dot(target_emb.row(t));
      if (!have || score > best.score || (score == best.score && t < best.target)) {
        best = {t, score};
        have = true;
      }
    }
    out.emplace(s, best);
  }
  return out;
}

PredictionMap filter_by_ensemble(const PredictionMap& joint, std::span<const PredictionMap> per_modality) {
  PredictionMap out;
  for (const auto& [s, pred] : joint) {
    std::size_t votes = 0;
    for (const auto& m : per_modality) {
      const auto it = m.find(s);
      if (it != m.end() && it->second.target == pred.target) ++votes;
    }
    if (2 * votes > per_modality.size()) out.emplace(s, pred);
  }
  return out;
}

std::vector<PromotedPair> calibrate_pseudo_labels(PseudoLabelStore& store, const PredictionMap& predictions,
                                                  int epoch) {
  // target -> best stable claimant
  std::map<EntityIndex, std::pair<EntityIndex, double>> winners;
  for (const auto& [s, pred] : predictions) {
    if (store.source_promoted(s) || store.target_promoted(pred.target)) continue;
    const auto it = store.dictionary.find(s);
    if (it == store.dictionary.end() || it->second.target != pred.target) continue;
    auto [w, inserted] = winners.try_emplace(pred.target, s, pred.score);
    if (!inserted && pred.score > w->second.second) w->second = {s, pred.score};
  }

  std::vector<PromotedPair> fresh;
  for (const auto& [t, claim] : winners) fresh.push_back({{claim.first, t}, epoch, claim.second});
  std::sort(fresh.begin(), fresh.end(),
            [](const PromotedPair& a, const PromotedPair& b) { return a.pair.source < b.pair.source; });

  std::set<EntityIndex> promoted_now;
  for (const auto& p : fresh) promoted_now.insert(p.pair.source);
  for (const auto& [s, pred] : predictions) {
    if (promoted_now.contains(s)) {
      store.dictionary.erase(s);
    } else if (!store.source_promoted(s)) {
      store.dictionary[s] = {pred.target, epoch, pred.score};
    }
  }
  store.promoted.insert(store.promoted.end(), fresh.begin(), fresh.end());
  return fresh;
}

}  // namespace pcmea
