#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "pcmea/error.hpp"
#include "pcmea/pseudo_labels.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace pcmea {
namespace {

using testing::CalibrationModel;
using testing::random_unit_rows;

// ---------------------------------------------------------------------------
// predict_unlabeled

TEST(PredictUnlabeled, MatchesBruteForce) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix src = random_unit_rows(rng, 20, 4), tgt = random_unit_rows(rng, 25, 4);
    std::vector<EntityIndex> sources, targets;
    for (EntityIndex i = 0; i < 20; ++i) {
      if (uniform_unit(rng) < 0.6) sources.push_back(i);
    }
    for (EntityIndex j = 0; j < 25; ++j) {
      if (uniform_unit(rng) < 0.6) targets.push_back(j);
    }
    const auto preds = predict_unlabeled(src, tgt, sources, targets);
    if (targets.empty()) {
      EXPECT_TRUE(preds.empty());
      continue;
    }
    ASSERT_EQ(preds.size(), sources.size());
    for (auto s : sources) {
      std::vector<std::pair<double, EntityIndex>> scored;
      for (auto t : targets) scored.push_back({-src.row(s).dot(tgt.row(t)), t});
      std::sort(scored.begin(), scored.end());
      EXPECT_EQ(preds.at(s).target, scored.front().second);
      EXPECT_DOUBLE_EQ(preds.at(s).score, -scored.front().first);
    }
  }
}

TEST(PredictUnlabeled, TiesGoToLowerTarget) {
  Matrix src(1, 2), tgt(3, 2);
  src << 1, 0;
  tgt << 0, 1, 1, 0, 1, 0;
  const std::vector<EntityIndex> s{0}, t{2, 1, 0};
  EXPECT_EQ(predict_unlabeled(src, tgt, s, t).at(0).target, 1u);
}

TEST(FilterByEnsemble, StrictMajority) {
  PredictionMap joint{{0, {5, 0.9}}, {1, {6, 0.8}}};
  std::vector<PredictionMap> modal(4);
  modal[0] = {{0, {5, 0.1}}, {1, {6, 0.1}}};
  modal[1] = {{0, {5, 0.1}}, {1, {7, 0.1}}};
  modal[2] = {{0, {5, 0.1}}, {1, {6, 0.1}}};
  modal[3] = {{0, {4, 0.1}}, {1, {7, 0.1}}};
  const auto kept = filter_by_ensemble(joint, modal);
  EXPECT_EQ(kept.size(), 1u);
  EXPECT_TRUE(kept.contains(0));
}

// ---------------------------------------------------------------------------
// calibrate_pseudo_labels

TEST(Calibrate, FirstSightingOnlyRecords) {
  PseudoLabelStore store;
  const auto fresh = calibrate_pseudo_labels(store, {{3, {7, 0.5}}}, 0);
  EXPECT_TRUE(fresh.empty());
  EXPECT_EQ(store.dictionary.at(3), (DictionaryEntry{7, 0, 0.5}));
}

TEST(Calibrate, RepeatPromotesAndLeavesDictionary) {
  PseudoLabelStore store;
  store.dictionary[3] = {7, 0, 0.5};
  const auto fresh = calibrate_pseudo_labels(store, {{3, {7, 0.6}}}, 2);
  ASSERT_EQ(fresh.size(), 1u);
  EXPECT_EQ(fresh[0], (PromotedPair{{3, 7}, 2, 0.6}));
  EXPECT_FALSE(store.dictionary.contains(3));
  EXPECT_TRUE(store.source_promoted(3));
  EXPECT_TRUE(store.target_promoted(7));
}

TEST(Calibrate, ChangedPredictionOverwrites) {
  PseudoLabelStore store;
  store.dictionary[3] = {7, 0, 0.5};
  const auto fresh = calibrate_pseudo_labels(store, {{3, {8, 0.4}}}, 2);
  EXPECT_TRUE(fresh.empty());
  EXPECT_EQ(store.dictionary.at(3), (DictionaryEntry{8, 2, 0.4}));
}

TEST(Calibrate, PromotedTargetIsNotReclaimed) {
  PseudoLabelStore store;
  store.promoted.push_back({{1, 7}, 0, 0.9});
  store.dictionary[3] = {7, 0, 0.5};
  const auto fresh = calibrate_pseudo_labels(store, {{3, {7, 0.6}}}, 2);
  EXPECT_TRUE(fresh.empty());
  EXPECT_EQ(store.promoted.size(), 1u);
}

// Every configuration of two sources claiming one target: each source's
// previous dictionary state (absent, same target, other target) crossed with
// the three score orderings.
TEST(Calibrate, ExhaustiveTwoSourceOneTargetConflicts) {
  enum class Prev { Absent, Same, Other };
  const EntityIndex target = 9;
  for (auto p0 : {Prev::Absent, Prev::Same, Prev::Other}) {
    for (auto p1 : {Prev::Absent, Prev::Same, Prev::Other}) {
      for (double s1 : {0.3, 0.5, 0.7}) {
        for (bool swap_order : {false, true}) {
          const EntityIndex a = swap_order ? 4 : 2;
          const EntityIndex b = swap_order ? 2 : 4;
          const double sa = 0.5, sb = s1;
          PseudoLabelStore store;
          auto seed_prev = [&](EntityIndex s, Prev p) {
            if (p == Prev::Same) store.dictionary[s] = {target, 0, 0.1};
            if (p == Prev::Other) store.dictionary[s] = {target + 1, 0, 0.1};
          };
          seed_prev(a, p0);
          seed_prev(b, p1);
          const PredictionMap preds{{a, {target, sa}}, {b, {target, sb}}};
          const auto fresh = calibrate_pseudo_labels(store, preds, 2);

          const bool stable_a = p0 == Prev::Same, stable_b = p1 == Prev::Same;
          std::optional<EntityIndex> winner;
          if (stable_a && stable_b) {
            if (sa > sb) winner = a;
            else if (sb > sa) winner = b;
            else winner = std::min(a, b);
          } else if (stable_a) {
            winner = a;
          } else if (stable_b) {
            winner = b;
          }
          SCOPED_TRACE(::testing::Message() << "prev " << int(p0) << "," << int(p1) << " score " << s1 << " swap "
                                            << swap_order);
          if (!winner) {
            EXPECT_TRUE(fresh.empty());
          } else {
            ASSERT_EQ(fresh.size(), 1u);
            EXPECT_EQ(fresh[0].pair, (SeedPair{*winner, target}));
            EXPECT_EQ(fresh[0].score, *winner == a ? sa : sb);
          }
          for (EntityIndex s : {a, b}) {
            if (winner && s == *winner) {
              EXPECT_FALSE(store.dictionary.contains(s));
            } else {
              EXPECT_EQ(store.dictionary.at(s), (DictionaryEntry{target, 2, s == a ? sa : sb}));
            }
          }
        }
      }
    }
  }
}

TEST(Calibrate, RandomSequencesFollowTheRule) {
  Rng rng(2);
  for (int run = 0; run < 300; ++run) {
    const auto n_src = 2 + uniform_index(rng, 8);
    const auto n_tgt = 2 + uniform_index(rng, 6);
    // Seeds occupy source 0 and target 0; predictions never name them.
    SeedAlignmentSet seeds;
    seeds.pairs = {{0, 0}};
    PseudoLabelStore store;
    CalibrationModel model;
    std::map<EntityIndex, EntityIndex> previous;
    std::size_t last_size = 0;
    for (int epoch = 0; epoch < 20; epoch += 2) {
      PredictionMap preds;
      for (EntityIndex s = 1; s < n_src; ++s) {
        if (store.source_promoted(s)) continue;
        if (uniform_unit(rng) < 0.2) continue;  // not predicted this window
        const auto t = static_cast<EntityIndex>(1 + uniform_index(rng, n_tgt - 1));
        const double score = static_cast<double>(uniform_index(rng, 4)) / 4.0;
        preds[s] = {t, score};
      }
      const auto fresh = calibrate_pseudo_labels(store, preds, epoch);
      const auto expect = model.step(preds);

      std::set<std::pair<EntityIndex, EntityIndex>> got;
      for (const auto& p : fresh) {
        got.insert({p.pair.source, p.pair.target});
        EXPECT_EQ(p.epoch, epoch);
        // Promotion only on a repeated (source, target) prediction.
        ASSERT_TRUE(previous.contains(p.pair.source));
        EXPECT_EQ(previous.at(p.pair.source), p.pair.target);
        EXPECT_EQ(preds.at(p.pair.source).target, p.pair.target);
      }
      EXPECT_EQ(got, expect) << "run " << run << " epoch " << epoch;
      EXPECT_TRUE(std::is_sorted(fresh.begin(), fresh.end(), [](const auto& x, const auto& y) {
        return x.pair.source < y.pair.source;
      }));
      EXPECT_NO_THROW(store.validate(seeds));
      EXPECT_GE(store.promoted.size(), last_size);
      last_size = store.promoted.size();
      for (const auto& [s, p] : preds) previous[s] = p.target;
      for (const auto& p : store.promoted) previous.erase(p.pair.source);
    }
  }
}

TEST(Calibrate, AlwaysChangingPredictionsNeverPromote) {
  Rng rng(3);
  for (int run = 0; run < 100; ++run) {
    PseudoLabelStore store;
    const auto n_tgt = 3 + uniform_index(rng, 5);
    std::map<EntityIndex, EntityIndex> last;
    for (int epoch = 0; epoch < 30; epoch += 2) {
      PredictionMap preds;
      for (EntityIndex s = 0; s < 6; ++s) {
        EntityIndex t;
        do {
          t = static_cast<EntityIndex>(uniform_index(rng, n_tgt));
        } while (last.contains(s) && last.at(s) == t);
        last[s] = t;
        preds[s] = {t, uniform_unit(rng)};
      }
      EXPECT_TRUE(calibrate_pseudo_labels(store, preds, epoch).empty());
    }
    EXPECT_TRUE(store.promoted.empty());
  }
}

TEST(PseudoLabelStore, ValidateDetectsCollisions) {
  SeedAlignmentSet seeds;
  seeds.pairs = {{0, 0}};
  PseudoLabelStore store;
  store.promoted = {{{1, 1}, 2, 0.5}, {{2, 2}, 2, 0.5}};
  EXPECT_NO_THROW(store.validate(seeds));
  store.promoted.push_back({{3, 1}, 4, 0.5});
  EXPECT_THROW(store.validate(seeds), ValidationError);
  store.promoted.pop_back();
  store.promoted.push_back({{0, 5}, 4, 0.5});
  EXPECT_THROW(store.validate(seeds), ValidationError);
  EXPECT_EQ(store.promoted_pairs().size(), 3u);
}

}  // namespace
}  // namespace pcmea
